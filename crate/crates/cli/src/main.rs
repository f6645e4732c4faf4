use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = arag_cli::Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("ARAG_LOG").unwrap_or_else(|_| "info".into()),
        )
        .without_time()
        .with_target(false)
        .init();
    match arag_cli::run(&cli) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.exit_code())
        }
    }
}
