//! `arag`: build indexes, label queries, train the router and evaluate
//! answering strategies.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{BackendSpec, EvalMode, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "arag", version, about = "Adaptive retrieval-augmented QA experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: GlobalFlags,
}

#[derive(Debug, Default, clap::Args)]
pub struct GlobalFlags {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Evaluation mode: no_retrieval, single, multi, adaptive or oracle.
    #[arg(long, global = true)]
    pub mode: Option<EvalMode>,
    /// "remote" or "mock:<script.jsonl>".
    #[arg(long, global = true)]
    pub backend: Option<BackendSpec>,
    /// Documents per retrieval call.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub max_steps: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Any configuration key, as KEY=VALUE; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the BM25 index snapshot from the corpus.
    Index,
    /// Run all three strategies on sampled queries and write training labels.
    Label,
    /// Train the complexity classifier on a training-set file.
    Train,
    /// Answer queries with one strategy or a router and write trace and report.
    Evaluate,
    /// Summarize trace files side by side.
    Report {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
}

/// How a command ended when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    /// Some queries failed, within the configured tolerance.
    Partial,
}

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, configuration or input files.
    Usage(anyhow::Error),
    /// Anything that went wrong while doing the work.
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Complete => 0,
            Status::Partial => 1,
        }
    }
}

/// Tags errors with the exit class they belong to.
pub trait FailureExt<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> FailureExt<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Resolves the configuration: defaults, then the file, then flags.
pub fn resolve_config(flags: &GlobalFlags) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::default();
    if let Some(path) = &flags.config {
        config.apply_file(path).map_err(anyhow::Error::msg).usage()?;
    }
    for kv in &flags.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got {kv:?}"))
            .usage()?;
        config.set(k.trim(), v.trim()).map_err(anyhow::Error::msg).usage()?;
    }
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if let Some(mode) = flags.mode {
        config.mode = Some(mode);
    }
    if let Some(backend) = &flags.backend {
        config.backend = Some(backend.clone());
    }
    if let Some(k) = flags.k {
        config.k = k;
    }
    if let Some(m) = flags.max_steps {
        config.max_steps = m;
    }
    if let Some(out) = &flags.out {
        config.out = out.clone();
    }
    config.validate().map_err(anyhow::Error::msg).usage()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<Status, Failure> {
    let config = resolve_config(&cli.flags)?;
    match &cli.command {
        Command::Index => commands::index::run(&config),
        Command::Label => commands::label::run(&config),
        Command::Train => commands::train::run(&config),
        Command::Evaluate => commands::evaluate::run(&config),
        Command::Report { traces } => commands::report::run(&config, traces),
    }
}
