use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use arag_core::corpus::QueryRecord;
use arag_core::eval::{aggregate, MetricRow};

use super::{queries, read_trace, require_file};
use crate::config::RunConfig;
use crate::{Failure, FailureExt, Status};

fn trace_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Side-by-side table of one metric row per trace.
pub fn render_table(rows: &[(String, MetricRow)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("trace".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>7}  {:>6}  {:>6}  {:>6}  {:>9}  {:>11}  {:>10}  {:>8}",
        "trace", "queries", "EM", "F1", "Acc", "avg_steps", "total_steps", "avg_time_s", "rel_time"
    );
    for (name, r) in rows {
        let rel = r.rel_time.map(|t| format!("{t:.3}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>6.2}  {:>6.2}  {:>6.2}  {:>9.3}  {:>11}  {:>10.4}  {:>8}",
            name,
            r.queries,
            100.0 * r.em,
            100.0 * r.f1,
            100.0 * r.acc,
            r.avg_steps,
            r.total_steps,
            r.avg_time,
            rel
        );
    }
    out
}

pub fn run(config: &RunConfig, traces: &[PathBuf]) -> Result<Status, Failure> {
    for t in traces {
        require_file("trace", t)?;
    }
    if let Some(b) = &config.baseline_trace {
        require_file("baseline_trace", b)?;
    }
    let queries = queries(config)?;
    let by_id: HashMap<&str, &QueryRecord> = queries.iter().map(|q| (q.query_id.as_str(), q)).collect();
    let baseline: Option<HashMap<String, f64>> = match &config.baseline_trace {
        Some(path) => Some(read_trace(path).usage()?.into_iter().map(|r| (r.query_id, r.elapsed)).collect()),
        None => None,
    };

    let mut rows = Vec::with_capacity(traces.len());
    for path in traces {
        let results = read_trace(path).usage()?;
        let row = aggregate(&results, &by_id, baseline.as_ref())
            .with_context(|| format!("trace {}", path.display()))
            .usage()?;
        rows.push((trace_name(path), row));
    }
    print!("{}", render_table(&rows));
    Ok(Status::Complete)
}
