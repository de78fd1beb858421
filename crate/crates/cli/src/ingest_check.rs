//! `ingest-check`: validates depth CSVs without fitting.

use std::cell::Cell;

use liqgeom::ingest::{self, SnapshotStream};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct CheckSummary {
    pub records: u64,
    pub snapshots: u64,
    pub two_sided: u64,
    pub first_second: Option<i64>,
    pub last_second: Option<i64>,
}

pub fn check(path: &std::path::Path, cfg: &RunConfig) -> Result<CheckSummary, CliError> {
    let records = ingest::read_depth_csv(path).map_err(|e| CliError::ingest(path, e))?;
    let count = Cell::new(0u64);
    let counted = records.inspect(|r| {
        if r.is_ok() {
            count.set(count.get() + 1)
        }
    });
    let stream = SnapshotStream::new(counted, cfg.ingest_tick_size).map_err(|e| CliError::ingest(path, e))?;
    let mut s = CheckSummary::default();
    for snap in stream {
        let snap = snap.map_err(|e| CliError::ingest(path, e))?;
        s.snapshots += 1;
        s.two_sided += (!snap.bids().is_empty() && !snap.asks().is_empty()) as u64;
        s.first_second.get_or_insert(snap.timestamp());
        s.last_second = Some(snap.timestamp());
    }
    s.records = count.get();
    Ok(s)
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.inputs.is_empty() {
        return Err(CliError::Validation("io.input: no depth files given".into()));
    }
    for path in &cfg.inputs {
        let s = check(path, cfg)?;
        let span = match (s.first_second, s.last_second) {
            (Some(a), Some(b)) => format!("seconds {a}..={b}"),
            _ => "empty".to_string(),
        };
        println!(
            "{}: ok, {} records, {} snapshots ({} two-sided), {span}",
            path.display(),
            s.records,
            s.snapshots,
            s.two_sided
        );
    }
    Ok(())
}
