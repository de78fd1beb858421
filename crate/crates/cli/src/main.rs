//! `liqgeom` command-line driver.
//!
//! Exit codes: 0 success, 1 validation failure, 2 data error, 3 numerical failure.

mod compare;
mod config;
mod error;
mod fitcmd;
mod ingest_check;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, OUTPUT_DIR_ENV};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "liqgeom", version, about = "Liquidity geometry from projected relational graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate graph inflation and write synthetic book profiles.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit liquidity models to window profiles or depth CSVs.
    Fit {
        /// Window CSVs, directories of them, or depth CSVs (overrides io.input).
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate fit reports into per-asset/side medians.
    Compare {
        /// fit_report.csv files or directories containing one (overrides io.input).
        reports: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Validate depth CSVs without fitting.
    IngestCheck {
        /// Depth CSVs, optionally gzip-compressed (overrides io.input).
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

/// Config sources; later ones win: file < LIQGEOM_OUTPUT_DIR < --set < flags.
#[derive(Args, Debug)]
struct Common {
    /// Flat `section.key = value` config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any config key.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    n_vertices: Option<String>,
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    n_steps: Option<String>,
    #[arg(long)]
    snapshot_every: Option<String>,
    #[arg(long)]
    tick_size: Option<String>,
    #[arg(long)]
    size_rule: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    orientation: Option<String>,
    /// Bins per side.
    #[arg(long = "K")]
    k: Option<String>,
    /// Snapshots (simulate) or seconds (depth data) per window.
    #[arg(long = "T")]
    t: Option<String>,
    /// Comma-separated model names.
    #[arg(long)]
    models: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    grid_scale: Option<String>,
    #[arg(long)]
    ingest_tick_size: Option<String>,
    #[arg(long, short)]
    output_dir: Option<String>,
    #[arg(long)]
    asset: Option<String>,
}

impl Common {
    fn flags(&self) -> [(&'static str, &Option<String>); 17] {
        [
            ("simulation.n_vertices", &self.n_vertices),
            ("simulation.topology", &self.topology),
            ("simulation.n_steps", &self.n_steps),
            ("simulation.snapshot_every", &self.snapshot_every),
            ("simulation.tick_size", &self.tick_size),
            ("simulation.size_rule", &self.size_rule),
            ("simulation.seed", &self.seed),
            ("simulation.orientation", &self.orientation),
            ("geometry.K", &self.k),
            ("geometry.T", &self.t),
            ("fit.models", &self.models),
            ("fit.tol", &self.tol),
            ("fit.max_iter", &self.max_iter),
            ("fit.grid_scale", &self.grid_scale),
            ("ingest.tick_size", &self.ingest_tick_size),
            ("io.output_dir", &self.output_dir),
            ("io.asset", &self.asset),
        ]
    }

    fn resolve(&self, inputs: &[PathBuf]) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.set("io.output_dir", &dir)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("--set {kv:?}: expected KEY=VALUE")))?;
            cfg.set(k.trim(), v)?;
        }
        for (key, value) in self.flags() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if !inputs.is_empty() {
            cfg.inputs = inputs.to_vec();
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common } => simulate::run(&common.resolve(&[])?),
        Command::Fit { inputs, common } => fitcmd::run(&common.resolve(&inputs)?),
        Command::Compare { reports, common } => compare::run(&common.resolve(&reports)?),
        Command::IngestCheck { inputs, common } => ingest_check::run(&common.resolve(&inputs)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
