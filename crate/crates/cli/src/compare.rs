//! `compare`: per-(asset, side) medians across windows of fit reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use liqgeom::fit::{ModelKind, REPORT_HEADER};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;

pub const COMPARE_HEADER: &str = "asset,side,n_windows,r2_gamma,r2_ln,delta_aic";

/// Median with the two middle values averaged for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Group {
    pub windows: std::collections::BTreeSet<String>,
    pub r2_gamma: Vec<f64>,
    pub r2_ln: Vec<f64>,
    pub delta_aic: Vec<f64>,
}

/// One aggregate row: medians over converged fits.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub asset: String,
    pub side: String,
    pub n_windows: usize,
    pub r2_gamma: Option<f64>,
    pub r2_ln: Option<f64>,
    pub delta_aic: Option<f64>,
}

fn report_paths(inputs: &[PathBuf]) -> Vec<PathBuf> {
    inputs.iter().map(|p| if p.is_dir() { p.join("fit_report.csv") } else { p.clone() }).collect()
}

pub fn read_reports(paths: &[PathBuf]) -> Result<BTreeMap<(String, String), Group>, CliError> {
    let mut groups: BTreeMap<(String, String), Group> = BTreeMap::new();
    for path in paths {
        read_report(path, &mut groups)?;
    }
    Ok(groups)
}

fn read_report(path: &Path, groups: &mut BTreeMap<(String, String), Group>) -> Result<(), CliError> {
    let data = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data(e.to_string()))?;
    let header = rdr.headers().map_err(|e| data(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != REPORT_HEADER {
        return Err(data(format!("expected header {REPORT_HEADER}")));
    }
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data(e.to_string()))?;
        let line = i + 2;
        let get = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<Option<f64>, CliError> {
            match get(j).trim() {
                "" => Ok(None),
                s => s.parse::<f64>().map(Some).map_err(|_| data(format!("line {line}: bad number {s:?}"))),
            }
        };
        let model: ModelKind = get(3).parse().map_err(|e| data(format!("line {line}: {e}")))?;
        let converged = get(12) == "true";
        let g = groups.entry((get(0).to_string(), get(1).to_string())).or_default();
        g.windows.insert(get(2).to_string());
        if !converged {
            continue;
        }
        match model {
            ModelKind::IntegratedGamma => g.r2_gamma.extend(num(9)?),
            ModelKind::CumulativeLognormal => {
                g.r2_ln.extend(num(9)?);
                g.delta_aic.extend(num(11)?);
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn aggregate(groups: &BTreeMap<(String, String), Group>) -> Vec<Row> {
    groups
        .iter()
        .map(|((asset, side), g)| Row {
            asset: asset.clone(),
            side: side.clone(),
            n_windows: g.windows.len(),
            r2_gamma: median(&g.r2_gamma),
            r2_ln: median(&g.r2_ln),
            delta_aic: median(&g.delta_aic),
        })
        .collect()
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.inputs.is_empty() {
        return Err(CliError::Validation("io.input: no fit reports given".into()));
    }
    let rows = aggregate(&read_reports(&report_paths(&cfg.inputs))?);
    if rows.is_empty() {
        return Err(CliError::Data("EmptyInput: the reports contain no rows".into()));
    }
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut csv = format!("{COMPARE_HEADER}\n");
    let mut table = format!("{:<8} {:<5} {:>8} {:>8} {:>10}\n", "asset", "side", "R2_G", "R2_LN", "dAIC");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.asset,
            r.side,
            r.n_windows,
            opt(r.r2_gamma),
            opt(r.r2_ln),
            opt(r.delta_aic)
        );
        let cell = |v: Option<f64>, p: usize| v.map(|v| format!("{v:.p$}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            table,
            "{:<8} {:<5} {:>8} {:>8} {:>10}",
            r.asset,
            r.side,
            cell(r.r2_gamma, 2),
            cell(r.r2_ln, 2),
            cell(r.delta_aic, 1)
        );
    }
    let out = OutputDir::create(cfg)?;
    out.write("compare.csv", csv)?;
    print!("{table}");
    Ok(())
}
