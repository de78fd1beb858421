//! `fit`: per-window, per-side fits of the configured models.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use liqgeom::book::{self, CumulativeProfile, Side, SideProfile};
use liqgeom::fit::{self, FitError, FitOptions, FitResult, LmOptions, ModelKind, REPORT_HEADER};
use liqgeom::ingest::{self, SnapshotStream};
use rayon::prelude::*;

use crate::compare::median;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;

pub const PARAMS_HEADER: &str = "asset,side,window,model,p1,p2,p3,iterations,gradient,converged";
pub const DIAGNOSTICS_HEADER: &str =
    "asset,side,window,model,n_log,median_log_residual,acf_lags,acf_within_bound,logslope_gamma,logslope_lambda";
const MAX_ACF_LAG: usize = 20;

pub fn fit_options(cfg: &RunConfig) -> FitOptions<f64> {
    FitOptions {
        lm: LmOptions { max_iter: cfg.fit_max_iter, rtol: cfg.fit_tol, ..LmOptions::default() },
        grid_scale: cfg.grid_scale,
    }
}

/// One averaged window of one side.
#[derive(Debug, Clone)]
pub struct Job {
    pub asset: String,
    pub side: Side,
    pub window: i64,
    pub q: SideProfile<f64>,
    pub s: CumulativeProfile<f64>,
}

impl Job {
    fn stem(&self) -> String {
        format!("{}_{}_{}", self.asset, self.side.as_str(), self.window)
    }
}

enum Source {
    Window(PathBuf),
    Depth(PathBuf),
}

fn classify(path: &Path) -> Result<Source, CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if name.ends_with(".gz") {
        return Ok(Source::Depth(path.to_path_buf()));
    }
    let mut first = String::new();
    BufReader::new(File::open(path).map_err(CliError::io(path))?)
        .read_line(&mut first)
        .map_err(CliError::io(path))?;
    match first.trim_end() {
        "x,q,S" => Ok(Source::Window(path.to_path_buf())),
        h if h.starts_with("ts_ns") => Ok(Source::Depth(path.to_path_buf())),
        h => Err(CliError::Data(format!("{}: unrecognised header {h:?}", path.display()))),
    }
}

fn discover(inputs: &[PathBuf]) -> Result<Vec<Source>, CliError> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            // a simulate output directory holds its windows one level down
            let dir = if input.join("windows").is_dir() { input.join("windows") } else { input.clone() };
            let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(CliError::io(&dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    let n = p.to_string_lossy();
                    p.is_file() && (n.ends_with(".csv") || n.ends_with(".csv.gz"))
                })
                .collect();
            files.sort();
            for f in files {
                out.push(classify(&f)?);
            }
        } else {
            out.push(classify(input)?);
        }
    }
    Ok(out)
}

/// Parses `{asset}_{side}_{start}.csv`; the asset may itself contain `_`.
fn parse_window_name(path: &Path) -> Result<(String, Side, i64), CliError> {
    let bad = || CliError::Data(format!("{}: expected file name ASSET_SIDE_START.csv", path.display()));
    let stem = path.file_stem().and_then(|s| s.to_str()).ok_or_else(bad)?;
    let mut parts = stem.rsplitn(3, '_');
    let start = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let side = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let asset = parts.next().filter(|a| !a.is_empty()).ok_or_else(bad)?;
    Ok((asset.to_string(), side, start))
}

pub fn load_window(path: &Path) -> Result<Job, CliError> {
    let (asset, side, window) = parse_window_name(path)?;
    let data = |msg: String| CliError::Data(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| data(e.to_string()))?;
    let mut q = Vec::new();
    let mut s = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| data(e.to_string()))?;
        let field = |j: usize, name: &str| -> Result<f64, CliError> {
            rec.get(j)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| data(format!("row {}: bad {name}", i + 2)))
        };
        if field(0, "x")? != (i + 1) as f64 {
            return Err(data(format!("row {}: x must run 1..K", i + 2)));
        }
        q.push(field(1, "q")?);
        s.push(field(2, "S")?);
    }
    if q.is_empty() {
        return Err(data("no rows".into()));
    }
    Ok(Job { asset, side, window, q: SideProfile { side, q }, s: CumulativeProfile { side, s } })
}

fn asset_of_depth(path: &Path) -> String {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("depth");
    let name = name.strip_suffix(".gz").unwrap_or(name);
    name.strip_suffix(".csv").unwrap_or(name).to_string()
}

/// Windows of `T` seconds (`floor(ts / T) · T`) of two-sided snapshots.
pub fn depth_jobs(path: &Path, cfg: &RunConfig) -> Result<Vec<Job>, CliError> {
    let asset = asset_of_depth(path);
    let records = ingest::read_depth_csv(path).map_err(|e| CliError::ingest(path, e))?;
    let stream = SnapshotStream::new(records, cfg.ingest_tick_size).map_err(|e| CliError::ingest(path, e))?;
    let width = cfg.window as i64;
    let mut jobs = Vec::new();
    let mut current: Option<i64> = None;
    let mut bids = Vec::new();
    let mut asks = Vec::new();
    let mut flush = |start: i64, bids: &mut Vec<SideProfile<f64>>, asks: &mut Vec<SideProfile<f64>>| -> Result<(), CliError> {
        for qs in [std::mem::take(bids), std::mem::take(asks)] {
            if qs.is_empty() {
                continue;
            }
            let err = |e: book::BookError| CliError::Data(format!("{}: window {start}: {e}", path.display()));
            let q = book::average_profiles(&qs).map_err(err)?;
            let cums: Vec<_> = qs.iter().map(book::cumulate).collect();
            let s = book::window_average(&cums).map_err(err)?;
            jobs.push(Job { asset: asset.clone(), side: q.side, window: start, q, s });
        }
        Ok(())
    };
    for snap in stream {
        let snap = snap.map_err(|e| CliError::ingest(path, e))?;
        if snap.bids().is_empty() || snap.asks().is_empty() {
            continue;
        }
        let start = snap.timestamp().div_euclid(width) * width;
        if current.is_some_and(|c| c != start) {
            flush(current.unwrap(), &mut bids, &mut asks)?;
        }
        current = Some(start);
        let bin = |side| book::bin_side(&snap, side, cfg.sim.k).map_err(|e| CliError::ingest(path, e.into()));
        bids.push(bin(Side::Bid)?);
        asks.push(bin(Side::Ask)?);
    }
    if let Some(c) = current {
        flush(c, &mut bids, &mut asks)?;
    }
    Ok(jobs)
}

pub fn collect_jobs(cfg: &RunConfig) -> Result<Vec<Job>, CliError> {
    if cfg.inputs.is_empty() {
        return Err(CliError::Validation("io.input: no input paths given".into()));
    }
    let mut jobs = Vec::new();
    for src in discover(&cfg.inputs)? {
        match src {
            Source::Window(p) => jobs.push(load_window(&p)?),
            Source::Depth(p) => jobs.extend(depth_jobs(&p, cfg)?),
        }
    }
    jobs.sort_by(|a, b| (&a.asset, a.side, a.window).cmp(&(&b.asset, b.side, b.window)));
    if let Some(w) = jobs.windows(2).find(|w| (&w[0].asset, w[0].side, w[0].window) == (&w[1].asset, w[1].side, w[1].window)) {
        return Err(CliError::Data(format!("duplicate window {}", w[0].stem())));
    }
    Ok(jobs)
}

/// Fit of one model; failed fits keep their best attempt when there is one.
#[derive(Debug, Clone)]
pub struct ModelFit {
    pub model: ModelKind,
    pub result: Option<FitResult<f64>>,
    pub error: Option<String>,
}

pub fn fit_job(job: &Job, models: &[ModelKind], opts: &FitOptions<f64>) -> Vec<ModelFit> {
    let xs: Vec<f64> = (1..=job.q.k()).map(|x| x as f64).collect();
    models
        .iter()
        .map(|&model| {
            let ys = if model.is_cumulative() { &job.s.s } else { &job.q.q };
            match fit::fit(model, &xs, ys, opts) {
                Ok(r) => ModelFit { model, result: Some(r), error: None },
                Err(FitError::AllStartsFailed { best, .. }) => ModelFit {
                    model,
                    result: best.map(|b| *b),
                    error: Some("all starts failed".into()),
                },
                Err(e) => ModelFit { model, result: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

/// `AIC_Γ − AIC_model` for models fitted to the same (cumulative) data.
fn delta_aic(fits: &[ModelFit], f: &ModelFit) -> Option<f64> {
    if !f.model.is_cumulative() {
        return None;
    }
    let reference = fits.iter().find(|g| g.model == ModelKind::IntegratedGamma)?.result.as_ref()?;
    let r = f.result.as_ref()?;
    (reference.converged && r.converged).then_some(reference.aic - r.aic)
}

struct JobOutput {
    report: String,
    params: String,
    residuals: String,
    plot: String,
    diagnostics: String,
    converged: usize,
    warnings: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.10e}")).unwrap_or_default()
}

fn render_job(job: &Job, fits: &[ModelFit]) -> JobOutput {
    let side = job.side.as_str();
    let (asset, window) = (&job.asset, job.window);
    let mut o = JobOutput {
        report: String::new(),
        params: String::new(),
        residuals: String::new(),
        plot: String::new(),
        diagnostics: String::new(),
        converged: 0,
        warnings: Vec::new(),
    };
    let logslope = fit::logslope_diagnostic(&job.q).ok();
    for f in fits {
        if let Some(e) = &f.error {
            o.warnings.push(format!("{} {}: {e}", job.stem(), f.model));
        }
        match &f.result {
            Some(r) => {
                o.converged += r.converged as usize;
                o.report.push_str(&fit::report_row(asset, side, window, r, delta_aic(fits, f)));
                let _ = writeln!(
                    o.params,
                    "{asset},{side},{window},{},{:.10e},{:.10e},{:.10e},{},{:.3e},{}",
                    f.model, r.params[0], r.params[1], r.params[2], r.n_iterations, r.gradient, r.converged
                );
            }
            None => {
                o.report.push_str(&format!("{asset},{side},{window},{},,,,,,,,,false", f.model));
                let _ = writeln!(o.params, "{asset},{side},{window},{},,,,,,false", f.model);
            }
        }
        o.report.push('\n');

        let ys = if f.model.is_cumulative() { &job.s.s } else { &job.q.q };
        let (n_log, med, lags, within) = match &f.result {
            Some(r) => {
                let lr = fit::log_residuals(r, ys);
                let n = lr.values.len();
                let med = median(&lr.values);
                let lags = MAX_ACF_LAG.min(n.saturating_sub(2));
                let acf = fit::residual_autocorr(&lr.values, lags).ok();
                let within = acf.map(|a| {
                    let bound = 3.0 / (n as f64).sqrt();
                    a.iter().filter(|v| v.abs() <= bound).count() as f64 / lags as f64
                });
                (n.to_string(), med, lags.to_string(), within)
            }
            None => (String::new(), None, String::new(), None),
        };
        let _ = writeln!(
            o.diagnostics,
            "{asset},{side},{window},{},{n_log},{},{lags},{},{},{}",
            f.model,
            fmt_opt(med),
            fmt_opt(within),
            fmt_opt(logslope.as_ref().map(|l| l.gamma)),
            fmt_opt(logslope.as_ref().map(|l| l.lambda)),
        );
    }

    let names: Vec<&str> = fits.iter().map(|f| f.model.as_str()).collect();
    o.residuals = format!("x,{}\n", names.join(","));
    o.plot = format!("x,S_emp,{}\n", names.join(","));
    // fitted cumulative curves; the differential model is summed up
    let curves: Vec<Option<Vec<f64>>> = fits
        .iter()
        .map(|f| {
            f.result.as_ref().map(|r| {
                if f.model.is_cumulative() {
                    r.fitted.clone()
                } else {
                    r.fitted.iter().scan(0.0, |acc, v| { *acc += v; Some(*acc) }).collect()
                }
            })
        })
        .collect();
    for i in 0..job.q.k() {
        let res: Vec<String> = fits.iter().map(|f| fmt_opt(f.result.as_ref().map(|r| r.residuals[i]))).collect();
        let _ = writeln!(o.residuals, "{},{}", i + 1, res.join(","));
        let fitted: Vec<String> = curves.iter().map(|c| fmt_opt(c.as_ref().map(|c| c[i]))).collect();
        let _ = writeln!(o.plot, "{},{:.10e},{}", i + 1, job.s.s[i], fitted.join(","));
    }
    o
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let jobs = collect_jobs(cfg)?;
    if jobs.is_empty() {
        return Err(CliError::Data("no two-sided windows found in the inputs".into()));
    }
    let opts = fit_options(cfg);
    let outputs: Vec<JobOutput> =
        jobs.par_iter().map(|job| render_job(job, &fit_job(job, &cfg.models, &opts))).collect();

    let out = OutputDir::create(cfg)?;
    let mut report = format!("{REPORT_HEADER}\n");
    let mut params = format!("{PARAMS_HEADER}\n");
    let mut diagnostics = format!("{DIAGNOSTICS_HEADER}\n");
    let mut converged = 0;
    let mut per_side: BTreeMap<&str, usize> = BTreeMap::new();
    for (job, o) in jobs.iter().zip(&outputs) {
        report.push_str(&o.report);
        params.push_str(&o.params);
        diagnostics.push_str(&o.diagnostics);
        out.write(format!("residuals/{}.csv", job.stem()), &o.residuals)?;
        out.write(format!("plot/{}.csv", job.stem()), &o.plot)?;
        converged += o.converged;
        for w in &o.warnings {
            eprintln!("warning: {w}");
        }
        *per_side.entry(job.side.as_str()).or_default() += 1;
    }
    out.write("fit_report.csv", report)?;
    out.write("params.csv", params)?;
    out.write("diagnostics.csv", diagnostics)?;
    let total = jobs.len() * cfg.models.len();
    println!(
        "fit: {} windows ({}), {converged}/{total} fits converged -> {}",
        jobs.len(),
        per_side.iter().map(|(s, n)| format!("{s}: {n}")).collect::<Vec<_>>().join(", "),
        out.root().display()
    );
    if converged == 0 {
        return Err(CliError::Numerical(format!("none of the {total} fits converged")));
    }
    Ok(())
}
