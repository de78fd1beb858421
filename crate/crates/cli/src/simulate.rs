//! `simulate`: graph inflation → projections → synthetic books → profiles.

use std::fmt::Write as _;

use liqgeom::book::{self, CumulativeProfile, Side, SideProfile};
use liqgeom::fit::{self, ModelKind, REPORT_HEADER};
use liqgeom::graph::RNG_NAME;
use liqgeom::sim::{simulate, SimSnapshot};
use liqgeom::Projection64;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::fitcmd::fit_options;
use crate::output::{OutputDir, VERSION};

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.sim.validate()?;
    let out = OutputDir::create(cfg)?;

    let mut snapshots =
        String::from("step,mid,flipped,eigenvalue,residual,iterations,balance,max_degree,bid_total,ask_total\n");
    let mut profiles = String::from("step,side,x,q\n");
    let mut window: Vec<(SideProfile<f64>, SideProfile<f64>)> = Vec::with_capacity(cfg.window);
    let mut window_start = 0;
    let mut windows: Vec<(String, String)> = Vec::new();
    let mut window_error: Option<CliError> = None;
    let mut last: Option<Projection64> = None;

    let summary = simulate(&cfg.sim, |s: &SimSnapshot| {
        let _ = writeln!(
            snapshots,
            "{},{:e},{},{:e},{:e},{},{:e},{},{:e},{:e}",
            s.step,
            s.mid,
            s.flipped,
            s.projection.eigenvalue,
            s.projection.residual,
            s.projection.iterations,
            s.balance,
            s.max_degree,
            s.bid.total(),
            s.ask.total()
        );
        for prof in [&s.bid, &s.ask] {
            for (i, q) in prof.q.iter().enumerate() {
                let _ = writeln!(profiles, "{},{},{},{:e}", s.step, prof.side.as_str(), i + 1, q);
            }
        }
        if window.is_empty() {
            window_start = s.step;
        }
        window.push((s.bid.clone(), s.ask.clone()));
        if window.len() == cfg.window {
            for side in [Side::Bid, Side::Ask] {
                let qs: Vec<SideProfile<f64>> =
                    window.iter().map(|(b, a)| if side == Side::Bid { b.clone() } else { a.clone() }).collect();
                match average_window(&qs) {
                    Ok((q, s_bar)) => windows.push((
                        book::profile_file_name(&cfg.asset, side, window_start as i64),
                        book::profile_csv(&q, &s_bar),
                    )),
                    Err(e) => window_error = window_error.take().or(Some(e)),
                }
            }
            window.clear();
        }
        last = Some(s.projection.clone());
    })?;
    if let Some(e) = window_error {
        return Err(e);
    }
    if summary.n_snapshots == 0 {
        return Err(CliError::Validation(format!(
            "simulation.n_steps = {} yields no snapshots with simulation.snapshot_every = {}",
            cfg.sim.n_steps, cfg.sim.snapshot_every
        )));
    }

    out.write("snapshots.csv", snapshots)?;
    out.write("profiles.csv", profiles)?;
    for (name, body) in windows {
        out.write(format!("windows/{name}"), body)?;
    }

    let mut mean_fit = format!("{REPORT_HEADER}\n");
    let xs: Vec<f64> = (1..=cfg.sim.k).map(|x| x as f64).collect();
    for mean in [&summary.mean_bid, &summary.mean_ask] {
        let cum = book::cumulate(mean);
        out.write(format!("mean_{}.csv", mean.side.as_str()), book::profile_csv(mean, &cum))?;
        let result = match fit::fit(ModelKind::GammaDifferential, &xs, &mean.q, &fit_options(cfg)) {
            Ok(r) => r,
            Err(fit::FitError::AllStartsFailed { best: Some(b), .. }) => *b,
            Err(e) => return Err(CliError::Numerical(format!("mean {} profile: {e}", mean.side.as_str()))),
        };
        mean_fit.push_str(&fit::report_row(&cfg.asset, mean.side.as_str(), 0, &result, None));
        mean_fit.push('\n');
    }
    out.write("mean_fit.csv", mean_fit)?;

    if let Some(p) = &last {
        out.write("projection_final.csv", p.to_csv())?;
        out.write("projection_final.meta", p.metadata())?;
    }
    let g = &summary.graph;
    let meta = format!(
        "version={VERSION}\nrng={RNG_NAME}\nn_snapshots={}\nn_windows={}\nmax_balance={:e}\nn_vertices={}\nn_edges={}\nmax_degree={}\ndegree_gini={:e}\n",
        summary.n_snapshots,
        summary.n_snapshots / cfg.window,
        summary.max_balance,
        g.n_vertices(),
        g.n_edges(),
        g.max_degree(),
        g.degree_gini()
    );
    out.write("run.meta", meta)?;
    println!(
        "simulate: {} snapshots, {} windows -> {}",
        summary.n_snapshots,
        summary.n_snapshots / cfg.window,
        out.root().display()
    );
    Ok(())
}

fn average_window(qs: &[SideProfile<f64>]) -> Result<(SideProfile<f64>, CumulativeProfile<f64>), CliError> {
    let to_err = |e: book::BookError| CliError::Numerical(e.to_string());
    let q = book::average_profiles(qs).map_err(to_err)?;
    let cums: Vec<_> = qs.iter().map(book::cumulate).collect();
    let s = book::window_average(&cums).map_err(to_err)?;
    Ok((q, s))
}
