//! Laplacian spectral projection of the relational graph onto one dimension,
//! and the observables built on it: returns, risk and the balance check.

mod dense;
mod laplacian;
mod lobpcg;

use std::fmt::Write as _;

use thiserror::Error;

pub use dense::{symmetric_eigen, SymmetricEigen};
pub use laplacian::Laplacian;
pub use lobpcg::{lobpcg_lowest, LobpcgOptions, LobpcgResult};

use crate::graph::RelationalGraph;
use crate::scalar::Real;

/// Largest vertex count routed to the dense solver under [`Solver::Auto`].
pub const DENSE_LIMIT: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("eigensolver residual {residual:e} above tolerance {tol:e} after {iterations} iterations")]
    NonConvergence { residual: f64, tol: f64, iterations: usize },
    #[error("graph is disconnected (lambda_1 = {0:e})")]
    Disconnected(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("risk needs a window of at least 2 return series, got {0}")]
    WindowTooShort(usize),
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Dense for `n <= DENSE_LIMIT`, iterative above.
    #[default]
    Auto,
    Dense,
    Iterative,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Auto => "auto",
            Solver::Dense => "dense",
            Solver::Iterative => "lobpcg",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionOptions<T> {
    pub solver: Solver,
    /// Residual tolerance; `None` picks 1e-10 (dense) or 1e-8 (iterative).
    pub tol: Option<T>,
    pub max_iter: usize,
    /// Relative width under which eigenvalues count as degenerate.
    pub degeneracy: T,
}

impl<T: Real> Default for ProjectionOptions<T> {
    fn default() -> Self {
        Self { solver: Solver::Auto, tol: None, max_iter: 20_000, degeneracy: T::lit(1e-9) }
    }
}

/// One-dimensional projection: the unit-norm, mean-zero Fiedler vector with
/// its component of largest magnitude made positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub coords: Vec<T>,
    /// Smallest nonzero Laplacian eigenvalue.
    pub eigenvalue: T,
    /// Vertex whose coordinate fixed the sign.
    pub sign_anchor: usize,
    /// `‖L·coords − eigenvalue·coords‖₂`.
    pub residual: T,
    pub solver: Solver,
    pub iterations: usize,
}

impl<T: Real> Projection<T> {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// `vertex,coord` CSV with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex,coord\n");
        for (i, c) in self.coords.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.16e}", c.as_f64());
        }
        out
    }

    /// Key-value metadata sidecar.
    pub fn metadata(&self) -> String {
        format!(
            "n_vertices={}\neigenvalue={:.16e}\nresidual={:.6e}\nsolver={}\niterations={}\nsign_anchor={}\n",
            self.coords.len(),
            self.eigenvalue.as_f64(),
            self.residual.as_f64(),
            self.solver.as_str(),
            self.iterations,
            self.sign_anchor
        )
    }
}

/// Per-vertex increments between two successive projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries<T> {
    pub values: Vec<T>,
}

/// Index of the largest-magnitude component, lowest index among ties.
fn sign_anchor<T: Real>(v: &[T]) -> usize {
    let max = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let tie = max * (T::one() - T::lit(1e-9));
    v.iter().position(|x| x.abs() >= tie).unwrap_or(0)
}

/// Normalises to zero mean and unit norm, then flips so the anchor is positive.
fn canonicalize<T: Real>(v: &mut [T]) -> usize {
    let mean = v.iter().copied().sum::<T>() / T::from_count(v.len());
    v.iter_mut().for_each(|x| *x = *x - mean);
    let norm = v.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    if norm > T::zero() {
        v.iter_mut().for_each(|x| *x = *x / norm);
    }
    let anchor = sign_anchor(v);
    if v[anchor] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    anchor
}

fn lexicographic_cmp<T: Real>(a: &[T], b: &[T]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// `‖L v − λ v‖₂`
pub fn eigen_residual<T: Real>(lap: &Laplacian<T>, v: &[T], lambda: T) -> T {
    let mut lv = vec![T::zero(); v.len()];
    lap.apply(v, &mut lv);
    lv.iter()
        .zip(v)
        .fold(T::zero(), |acc, (&a, &b)| {
            let r = a - lambda * b;
            acc + r * r
        })
        .sqrt()
}

/// Picks the canonical vector among eigenvectors sharing the lowest nonzero
/// eigenvalue: each candidate is sign-fixed, the lexicographically smallest wins.
fn pick_canonical<T: Real>(candidates: Vec<Vec<T>>) -> (Vec<T>, usize) {
    let mut best: Option<(Vec<T>, usize)> = None;
    for mut v in candidates {
        let anchor = canonicalize(&mut v);
        let better = match &best {
            None => true,
            Some((b, _)) => lexicographic_cmp(&v, b) == std::cmp::Ordering::Less,
        };
        if better {
            best = Some((v, anchor));
        }
    }
    best.expect("at least one candidate")
}

/// Fiedler projection of a connected graph.
pub fn fiedler_projection<T: Real>(
    g: &RelationalGraph,
    opts: &ProjectionOptions<T>,
) -> Result<Projection<T>, SpectralError> {
    fiedler_projection_warm(g, opts, None)
}

/// Fiedler projection seeded with a previous projection of the same vertex
/// set, which the iterative solver uses as its starting block.
pub fn fiedler_projection_warm<T: Real>(
    g: &RelationalGraph,
    opts: &ProjectionOptions<T>,
    warm: Option<&[Vec<T>]>,
) -> Result<Projection<T>, SpectralError> {
    project(g, opts, warm.unwrap_or(&[])).map(|(p, _)| p)
}

/// Projects successive states of a growing graph, carrying the iterative
/// solver's full Ritz block from one call to the next.
#[derive(Debug, Clone)]
pub struct ProjectionTracker<T> {
    opts: ProjectionOptions<T>,
    block: Vec<Vec<T>>,
}

impl<T: Real> ProjectionTracker<T> {
    pub fn new(opts: ProjectionOptions<T>) -> Self {
        Self { opts, block: Vec::new() }
    }

    pub fn project(&mut self, g: &RelationalGraph) -> Result<Projection<T>, SpectralError> {
        if self.block.first().is_some_and(|v| v.len() != g.n_vertices()) {
            self.block.clear();
        }
        let (p, block) = project(g, &self.opts, &self.block)?;
        self.block = block;
        Ok(p)
    }
}

fn project<T: Real>(
    g: &RelationalGraph,
    opts: &ProjectionOptions<T>,
    warm: &[Vec<T>],
) -> Result<(Projection<T>, Vec<Vec<T>>), SpectralError> {
    let n = g.n_vertices();
    if !g.is_connected() {
        return Err(SpectralError::Disconnected(0.0));
    }
    let lap = Laplacian::<T>::from_graph(g);
    let solver = match opts.solver {
        Solver::Auto if n <= DENSE_LIMIT => Solver::Dense,
        Solver::Auto => Solver::Iterative,
        s => s,
    };
    let scale = lap.gershgorin_bound().max(T::one());
    let floor = T::lit(1e-10) * scale;

    let mut block = Vec::new();
    let (lambda, candidates, iterations, tol) = match solver {
        Solver::Dense => {
            let tol = opts.tol.unwrap_or(T::lit(1e-10));
            let eig = symmetric_eigen(&lap.to_dense(), n);
            let lambda = eig.values[1];
            if lambda <= floor {
                return Err(SpectralError::Disconnected(lambda.as_f64()));
            }
            let width = opts.degeneracy * lambda.max(T::one());
            let candidates: Vec<Vec<T>> = (1..n)
                .take_while(|&k| eig.values[k] - lambda <= width)
                .map(|k| eig.vector(k).to_vec())
                .collect();
            (lambda, candidates, 0, tol)
        }
        _ => {
            let tol = opts.tol.unwrap_or(T::lit(1e-8));
            let lo = LobpcgOptions { tol, max_iter: opts.max_iter, ..LobpcgOptions::default() };
            let res = lobpcg_lowest(&lap, warm, &lo);
            if !res.converged {
                return Err(SpectralError::NonConvergence {
                    residual: res.residuals[0].as_f64(),
                    tol: tol.as_f64(),
                    iterations: res.iterations,
                });
            }
            let lambda = res.values[0];
            if lambda <= floor {
                return Err(SpectralError::Disconnected(lambda.as_f64()));
            }
            let width = opts.degeneracy * lambda.max(T::one());
            block = res.vectors.clone();
            let candidates: Vec<Vec<T>> = res
                .vectors
                .into_iter()
                .zip(res.values.iter().zip(&res.residuals))
                .take_while(|(_, (&v, &r))| v - lambda <= width && r <= tol)
                .map(|(v, _)| v)
                .collect();
            (lambda, candidates, res.iterations, tol)
        }
    };

    let (coords, anchor) = pick_canonical(candidates);
    let residual = eigen_residual(&lap, &coords, lambda);
    if residual > tol {
        return Err(SpectralError::NonConvergence {
            residual: residual.as_f64(),
            tol: tol.as_f64(),
            iterations,
        });
    }
    Ok((Projection { coords, eigenvalue: lambda, sign_anchor: anchor, residual, solver, iterations }, block))
}

/// `+1` unless the two projections point in opposite directions.
fn alignment<T: Real>(prev: &Projection<T>, next: &Projection<T>) -> T {
    let d = prev.coords.iter().zip(&next.coords).fold(T::zero(), |a, (&x, &y)| a + x * y);
    if d < T::zero() {
        -T::one()
    } else {
        T::one()
    }
}

/// `r_i = next_i − prev_i`, after flipping `next` if it anti-aligns with `prev`.
pub fn returns<T: Real>(prev: &Projection<T>, next: &Projection<T>) -> Result<ReturnSeries<T>, SpectralError> {
    if prev.len() != next.len() {
        return Err(SpectralError::DimensionMismatch(prev.len(), next.len()));
    }
    let s = alignment(prev, next);
    let values = prev.coords.iter().zip(&next.coords).map(|(&p, &q)| s * q - p).collect();
    Ok(ReturnSeries { values })
}

/// `|Σ_i Δp_i|` between two projections of the same vertex set.
pub fn check_balance<T: Real>(prev: &Projection<T>, next: &Projection<T>) -> Result<T, SpectralError> {
    Ok(returns(prev, next)?.values.into_iter().sum::<T>().abs())
}

/// Population variance of one vertex's returns over a window.
pub fn risk<T: Real>(window: &[ReturnSeries<T>], vertex: usize) -> Result<T, SpectralError> {
    if window.len() < 2 {
        return Err(SpectralError::WindowTooShort(window.len()));
    }
    // Welford
    let mut mean = T::zero();
    let mut m2 = T::zero();
    for (k, series) in window.iter().enumerate() {
        let x = *series.values.get(vertex).ok_or(SpectralError::VertexOutOfRange {
            vertex,
            n: series.values.len(),
        })?;
        let delta = x - mean;
        mean = mean + delta / T::from_count(k + 1);
        m2 = m2 + delta * (x - mean);
    }
    Ok((m2 / T::from_count(window.len())).max(T::zero()))
}
