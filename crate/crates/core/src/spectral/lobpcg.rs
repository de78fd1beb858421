//! Block preconditioned conjugate-gradient eigensolver (LOBPCG) for the
//! lowest eigenpairs of a graph Laplacian restricted to the complement of the
//! constant vector.
//!
//! Each sweep performs Rayleigh–Ritz on an orthonormalised basis
//! `[X, W, P]` (iterates, preconditioned residuals, previous search
//! directions). The constant vector is projected out of every basis vector,
//! which deflates the zero eigenvalue of a connected graph.

use rand::Rng;

use super::dense::symmetric_eigen;
use super::laplacian::Laplacian;
use crate::graph::rng_from_seed;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct LobpcgOptions<T> {
    /// Number of simultaneously iterated vectors.
    pub block: usize,
    /// Residual target `‖L x − θ x‖₂` for the lowest Ritz pair.
    pub tol: T,
    pub max_iter: usize,
    /// Seed for the random part of the starting block.
    pub seed: u64,
}

impl<T: Real> Default for LobpcgOptions<T> {
    fn default() -> Self {
        Self { block: 4, tol: T::lit(1e-8), max_iter: 20_000, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct LobpcgResult<T> {
    /// Ritz values, ascending.
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
    pub residuals: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

fn remove_mean<T: Real>(v: &mut [T]) {
    let mean = v.iter().copied().sum::<T>() / T::from_count(v.len());
    for x in v.iter_mut() {
        *x = *x - mean;
    }
}

/// Orthonormalises `cols` in place (two-pass modified Gram–Schmidt against the
/// constant vector and the previously accepted columns). Columns that lose
/// more than `drop` of their norm are discarded. The first `keep` columns are
/// assumed already orthonormal and are never dropped.
fn orthonormalize<T: Real>(cols: &mut Vec<Vec<T>>, keep: usize, drop: T) {
    let mut accepted: Vec<Vec<T>> = Vec::with_capacity(cols.len());
    for (idx, mut v) in std::mem::take(cols).into_iter().enumerate() {
        if idx < keep {
            accepted.push(v);
            continue;
        }
        let before = norm(&v);
        if before == T::zero() || !before.is_finite() {
            continue;
        }
        for _ in 0..2 {
            remove_mean(&mut v);
            for q in &accepted {
                let c = dot(q, &v);
                for (x, &qi) in v.iter_mut().zip(q) {
                    *x = *x - c * qi;
                }
            }
        }
        let after = norm(&v);
        if after <= drop * before || after == T::zero() {
            continue;
        }
        let inv = after.recip();
        v.iter_mut().for_each(|x| *x = *x * inv);
        accepted.push(v);
    }
    *cols = accepted;
}

/// Lowest `opts.block` eigenpairs of `lap` on the subspace orthogonal to the
/// constant vector. `warm` supplies starting vectors (e.g. the previous
/// projection of a slowly changing graph); the block is topped up with
/// seeded random vectors.
pub fn lobpcg_lowest<T: Real>(lap: &Laplacian<T>, warm: &[Vec<T>], opts: &LobpcgOptions<T>) -> LobpcgResult<T> {
    let n = lap.dim();
    let block = opts.block.clamp(1, n.saturating_sub(1).max(1));
    let mut rng = rng_from_seed(opts.seed);

    let mut x: Vec<Vec<T>> = warm.iter().filter(|w| w.len() == n).take(block).cloned().collect();
    while x.len() < block {
        x.push((0..n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect());
    }
    let drop = T::lit(1e-10);
    orthonormalize(&mut x, 0, drop);
    while x.len() < block {
        let mut extra = vec![(0..n).map(|_| T::lit(rng.random::<f64>() - 0.5)).collect()];
        let mut all = x.clone();
        all.append(&mut extra);
        orthonormalize(&mut all, x.len(), drop);
        x = all;
    }

    let inv_diag: Vec<T> = lap
        .diagonal()
        .iter()
        .map(|&d| if d > T::zero() { d.recip() } else { T::one() })
        .collect();

    let mut p: Vec<Vec<T>> = Vec::new();
    let mut theta = vec![T::zero(); block];
    let mut resid = vec![T::infinity(); block];
    let mut iterations = 0;
    let mut converged = false;

    // Rayleigh–Ritz on span(X) alone for the starting block.
    let mut basis = x;
    let mut first = true;
    loop {
        orthonormalize(&mut basis, 0, drop);
        let k = basis.len();
        let ab: Vec<Vec<T>> = basis
            .iter()
            .map(|v| {
                let mut out = vec![T::zero(); n];
                lap.apply(v, &mut out);
                out
            })
            .collect();
        let mut h = vec![T::zero(); k * k];
        for i in 0..k {
            for j in 0..=i {
                let v = (dot(&basis[i], &ab[j]) + dot(&basis[j], &ab[i])) * T::lit(0.5);
                h[i * k + j] = v;
                h[j * k + i] = v;
            }
        }
        let eig = symmetric_eigen(&h, k);
        let m = block.min(k);
        let mut new_x = Vec::with_capacity(m);
        let mut new_ax = Vec::with_capacity(m);
        let mut new_p = Vec::with_capacity(m);
        for c in 0..m {
            let coef = eig.vector(c);
            let mut xv = vec![T::zero(); n];
            let mut axv = vec![T::zero(); n];
            let mut pv = vec![T::zero(); n];
            for (j, &cj) in coef.iter().enumerate() {
                for t in 0..n {
                    xv[t] = xv[t] + cj * basis[j][t];
                    axv[t] = axv[t] + cj * ab[j][t];
                }
                if j >= block {
                    for t in 0..n {
                        pv[t] = pv[t] + cj * basis[j][t];
                    }
                }
            }
            theta[c] = eig.values[c];
            new_x.push(xv);
            new_ax.push(axv);
            new_p.push(pv);
        }
        if !first {
            p = new_p;
        }
        first = false;

        // residuals R = AX - XΘ
        let mut r: Vec<Vec<T>> = Vec::with_capacity(m);
        for c in 0..m {
            let rv: Vec<T> = new_ax[c].iter().zip(&new_x[c]).map(|(&a, &xv)| a - theta[c] * xv).collect();
            resid[c] = norm(&rv);
            r.push(rv);
        }
        x = new_x;
        if resid[0] <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let w: Vec<Vec<T>> = r
            .into_iter()
            .zip(&resid)
            .filter(|(_, &rn)| rn > opts.tol * T::lit(1e-3))
            .map(|(rv, _)| rv.iter().zip(&inv_diag).map(|(&a, &b)| a * b).collect())
            .collect();
        basis = x.clone();
        basis.extend(w);
        basis.extend(p.iter().cloned());
    }

    LobpcgResult { values: theta, vectors: x, residuals: resid, iterations, converged }
}
