//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use liqgeom::graph::RelationalGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod golden;

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss weights.
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XK[i];
        let s = f(c - dx) + f(c + dx);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the total
/// estimate falls below `rel_tol · |I|`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let f: &dyn Fn(f64) -> f64 = &f;
    let mut parts = vec![(a, b, gk15(f, a, b))];
    for _ in 0..20_000 {
        let total: f64 = parts.iter().map(|p| p.2 .0).sum();
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= rel_tol * total.abs() || err < 1e-300 {
            break;
        }
        let worst = (0..parts.len())
            .max_by(|&i, &j| parts[i].2 .1.total_cmp(&parts[j].2 .1))
            .unwrap();
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(f, lo, mid)));
        parts.push((mid, hi, gk15(f, mid, hi)));
    }
    // sum small to large
    let mut vals: Vec<f64> = parts.iter().map(|p| p.2 .0).collect();
    vals.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    vals.iter().sum()
}

/// `γ(a, z)` by quadrature. Below `t = 1` the substitution `u = t^a` removes
/// the `t^{a−1}` singularity for `a < 1`.
pub fn lower_gamma_quad(a: f64, z: f64) -> f64 {
    let tol = 1e-15;
    let head_end = z.min(1.0);
    let head = if a < 1.0 {
        integrate(|u: f64| (-u.powf(1.0 / a)).exp(), 0.0, head_end.powf(a), tol) / a
    } else {
        integrate(|t: f64| t.powf(a - 1.0) * (-t).exp(), 0.0, head_end, tol)
    };
    if z <= 1.0 {
        return head;
    }
    // split the tail at the mode so every piece is unimodal
    let mode = (a - 1.0).max(1.0);
    let g = |t: f64| ((a - 1.0) * t.ln() - t).exp();
    let mut tail = 0.0;
    let mut lo = 1.0;
    for hi in [mode, z].into_iter().filter(|&h| h > 1.0 && h <= z) {
        if hi > lo {
            tail += integrate(g, lo, hi, tol);
            lo = hi;
        }
    }
    head + tail
}

/// `Φ(z)` as `½ ± ∫₀^|z| φ`, or from the upper tail integral when that is smaller.
pub fn normal_cdf_quad(z: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if z.abs() <= 1.0 {
        let body = integrate(pdf, 0.0, z.abs(), 1e-15);
        if z >= 0.0 {
            0.5 + body
        } else {
            0.5 - body
        }
    } else {
        let tail = integrate(pdf, z.abs(), z.abs() + 40.0, 1e-15);
        if z > 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }
}

/// Connected multigraph: a random spanning tree plus `extra` random edges.
pub fn random_connected_graph(n: usize, extra: usize, seed: u64) -> RelationalGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n - 1 + extra);
    for v in 1..n {
        edges.push((v, rng.random_range(0..v)));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        edges.push((a, b));
    }
    RelationalGraph::from_edges(n, &edges).expect("valid edges")
}

/// Laplacian eigenpairs via nalgebra, ascending.
pub fn nalgebra_eigen(g: &RelationalGraph) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let n = g.n_vertices();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for &(a, b) in g.edges() {
        let (a, b) = (a as usize, b as usize);
        m[(a, b)] -= 1.0;
        m[(b, a)] -= 1.0;
        m[(a, a)] += 1.0;
        m[(b, b)] += 1.0;
    }
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = nalgebra::DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Two-pass population variance.
pub fn two_pass_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// Central-difference derivative with a Richardson step.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

/// `n` values log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp()).collect()
}
