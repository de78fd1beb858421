//! The liquidity models, their unconstrained parametrisations and analytic
//! Jacobians.
//!
//! Natural parameters are always `[C, shape, scale]`:
//!
//! | model | natural | unconstrained θ |
//! |---|---|---|
//! | integrated gamma | `[C, γ, λ]` | `[ln C, ln(γ + 1 − ε), ln λ]` |
//! | gamma differential | `[C, γ, λ]` | as above |
//! | cumulative log-normal | `[C, μ, σ]` | `[ln C, μ, ln σ]` |
//! | truncated power law | `[C, α, S₀]` | `[ln C, α, ln S₀]` |
//!
//! with `ε = 1e-6` keeping γ strictly inside the integrable range γ > −1.

use std::str::FromStr;

use super::FitError;
use crate::scalar::Real;
use crate::specfun::{d_ln_lower_gamma_da, ln_lower_incomplete_gamma, std_normal_cdf, std_normal_pdf};

/// Lower margin on γ + 1.
pub const GAMMA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// `S(x) = C λ^{−(γ+1)} γ(γ+1, λx)`
    IntegratedGamma,
    /// `Q(x) = C x^γ e^{−λx}`
    GammaDifferential,
    /// `S(x) = C Φ((ln x − μ)/σ)`
    CumulativeLognormal,
    /// `S(x) = S₀ + C Σ_{u=1}^{⌊x⌋} u^{−α}`
    TruncatedPowerlaw,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::IntegratedGamma,
        ModelKind::GammaDifferential,
        ModelKind::CumulativeLognormal,
        ModelKind::TruncatedPowerlaw,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::IntegratedGamma => "integrated_gamma",
            ModelKind::GammaDifferential => "gamma_differential",
            ModelKind::CumulativeLognormal => "cumulative_lognormal",
            ModelKind::TruncatedPowerlaw => "truncated_powerlaw",
        }
    }

    /// Whether the model describes the cumulative profile `S` (otherwise `q`).
    pub fn is_cumulative(self) -> bool {
        !matches!(self, ModelKind::GammaDifferential)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown model {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub kind: ModelKind,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self { kind }
    }

    pub fn n_params(&self) -> usize {
        3
    }
}

impl From<ModelKind> for ModelSpec {
    fn from(kind: ModelKind) -> Self {
        Self { kind }
    }
}

fn domain(msg: &'static str) -> FitError {
    FitError::Domain(msg)
}

fn check_x<T: Real>(x: T) -> Result<(), FitError> {
    if !x.is_finite() || x <= T::zero() {
        return Err(domain("x must be finite and > 0"));
    }
    Ok(())
}

/// Validates natural parameters for `kind`.
pub fn check_params<T: Real>(kind: ModelKind, p: &[T]) -> Result<(), FitError> {
    if p.len() != 3 || p.iter().any(|v| !v.is_finite()) {
        return Err(domain("expected three finite parameters"));
    }
    if p[0] <= T::zero() {
        return Err(domain("amplitude C must be > 0"));
    }
    match kind {
        ModelKind::IntegratedGamma | ModelKind::GammaDifferential => {
            if p[1] <= -T::one() {
                return Err(domain("gamma must be > -1"));
            }
            if p[2] <= T::zero() {
                return Err(domain("lambda must be > 0"));
            }
        }
        ModelKind::CumulativeLognormal => {
            if p[2] <= T::zero() {
                return Err(domain("sigma must be > 0"));
            }
        }
        ModelKind::TruncatedPowerlaw => {
            if p[2] < T::zero() {
                return Err(domain("offset S0 must be >= 0"));
            }
        }
    }
    Ok(())
}

/// Model value at `x` for natural parameters `p`.
pub fn model_eval<T: Real>(spec: ModelSpec, p: &[T], x: T) -> Result<T, FitError> {
    check_params(spec.kind, p)?;
    check_x(x)?;
    let (c, s1, s2) = (p[0], p[1], p[2]);
    Ok(match spec.kind {
        ModelKind::IntegratedGamma => {
            let a = s1 + T::one();
            let lg = ln_lower_incomplete_gamma(a, s2 * x).map_err(|_| domain("incomplete gamma"))?;
            (c.ln() - a * s2.ln() + lg).exp()
        }
        ModelKind::GammaDifferential => (c.ln() + s1 * x.ln() - s2 * x).exp(),
        ModelKind::CumulativeLognormal => {
            c * std_normal_cdf((x.ln() - s1) / s2).map_err(|_| domain("normal cdf"))?
        }
        ModelKind::TruncatedPowerlaw => s2 + c * harmonic(x, s1).0,
    })
}

/// `(Σ_{u=1}^{⌊x⌋} u^{−α}, Σ u^{−α} ln u)`
fn harmonic<T: Real>(x: T, alpha: T) -> (T, T) {
    let top = x.floor().to_usize().unwrap_or(0);
    let mut h = T::zero();
    let mut dh = T::zero();
    for u in 1..=top {
        let lu = T::from_count(u).ln();
        let t = (-alpha * lu).exp();
        h = h + t;
        dh = dh + t * lu;
    }
    (h, dh)
}

/// Natural → unconstrained.
pub fn to_theta<T: Real>(kind: ModelKind, p: &[T]) -> Vec<T> {
    let margin = T::lit(GAMMA_MARGIN);
    match kind {
        ModelKind::IntegratedGamma | ModelKind::GammaDifferential => {
            vec![p[0].ln(), (p[1] + T::one() - margin).ln(), p[2].ln()]
        }
        ModelKind::CumulativeLognormal => vec![p[0].ln(), p[1], p[2].ln()],
        ModelKind::TruncatedPowerlaw => vec![p[0].ln(), p[1], p[2].ln()],
    }
}

/// Unconstrained → natural.
pub fn from_theta<T: Real>(kind: ModelKind, th: &[T]) -> Vec<T> {
    let margin = T::lit(GAMMA_MARGIN);
    match kind {
        ModelKind::IntegratedGamma | ModelKind::GammaDifferential => {
            vec![th[0].exp(), th[1].exp() - T::one() + margin, th[2].exp()]
        }
        ModelKind::CumulativeLognormal | ModelKind::TruncatedPowerlaw => vec![th[0].exp(), th[1], th[2].exp()],
    }
}

/// Model values on `xs` and, if requested, the Jacobian with respect to θ
/// (row-major, `xs.len() × 3`). Returns `false` if any value is non-finite.
pub fn eval_theta<T: Real>(kind: ModelKind, th: &[T], xs: &[T], f: &mut [T], mut jac: Option<&mut [T]>) -> bool {
    let p = from_theta(kind, th);
    let (c, s1, s2) = (p[0], p[1], p[2]);
    let ln_c = th[0];
    for (i, &x) in xs.iter().enumerate() {
        let (v, d) = match kind {
            ModelKind::IntegratedGamma => {
                let a = s1 + T::one();
                let z = s2 * x;
                let Ok(lg) = ln_lower_incomplete_gamma(a, z) else { return false };
                let ln_s = ln_c - a * s2.ln() + lg;
                let s = ln_s.exp();
                let d = if jac.is_some() {
                    let Ok(dlg) = d_ln_lower_gamma_da(a, z) else { return false };
                    let da = th[1].exp();
                    // C x^a e^{-λx} = x Q(x)
                    let xq = (ln_c + a * x.ln() - z).exp();
                    [s, s * (dlg - s2.ln()) * da, xq - a * s]
                } else {
                    [T::zero(); 3]
                };
                (s, d)
            }
            ModelKind::GammaDifferential => {
                let lx = x.ln();
                let q = (ln_c + s1 * lx - s2 * x).exp();
                (q, [q, q * lx * th[1].exp(), -q * s2 * x])
            }
            ModelKind::CumulativeLognormal => {
                let z = (x.ln() - s1) / s2;
                let Ok(cdf) = std_normal_cdf(z) else { return false };
                let pdf = std_normal_pdf(z);
                let s = c * cdf;
                (s, [s, -c * pdf / s2, -c * pdf * z])
            }
            ModelKind::TruncatedPowerlaw => {
                let (h, dh) = harmonic(x, s1);
                (s2 + c * h, [c * h, -c * dh, s2])
            }
        };
        if !v.is_finite() {
            return false;
        }
        f[i] = v;
        if let Some(j) = jac.as_deref_mut() {
            if d.iter().any(|x| !x.is_finite()) {
                return false;
            }
            j[3 * i..3 * i + 3].copy_from_slice(&d);
        }
    }
    true
}

/// Method-of-moments starting shape from the target's increment
/// distribution. Returns natural parameters with a placeholder amplitude.
pub fn moment_seed<T: Real>(kind: ModelKind, xs: &[T], ys: &[T]) -> Vec<T> {
    let mut w: Vec<T> = if kind.is_cumulative() {
        let mut prev = T::zero();
        ys.iter()
            .map(|&y| {
                let d = y - prev;
                prev = y;
                d
            })
            .collect()
    } else {
        ys.to_vec()
    };
    w.iter_mut().for_each(|v| *v = v.max(T::zero()));
    let total: T = w.iter().copied().sum();
    if total <= T::zero() {
        w.iter_mut().for_each(|v| *v = T::one());
    }
    let total: T = w.iter().copied().sum();
    let moments = |g: &dyn Fn(T) -> T| {
        let m = xs.iter().zip(&w).fold(T::zero(), |a, (&x, &wi)| a + wi * g(x)) / total;
        let v = xs.iter().zip(&w).fold(T::zero(), |a, (&x, &wi)| a + wi * (g(x) - m) * (g(x) - m)) / total;
        (m, v)
    };
    match kind {
        ModelKind::IntegratedGamma | ModelKind::GammaDifferential => {
            let (m, v) = moments(&|x| x);
            let v = v.max(T::lit(1e-3));
            let shape = (m * m / v).max(T::lit(0.05)).min(T::lit(1e3));
            let rate = (shape / m.max(T::lit(1e-3))).max(T::lit(1e-6));
            vec![T::one(), shape - T::one(), rate]
        }
        ModelKind::CumulativeLognormal => {
            let (m, v) = moments(&|x: T| x.ln());
            vec![T::one(), m, v.sqrt().max(T::lit(0.1))]
        }
        ModelKind::TruncatedPowerlaw => {
            // log-log slope of the positive increments
            let pts: Vec<(T, T)> = xs
                .iter()
                .zip(&w)
                .filter(|(_, &wi)| wi > T::zero())
                .map(|(&x, &wi)| (x.ln(), wi.ln()))
                .collect();
            let alpha = if pts.len() >= 2 {
                let k = T::from_count(pts.len());
                let mx = pts.iter().map(|p| p.0).sum::<T>() / k;
                let my = pts.iter().map(|p| p.1).sum::<T>() / k;
                let sxy = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
                let sxx = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
                if sxx > T::zero() {
                    -(sxy / sxx)
                } else {
                    T::one()
                }
            } else {
                T::one()
            };
            let scale = ys.iter().fold(T::zero(), |a, y| a.max(y.abs())).max(T::lit(1e-12));
            vec![T::one(), alpha.max(T::lit(-5.0)).min(T::lit(5.0)), scale * T::lit(1e-2)]
        }
    }
}

/// Perturbs the shape parameters of a seed by factors `(f1, f2)`.
pub fn perturb<T: Real>(kind: ModelKind, seed: &[T], f1: T, f2: T) -> Vec<T> {
    let mut p = seed.to_vec();
    match kind {
        ModelKind::IntegratedGamma | ModelKind::GammaDifferential => {
            let a = (p[1] + T::one()) * f1;
            p[1] = a.max(T::lit(2.0 * GAMMA_MARGIN)) - T::one();
            p[2] = p[2] * f2;
        }
        ModelKind::CumulativeLognormal => {
            p[1] = p[1] + f1.ln();
            p[2] = p[2] * f2;
        }
        ModelKind::TruncatedPowerlaw => {
            p[1] = p[1] + f1.ln();
            p[2] = p[2] * f2;
        }
    }
    p
}

/// Least-squares amplitude (and offset, for the power law) given the shape.
pub fn linear_amplitude<T: Real>(kind: ModelKind, p: &mut [T], xs: &[T], ys: &[T]) -> bool {
    let mut unit = p.to_vec();
    unit[0] = T::one();
    if kind == ModelKind::TruncatedPowerlaw {
        unit[2] = T::zero();
    }
    let th = to_theta(kind, &unit);
    let mut g = vec![T::zero(); xs.len()];
    let th = if kind == ModelKind::TruncatedPowerlaw {
        // offset enters linearly; evaluate the bare partial sums
        let mut t = th;
        t[2] = T::neg_infinity();
        t
    } else {
        th
    };
    if !eval_theta(kind, &th, xs, &mut g, None) {
        return false;
    }
    let sgg = g.iter().fold(T::zero(), |a, &v| a + v * v);
    let sgy = g.iter().zip(ys).fold(T::zero(), |a, (&v, &y)| a + v * y);
    if sgg <= T::zero() || !sgg.is_finite() {
        return false;
    }
    let floor = ys.iter().fold(T::zero(), |a, y| a.max(y.abs())) * T::lit(1e-8);
    match kind {
        ModelKind::TruncatedPowerlaw => {
            let n = T::from_count(xs.len());
            let sg = g.iter().copied().sum::<T>();
            let sy = ys.iter().copied().sum::<T>();
            let det = n * sgg - sg * sg;
            let (mut s0, mut c) = if det.abs() > T::epsilon() * n * sgg {
                ((sgg * sy - sg * sgy) / det, (n * sgy - sg * sy) / det)
            } else {
                (T::zero(), sgy / sgg)
            };
            if s0 <= floor {
                s0 = floor.max(T::lit(1e-300).max(T::min_positive_value()));
                c = (sgy - s0 * sg) / sgg;
            }
            if c <= T::zero() || !c.is_finite() {
                return false;
            }
            p[0] = c;
            p[2] = s0;
        }
        _ => {
            let c = sgy / sgg;
            if c <= T::zero() || !c.is_finite() {
                return false;
            }
            p[0] = c;
        }
    }
    true
}
