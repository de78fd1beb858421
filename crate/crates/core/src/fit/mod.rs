//! Least-squares fits of the liquidity models, AIC-based comparison and
//! residual diagnostics.

mod diagnostics;
mod lm;
mod models;

use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use thiserror::Error;

use crate::scalar::Real;

pub use diagnostics::{log_residuals, logslope_diagnostic, residual_autocorr, LogResiduals, LogSlope};
pub use lm::{levenberg_marquardt, scaled_gradient, LmOptions, LmOutcome, LmStatus};
pub use models::{
    check_params, eval_theta, from_theta, model_eval, to_theta, ModelKind, ModelSpec, GAMMA_MARGIN,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("need at least {need} points with nonzero spread, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("xs and ys differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("all {starts} starts of {model} failed")]
    AllStartsFailed {
        model: ModelKind,
        starts: usize,
        /// Best non-converged attempt, if any start could be evaluated.
        best: Option<Box<FitResult<f64>>>,
    },
    #[error("fits were made on different data")]
    MismatchedData,
    #[error("series of length {len} too short for lag {max_lag}")]
    SeriesTooShort { len: usize, max_lag: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("profile has no run of 3 consecutive nonzero bins")]
    TooSparse,
}

#[derive(Debug, Clone)]
pub struct FitOptions<T> {
    pub lm: LmOptions<T>,
    /// Multiplicative spread `s` of the 3×3 start grid `{1/s, 1, s}²`.
    pub grid_scale: T,
}

impl<T: Real> Default for FitOptions<T> {
    fn default() -> Self {
        Self { lm: LmOptions::default(), grid_scale: T::lit(2.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub model: ModelSpec,
    /// Natural parameters, see [`ModelKind`].
    pub params: Vec<T>,
    pub rss: T,
    pub r2: T,
    pub aic: T,
    pub fitted: Vec<T>,
    /// `y − fitted`
    pub residuals: Vec<T>,
    pub converged: bool,
    pub n_iterations: usize,
    /// Scaled gradient at the optimum.
    pub gradient: T,
    /// Fingerprint of `(xs, ys)` for [`compare`].
    pub data_digest: u64,
}

impl<T: Real> FitResult<T> {
    pub fn n(&self) -> usize {
        self.residuals.len()
    }

    fn to_f64(&self) -> FitResult<f64> {
        let cv = |v: &[T]| v.iter().map(|x| x.as_f64()).collect();
        FitResult {
            model: self.model,
            params: cv(&self.params),
            rss: self.rss.as_f64(),
            r2: self.r2.as_f64(),
            aic: self.aic.as_f64(),
            fitted: cv(&self.fitted),
            residuals: cv(&self.residuals),
            converged: self.converged,
            n_iterations: self.n_iterations,
            gradient: self.gradient.as_f64(),
            data_digest: self.data_digest,
        }
    }
}

/// `n ln(rss/n) + 2k`
pub fn aic<T: Real>(rss: T, n: usize, k: usize) -> Result<T, FitError> {
    if n <= k {
        return Err(FitError::Domain("aic needs n > k"));
    }
    if !(rss > T::zero()) || !rss.is_finite() {
        return Err(FitError::Domain("aic needs finite rss > 0"));
    }
    let nn = T::from_count(n);
    Ok(nn * (rss / nn).ln() + T::lit(2.0) * T::from_count(k))
}

fn digest<T: Real>(xs: &[T], ys: &[T]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    xs.len().hash(&mut h);
    for v in xs.iter().chain(ys) {
        v.as_f64().to_bits().hash(&mut h);
    }
    h.finish()
}

fn summarize<T: Real>(spec: ModelSpec, xs: &[T], ys: &[T], out: LmOutcome<T>) -> FitResult<T> {
    let n = ys.len();
    let mean = ys.iter().copied().sum::<T>() / T::from_count(n);
    let tss = ys.iter().fold(T::zero(), |a, &y| a + (y - mean) * (y - mean));
    let residuals: Vec<T> = ys.iter().zip(&out.fitted).map(|(&y, &f)| y - f).collect();
    let rss = residuals.iter().fold(T::zero(), |a, &r| a + r * r);
    let r2 = if tss > T::zero() {
        T::one() - rss / tss
    } else if rss == T::zero() {
        T::zero()
    } else {
        T::neg_infinity()
    };
    let aic = aic(rss, n, spec.n_params()).unwrap_or(T::neg_infinity());
    FitResult {
        model: spec,
        params: from_theta(spec.kind, &out.theta),
        rss,
        r2,
        aic,
        fitted: out.fitted,
        residuals,
        converged: out.status.converged(),
        n_iterations: out.iterations,
        gradient: out.gradient,
        data_digest: digest(xs, ys),
    }
}

/// Fits one model by multi-started Levenberg–Marquardt in the unconstrained
/// parametrisation. Starts come from a method-of-moments shape seed times a
/// 3×3 multiplicative grid; the amplitude of each start is the linear
/// least-squares optimum for its shape. The lowest-RSS converged start wins.
pub fn fit<T: Real>(spec: impl Into<ModelSpec>, xs: &[T], ys: &[T], opts: &FitOptions<T>) -> Result<FitResult<T>, FitError> {
    let spec = spec.into();
    let kind = spec.kind;
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch(xs.len(), ys.len()));
    }
    let need = spec.n_params() + 2;
    if xs.len() < need {
        return Err(FitError::InsufficientData { need, got: xs.len() });
    }
    if xs.iter().any(|&x| !x.is_finite() || x <= T::zero()) || ys.iter().any(|y| !y.is_finite()) {
        return Err(FitError::Domain("xs must be > 0 and all values finite"));
    }

    let seed = models::moment_seed(kind, xs, ys);
    let s = opts.grid_scale;
    let factors = [s.recip(), T::one(), s];
    let mut best: Option<LmOutcome<T>> = None;
    let mut best_failed: Option<LmOutcome<T>> = None;
    let starts = factors.len() * factors.len();
    for &f1 in &factors {
        for &f2 in &factors {
            let mut p = models::perturb(kind, &seed, f1, f2);
            if !models::linear_amplitude(kind, &mut p, xs, ys) {
                continue;
            }
            let th0 = to_theta(kind, &p);
            let out = levenberg_marquardt(
                |th: &[T], f: &mut [T], jac: Option<&mut [T]>| eval_theta(kind, th, xs, f, jac),
                th0,
                ys,
                &opts.lm,
            );
            if out.status == LmStatus::BadStart {
                continue;
            }
            let slot = if out.status.converged() { &mut best } else { &mut best_failed };
            if slot.as_ref().is_none_or(|b| out.rss < b.rss) {
                *slot = Some(out);
            }
        }
    }
    match best {
        Some(out) => Ok(summarize(spec, xs, ys, out)),
        None => Err(FitError::AllStartsFailed {
            model: kind,
            starts,
            best: best_failed.map(|o| Box::new(summarize(spec, xs, ys, o).to_f64())),
        }),
    }
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow<T> {
    pub model: ModelKind,
    pub r2: T,
    pub aic: T,
    /// `AIC_Γ − AIC_model`: negative when the integrated-gamma model is
    /// preferred; zero on its own row; `None` without an integrated-gamma fit.
    pub delta_aic: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T> {
    pub rows: Vec<ComparisonRow<T>>,
    /// Lowest-AIC model.
    pub preferred: ModelKind,
}

impl<T: Real> Comparison<T> {
    pub fn row(&self, model: ModelKind) -> Option<&ComparisonRow<T>> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn delta_aic(&self, model: ModelKind) -> Option<T> {
        self.row(model).and_then(|r| r.delta_aic)
    }
}

/// Compares fits made on the same data.
pub fn compare<T: Real>(fits: &[FitResult<T>]) -> Result<Comparison<T>, FitError> {
    let first = fits.first().ok_or(FitError::MismatchedData)?;
    if fits.iter().any(|f| f.data_digest != first.data_digest) {
        return Err(FitError::MismatchedData);
    }
    let reference = fits.iter().find(|f| f.model.kind == ModelKind::IntegratedGamma).map(|f| f.aic);
    let rows = fits
        .iter()
        .map(|f| ComparisonRow {
            model: f.model.kind,
            r2: f.r2,
            aic: f.aic,
            delta_aic: reference.map(|a| a - f.aic),
        })
        .collect();
    let preferred = fits
        .iter()
        .min_by(|a, b| a.aic.partial_cmp(&b.aic).unwrap_or(std::cmp::Ordering::Equal))
        .map(|f| f.model.kind)
        .expect("nonempty");
    Ok(Comparison { rows, preferred })
}

/// Header of the fit report.
pub const REPORT_HEADER: &str = "asset,side,window,model,C,gamma,lambda_or_mu,sigma_or_alpha,rss,r2,aic,delta_aic,converged";

fn num(v: f64) -> String {
    format!("{v:.10e}")
}

/// One fit-report row. Parameter columns not used by a model are left empty;
/// the power-law offset S₀ is reported in the companion parameter file.
pub fn report_row<T: Real>(asset: &str, side: &str, window: i64, fit: &FitResult<T>, delta_aic: Option<T>) -> String {
    let p: Vec<f64> = fit.params.iter().map(|v| v.as_f64()).collect();
    let (gamma, lam_mu, sig_alpha) = match fit.model.kind {
        ModelKind::IntegratedGamma | ModelKind::GammaDifferential => (num(p[1]), num(p[2]), String::new()),
        ModelKind::CumulativeLognormal => (String::new(), num(p[1]), num(p[2])),
        ModelKind::TruncatedPowerlaw => (String::new(), String::new(), num(p[1])),
    };
    let mut out = String::new();
    let _ = write!(
        out,
        "{asset},{side},{window},{},{},{gamma},{lam_mu},{sig_alpha},{},{},{},{},{}",
        fit.model.kind,
        num(p[0]),
        num(fit.rss.as_f64()),
        num(fit.r2.as_f64()),
        num(fit.aic.as_f64()),
        delta_aic.map(|d| num(d.as_f64())).unwrap_or_default(),
        fit.converged
    );
    out
}
