//! Residual diagnostics and the single-scale log-slope estimate.

use super::{FitError, FitResult};
use crate::book::SideProfile;
use crate::scalar::Real;

/// `ln y − ln ŷ` on the bins where both are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct LogResiduals<T> {
    /// Indices (into the fitted data) that were evaluated.
    pub bins: Vec<usize>,
    pub values: Vec<T>,
    /// Indices dropped because the data or the fit was not positive.
    pub masked: Vec<usize>,
}

pub fn log_residuals<T: Real>(fit: &FitResult<T>, ys: &[T]) -> LogResiduals<T> {
    let mut out = LogResiduals { bins: Vec::new(), values: Vec::new(), masked: Vec::new() };
    for (i, (&y, &f)) in ys.iter().zip(&fit.fitted).enumerate() {
        if y > T::zero() && f > T::zero() && y.is_finite() && f.is_finite() {
            out.bins.push(i);
            out.values.push(y.ln() - f.ln());
        } else {
            out.masked.push(i);
        }
    }
    out
}

/// Sample autocorrelation at lags `1..=max_lag`: the lag-ℓ mean cross
/// product over the `n − ℓ` available pairs divided by the lag-0 mean square,
/// both after removing the sample mean.
pub fn residual_autocorr<T: Real>(eps: &[T], max_lag: usize) -> Result<Vec<T>, FitError> {
    let n = eps.len();
    if n < max_lag + 2 {
        return Err(FitError::SeriesTooShort { len: n, max_lag });
    }
    let mean = eps.iter().copied().sum::<T>() / T::from_count(n);
    let c: Vec<T> = eps.iter().map(|&e| e - mean).collect();
    let c0 = c.iter().fold(T::zero(), |a, &v| a + v * v) / T::from_count(n);
    if c0 <= T::zero() {
        return Err(FitError::ZeroVariance);
    }
    Ok((1..=max_lag)
        .map(|lag| {
            let s = c.iter().zip(&c[lag..]).fold(T::zero(), |a, (&u, &v)| a + u * v);
            s / T::from_count(n - lag) / c0
        })
        .collect())
}

/// Local log-slope estimates and the implied single-scale parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSlope<T> {
    /// `(x, g(x))`: central differences of `ln q` at interior bins of nonzero runs.
    pub points: Vec<(usize, T)>,
    /// Maximal runs of nonzero bins as `(first x, length)`.
    pub runs: Vec<(usize, usize)>,
    /// Bins with `q(x) <= 0`.
    pub gaps: Vec<usize>,
    pub gamma: T,
    pub lambda: T,
}

/// Estimates `g(x) = d ln q / dx` and regresses it on `(1/x, −1)`.
///
/// The `1/x` regressor is taken in its discrete form `½ ln((x+1)/(x−1))`, the
/// central difference of `ln x`, so that a profile of exactly single-scale
/// form `C x^γ e^{−λx}` gives `(γ, λ)` without discretisation bias.
pub fn logslope_diagnostic<T: Real>(q: &SideProfile<T>) -> Result<LogSlope<T>, FitError> {
    let k = q.q.len();
    let mut runs = Vec::new();
    let mut gaps = Vec::new();
    let mut start: Option<usize> = None;
    for x in 1..=k {
        if q.q[x - 1] > T::zero() {
            start.get_or_insert(x);
        } else {
            gaps.push(x);
            if let Some(s) = start.take() {
                runs.push((s, x - s));
            }
        }
    }
    if let Some(s) = start {
        runs.push((s, k + 1 - s));
    }

    let half = T::lit(0.5);
    let mut points = Vec::new();
    let mut design = Vec::new();
    for &(s, len) in &runs {
        if len < 3 {
            continue;
        }
        for x in (s + 1)..(s + len - 1) {
            let g = (q.q[x].ln() - q.q[x - 2].ln()) * half;
            let xf = T::from_count(x);
            let inv = ((xf + T::one()) / (xf - T::one())).ln() * half;
            points.push((x, g));
            design.push((inv, g));
        }
    }
    if design.len() < 2 {
        return Err(FitError::TooSparse);
    }
    // g = γ u − λ
    let m = T::from_count(design.len());
    let mu = design.iter().map(|d| d.0).sum::<T>() / m;
    let mg = design.iter().map(|d| d.1).sum::<T>() / m;
    let suu = design.iter().fold(T::zero(), |a, d| a + (d.0 - mu) * (d.0 - mu));
    let sug = design.iter().fold(T::zero(), |a, d| a + (d.0 - mu) * (d.1 - mg));
    if suu <= T::zero() {
        return Err(FitError::TooSparse);
    }
    let gamma = sug / suu;
    let lambda = gamma * mu - mg;
    Ok(LogSlope { points, runs, gaps, gamma, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::Side;

    #[test]
    fn alternating_series_has_unit_negative_lag_one() {
        let eps: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let acf = residual_autocorr(&eps, 3).unwrap();
        assert!((acf[0] + 1.0).abs() < 1e-14);
        assert!((acf[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn acf_errors() {
        assert_eq!(residual_autocorr(&[1.0, 1.0, 1.0, 1.0], 2), Err(FitError::ZeroVariance));
        assert!(matches!(residual_autocorr(&[1.0, 2.0], 1), Err(FitError::SeriesTooShort { .. })));
    }

    #[test]
    fn logslope_recovers_single_scale() {
        let q: Vec<f64> = (1..=50).map(|x| 3.0 * (x as f64).powi(2) * (-0.5 * x as f64).exp()).collect();
        let ls = logslope_diagnostic(&SideProfile { side: Side::Bid, q }).unwrap();
        assert!((ls.gamma - 2.0).abs() < 1e-9);
        assert!((ls.lambda - 0.5).abs() < 1e-9);
    }

    #[test]
    fn logslope_exponential_has_zero_shape() {
        let q: Vec<f64> = (1..=30).map(|x| 7.0 * (-0.2 * x as f64).exp()).collect();
        let ls = logslope_diagnostic(&SideProfile { side: Side::Ask, q }).unwrap();
        assert!(ls.gamma.abs() < 1e-9);
        assert!((ls.lambda - 0.2).abs() < 1e-9);
    }

    #[test]
    fn logslope_masks_gaps() {
        let mut q: Vec<f64> = (1..=20).map(|x| (x as f64) * (-0.3 * x as f64).exp()).collect();
        q[5] = 0.0;
        q[6] = 0.0;
        let ls = logslope_diagnostic(&SideProfile { side: Side::Ask, q }).unwrap();
        assert_eq!(ls.gaps, vec![6, 7]);
        assert_eq!(ls.runs, vec![(1, 5), (8, 13)]);
        assert!(ls.points.iter().all(|&(x, _)| x != 5 && x != 6 && x != 7 && x != 8 && x != 1 && x != 20));
        assert!((ls.gamma - 1.0).abs() < 1e-9);
        let sparse = SideProfile { side: Side::Ask, q: vec![1.0, 0.0, 1.0, 1.0, 0.0] };
        assert_eq!(logslope_diagnostic(&sparse), Err(FitError::TooSparse));
    }
}
