//! Special functions used by the cumulative liquidity models.
//!
//! Lower incomplete gamma is evaluated through the classical split: power
//! series for `z < a + 1`, Lentz continued fraction for the upper tail
//! otherwise. The exponential prefactor `z^a e^{-z} / Γ(a+1)` is formed with a
//! Stirling remainder so that it keeps full relative precision for large `a`.

use thiserror::Error;

use crate::scalar::Real;

/// Iteration budget shared by the series and continued-fraction kernels.
const MAX_ITER: usize = 1000;

/// Shift used by [`ln_gamma`] / [`digamma`] before the asymptotic series applies.
const ASYMPTOTIC_FROM: f64 = 15.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("argument out of domain: {0}")]
    Domain(&'static str),
    #[error("{0} did not converge within {MAX_ITER} iterations")]
    NonConvergence(&'static str),
}

type Result<T> = std::result::Result<T, SpecFunError>;

fn check_shape<T: Real>(a: T) -> Result<()> {
    if !a.is_finite() || a <= T::zero() {
        return Err(SpecFunError::Domain("shape a must be finite and > 0"));
    }
    Ok(())
}

fn check_arg<T: Real>(a: T, z: T) -> Result<()> {
    check_shape(a)?;
    if !z.is_finite() || z < T::zero() {
        return Err(SpecFunError::Domain("z must be finite and >= 0"));
    }
    Ok(())
}

/// Stirling remainder `ln Γ(x+1) - (x+½)ln x + x - ½ln(2π)` for `x >= ASYMPTOTIC_FROM`.
fn stirling_remainder<T: Real>(x: T) -> T {
    // Bernoulli coefficients B_{2k} / (2k (2k-1)).
    const C: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = x.recip();
    let inv2 = inv * inv;
    let mut acc = T::zero();
    for c in C.iter().rev() {
        acc = acc * inv2 + T::lit(*c);
    }
    acc * inv
}

/// `ln Γ(a)` for `a > 0`.
pub fn ln_gamma<T: Real>(a: T) -> Result<T> {
    check_shape(a)?;
    let one = T::one();
    if a == one || a == T::lit(2.0) {
        return Ok(T::zero());
    }
    let from = T::lit(ASYMPTOTIC_FROM);
    let half_ln_2pi = T::lit(0.918_938_533_204_672_8);
    // Γ(a) = Γ(a + n) / (a (a+1) ... (a+n-1))
    let mut x = a;
    let mut prod = one;
    while x < from {
        prod = prod * x;
        x = x + one;
    }
    let ln_gamma_x = (x - T::lit(0.5)) * x.ln() - x + half_ln_2pi + stirling_remainder(x);
    Ok(ln_gamma_x - prod.ln())
}

/// Digamma `ψ(a) = d ln Γ(a) / da` for `a > 0`.
pub fn digamma<T: Real>(a: T) -> Result<T> {
    check_shape(a)?;
    let one = T::one();
    let from = T::lit(ASYMPTOTIC_FROM);
    let mut x = a;
    let mut shift = T::zero();
    while x < from {
        shift = shift + x.recip();
        x = x + one;
    }
    // B_{2k} / (2k)
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32_760.0,
        1.0 / 12.0,
    ];
    let inv2 = (x * x).recip();
    let mut acc = T::zero();
    for c in C.iter().rev() {
        acc = acc * inv2 + T::lit(*c);
    }
    Ok(x.ln() - T::lit(0.5) / x - acc * inv2 - shift)
}

/// `ln(z^a e^{-z} / Γ(a+1))`, accurate for large `a` where the three terms
/// nearly cancel.
fn ln_series_prefactor<T: Real>(a: T, z: T) -> Result<T> {
    let from = T::lit(ASYMPTOTIC_FROM);
    if a >= from {
        let u = (z - a) / a;
        let two_pi = T::lit(std::f64::consts::TAU);
        Ok(a * (u.ln_1p() - u) - T::lit(0.5) * (two_pi * a).ln() - stirling_remainder(a))
    } else {
        Ok(a * z.ln() - z - ln_gamma(a + T::one())?)
    }
}

/// Power series `Σ z^n / ((a+1)...(a+n))`, so that `P(a,z) = prefactor · sum`.
fn lower_series<T: Real>(a: T, z: T) -> Result<T> {
    let mut term = T::one();
    let mut sum = T::one();
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap = ap + T::one();
        term = term * z / ap;
        sum = sum + term;
        if term < sum * T::epsilon() {
            return Ok(sum);
        }
    }
    Err(SpecFunError::NonConvergence("incomplete gamma series"))
}

/// Modified Lentz evaluation of the continued fraction for `Γ(a,z) e^{z} z^{-a}`.
fn upper_continued_fraction<T: Real>(a: T, z: T) -> Result<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let tiny = T::min_positive_value() / T::epsilon();
    let mut b = z + one - a;
    let mut c = tiny.recip();
    let mut d = b.recip();
    let mut h = d;
    for i in 1..=MAX_ITER {
        let fi = T::from_count(i);
        let an = -fi * (fi - a);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let del = d * c;
        h = h * del;
        if (del - one).abs() < T::epsilon() {
            return Ok(h);
        }
    }
    Err(SpecFunError::NonConvergence("incomplete gamma continued fraction"))
}

/// Regularized pair `(P(a,z), Q(a,z))` with `P + Q = 1`.
pub fn regularized_gamma_pair<T: Real>(a: T, z: T) -> Result<(T, T)> {
    check_arg(a, z)?;
    let one = T::one();
    if z == T::zero() {
        return Ok((T::zero(), one));
    }
    if z < a + one {
        let p = (ln_series_prefactor(a, z)?).exp() * lower_series(a, z)?;
        let p = p.min(one);
        Ok((p, one - p))
    } else {
        // prefactor for Q uses Γ(a) = Γ(a+1)/a
        let ln_pref = ln_series_prefactor(a, z)? + a.ln();
        let q = (ln_pref.exp() * upper_continued_fraction(a, z)?).min(one);
        Ok((one - q, q))
    }
}

/// Regularized lower incomplete gamma `P(a,z) = γ(a,z) / Γ(a)`.
pub fn regularized_lower_gamma<T: Real>(a: T, z: T) -> Result<T> {
    regularized_gamma_pair(a, z).map(|(p, _)| p)
}

/// Regularized upper incomplete gamma `Q(a,z) = 1 - P(a,z)`.
pub fn regularized_upper_gamma<T: Real>(a: T, z: T) -> Result<T> {
    regularized_gamma_pair(a, z).map(|(_, q)| q)
}

/// `ln γ(a,z)`; finite for every `z > 0` even where `γ(a,z)` itself overflows.
/// Returns `-inf` at `z = 0`.
pub fn ln_lower_incomplete_gamma<T: Real>(a: T, z: T) -> Result<T> {
    check_arg(a, z)?;
    if z == T::zero() {
        return Ok(T::neg_infinity());
    }
    if z < a + T::one() {
        // γ(a,z) = z^a e^{-z} / a · Σ
        Ok(a * z.ln() - z - a.ln() + lower_series(a, z)?.ln())
    } else {
        let (_, q) = regularized_gamma_pair(a, z)?;
        Ok(ln_gamma(a)? + (-q).ln_1p())
    }
}

/// Unregularized lower incomplete gamma `γ(a,z) = ∫₀^z t^{a-1} e^{-t} dt`.
///
/// Overflows to `+inf` once `Γ(a)` exceeds the scalar range; the models work
/// with [`regularized_lower_gamma`] or [`ln_lower_incomplete_gamma`] instead.
pub fn lower_incomplete_gamma<T: Real>(a: T, z: T) -> Result<T> {
    check_arg(a, z)?;
    if z == T::zero() {
        return Ok(T::zero());
    }
    Ok(ln_lower_incomplete_gamma(a, z)?.exp())
}

/// `∂ ln γ(a,z) / ∂a`.
///
/// Differentiates the power series term by term (all terms positive). Far in
/// the upper tail, where `Q(a,z)` is below double precision, it equals `ψ(a)`.
pub fn d_ln_lower_gamma_da<T: Real>(a: T, z: T) -> Result<T> {
    check_arg(a, z)?;
    if z == T::zero() {
        return Err(SpecFunError::Domain("derivative undefined at z = 0"));
    }
    if z > T::lit(200.0) + T::lit(2.0) * a {
        return digamma(a);
    }
    // γ(a,z) = z^a e^{-z} Σ_n t_n,  t_n = z^n / (a (a+1) ... (a+n))
    let mut t = a.recip();
    let mut harmonic = a.recip();
    let mut sum = t;
    let mut weighted = t * harmonic;
    let mut ap = a;
    for _ in 0..(4 * MAX_ITER) {
        ap = ap + T::one();
        t = t * z / ap;
        harmonic = harmonic + ap.recip();
        sum = sum + t;
        weighted = weighted + t * harmonic;
        if t * harmonic < weighted * T::epsilon() && ap > z {
            return Ok(z.ln() - weighted / sum);
        }
    }
    Err(SpecFunError::NonConvergence("incomplete gamma shape derivative"))
}

/// Standard normal CDF `Φ(z)`, via `erfc(x) = Q(½, x²)`.
pub fn std_normal_cdf<T: Real>(z: T) -> Result<T> {
    if !z.is_finite() {
        return Err(SpecFunError::Domain("z must be finite"));
    }
    let half = T::lit(0.5);
    if z == T::zero() {
        return Ok(half);
    }
    let (p, q) = regularized_gamma_pair(half, z * z * half)?;
    // Φ(z) = ½ erfc(-z/√2); P/Q keep the small tail free of cancellation.
    if z < T::zero() {
        Ok(half * q)
    } else {
        Ok(half + half * p)
    }
}

/// Standard normal density `φ(z)`.
pub fn std_normal_pdf<T: Real>(z: T) -> T {
    let inv_sqrt_2pi = T::lit(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(z * z) * T::lit(0.5)).exp()
}
