//! Levenberg–Marquardt for small dense least-squares problems.

use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct LmOptions<T> {
    pub max_iter: usize,
    /// Relative RSS change of an accepted step below which the fit stops.
    pub rtol: T,
    /// Scaled-gradient threshold: `max_j |J_jᵀ r| / (‖J_j‖ ‖r‖)`.
    pub gtol: T,
}

impl<T: Real> Default for LmOptions<T> {
    fn default() -> Self {
        Self { max_iter: 500, rtol: T::lit(1e-10), gtol: T::lit(1e-8) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmStatus {
    /// Relative RSS change below `rtol`.
    SmallChange,
    /// Scaled gradient below `gtol`.
    SmallGradient,
    /// Residual at rounding level.
    ExactFit,
    /// No damping produced a decrease.
    Stalled,
    MaxIter,
    /// The model could not be evaluated at the start point.
    BadStart,
}

impl LmStatus {
    pub fn converged(self) -> bool {
        matches!(self, LmStatus::SmallChange | LmStatus::SmallGradient | LmStatus::ExactFit)
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome<T> {
    pub theta: Vec<T>,
    pub fitted: Vec<T>,
    pub rss: T,
    pub iterations: usize,
    pub status: LmStatus,
    /// Scaled gradient at the returned point.
    pub gradient: T,
}

/// Scaled gradient `max_j |J_jᵀ r| / (‖J_j‖ ‖r‖)` for row-major `jac` (`n × p`).
pub fn scaled_gradient<T: Real>(jac: &[T], r: &[T], p: usize) -> T {
    let rn = r.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    if rn == T::zero() {
        return T::zero();
    }
    let mut worst = T::zero();
    for j in 0..p {
        let mut g = T::zero();
        let mut cn = T::zero();
        for (i, &ri) in r.iter().enumerate() {
            let jij = jac[i * p + j];
            g = g + jij * ri;
            cn = cn + jij * jij;
        }
        if cn > T::zero() {
            worst = worst.max(g.abs() / (cn.sqrt() * rn));
        }
    }
    worst
}

/// Cholesky solve of the `p × p` SPD system `a x = b`; `None` if not positive definite.
fn cholesky_solve<T: Real>(a: &[T], b: &[T], p: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s = s - l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= T::zero() || !s.is_finite() {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut y = vec![T::zero(); p];
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * p + k] * y[k];
        }
        y[i] = s / l[i * p + i];
    }
    let mut x = vec![T::zero(); p];
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s = s - l[k * p + i] * x[k];
        }
        x[i] = s / l[i * p + i];
    }
    Some(x)
}

/// Minimises `Σ (f(θ)_i − y_i)²`.
///
/// `model(θ, f, jac)` fills the model values and, when `jac` is given, the
/// row-major Jacobian; it returns `false` where the model is undefined, which
/// the damping loop treats as a rejected step.
pub fn levenberg_marquardt<T, F>(mut model: F, theta0: Vec<T>, ys: &[T], opts: &LmOptions<T>) -> LmOutcome<T>
where
    T: Real,
    F: FnMut(&[T], &mut [T], Option<&mut [T]>) -> bool,
{
    let n = ys.len();
    let p = theta0.len();
    let mut theta = theta0;
    let mut f = vec![T::zero(); n];
    let mut jac = vec![T::zero(); n * p];
    let rss_of = |f: &[T]| f.iter().zip(ys).fold(T::zero(), |a, (&fi, &yi)| a + (fi - yi) * (fi - yi));
    let y_scale = ys.iter().fold(T::zero(), |a, &y| a + y * y);
    // residuals within a few dozen ulps of the data: nothing left to fit
    let exact = y_scale * (T::lit(64.0) * T::epsilon()).powi(2);

    if !model(&theta, &mut f, Some(&mut jac)) {
        return LmOutcome {
            theta,
            fitted: f,
            rss: T::infinity(),
            iterations: 0,
            status: LmStatus::BadStart,
            gradient: T::infinity(),
        };
    }
    let mut rss = rss_of(&f);
    let mut mu = T::lit(1e-3);
    let mut nu = T::lit(2.0);
    let mut diag_scale = vec![T::zero(); p];
    let mut trial = vec![T::zero(); n];
    let mut iterations = 0;
    let mut status = LmStatus::MaxIter;

    loop {
        let r: Vec<T> = f.iter().zip(ys).map(|(&fi, &yi)| fi - yi).collect();
        let grad = scaled_gradient(&jac, &r, p);
        if rss <= exact {
            status = LmStatus::ExactFit;
            break;
        }
        if grad <= opts.gtol {
            status = LmStatus::SmallGradient;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        // normal equations
        let mut a = vec![T::zero(); p * p];
        let mut g = vec![T::zero(); p];
        for i in 0..n {
            let row = &jac[i * p..(i + 1) * p];
            for j in 0..p {
                g[j] = g[j] + row[j] * r[i];
                for k in 0..=j {
                    a[j * p + k] = a[j * p + k] + row[j] * row[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                a[k * p + j] = a[j * p + k];
            }
            diag_scale[j] = diag_scale[j].max(a[j * p + j]).max(T::min_positive_value());
        }

        let mut accepted = false;
        while !accepted {
            if mu > T::lit(1e30) {
                status = LmStatus::Stalled;
                break;
            }
            let mut damped = a.clone();
            for j in 0..p {
                damped[j * p + j] = damped[j * p + j] + mu * diag_scale[j];
            }
            let neg_g: Vec<T> = g.iter().map(|&v| -v).collect();
            let Some(step) = cholesky_solve(&damped, &neg_g, p) else {
                mu = mu * nu;
                nu = nu * T::lit(2.0);
                continue;
            };
            let cand: Vec<T> = theta.iter().zip(&step).map(|(&t, &s)| t + s).collect();
            if !model(&cand, &mut trial, None) {
                mu = mu * nu;
                nu = nu * T::lit(2.0);
                continue;
            }
            let new_rss = rss_of(&trial);
            // predicted reduction of the local quadratic model
            let predicted = step
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (j, &s)| acc + s * (mu * diag_scale[j] * s - g[j]));
            let actual = rss - new_rss;
            if actual > T::zero() && predicted > T::zero() {
                let rho = actual / predicted;
                let two = T::lit(2.0);
                let t = two * rho - T::one();
                mu = mu * (T::one() / T::lit(3.0)).max(T::one() - t * t * t);
                nu = two;
                theta = cand;
                let small = actual <= opts.rtol * rss;
                rss = new_rss;
                if !model(&theta, &mut f, Some(&mut jac)) {
                    status = LmStatus::Stalled;
                    break;
                }
                accepted = true;
                if small {
                    status = LmStatus::SmallChange;
                }
            } else {
                mu = mu * nu;
                nu = nu * T::lit(2.0);
            }
        }
        if !accepted || status == LmStatus::SmallChange {
            break;
        }
    }
    let r: Vec<T> = f.iter().zip(ys).map(|(&fi, &yi)| fi - yi).collect();
    let gradient = scaled_gradient(&jac, &r, p);
    if status == LmStatus::Stalled && rss <= exact {
        status = LmStatus::ExactFit;
    }
    LmOutcome { theta, fitted: f, rss, iterations, status, gradient }
}
