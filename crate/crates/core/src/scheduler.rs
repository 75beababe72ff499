//! Time-frequency sharing across bins under a concave network utility.

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, count, lit, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Utility<T> {
    /// Sum of log rates.
    ProportionalFair,
    /// Minimum rate.
    MaxMin,
    /// Sum of R^(1 - a) / (1 - a), or of log R at a = 1.
    AlphaFair(T),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchedulePlan<T> {
    /// Sharing fraction rho_k per bin.
    pub shares: Vec<T>,
    /// R_k = rho_k * R*(X_k).
    pub bin_rates: Vec<T>,
    pub utility_value: T,
    pub utility: Utility<T>,
    /// Iterations used by the numeric solver (0 for closed forms).
    pub iterations: usize,
}

/// Default system bandwidth in Hz.
pub const DEFAULT_BANDWIDTH_HZ: f64 = 20e6;

const MAX_ITERATIONS: usize = 100_000;
const IMPROVEMENT_TOL: f64 = 1e-10;
const STEP_TOL: f64 = 1e-13;

/// Evaluates `utility` at rates `rates`.
pub fn utility_value<T: Real>(utility: Utility<T>, rates: &[T]) -> T {
    match utility {
        Utility::ProportionalFair => compensated_sum(rates.iter().map(|r| r.ln())),
        Utility::MaxMin => rates.iter().copied().fold(T::infinity(), T::min),
        Utility::AlphaFair(a) if (a - T::one()).abs() <= T::epsilon() => {
            compensated_sum(rates.iter().map(|r| r.ln()))
        }
        Utility::AlphaFair(a) => {
            let e = T::one() - a;
            compensated_sum(rates.iter().map(|r| r.powf(e) / e))
        }
    }
}

/// Optimal sharing fractions for per-bin peak rates `r_star`.
pub fn schedule<T: Real>(r_star: &[T], utility: Utility<T>) -> Result<SchedulePlan<T>> {
    if r_star.is_empty() {
        return Err(Error::Domain("at least one bin is required".into()));
    }
    if let Some(bad) = r_star.iter().find(|r| !(**r > T::zero()) || !r.is_finite()) {
        return Err(Error::Domain(format!("bin rates must be positive and finite, got {bad}")));
    }
    let k = r_star.len();
    let (shares, iterations) = match utility {
        Utility::ProportionalFair => (vec![T::one() / count(k); k], 0),
        Utility::MaxMin => {
            let inv_sum = compensated_sum(r_star.iter().map(|r| T::one() / *r));
            (r_star.iter().map(|r| (T::one() / *r) / inv_sum).collect(), 0)
        }
        Utility::AlphaFair(a) => {
            if !(a > T::zero()) || !a.is_finite() {
                return Err(Error::Domain(format!("alpha must be positive and finite, got {a}")));
            }
            alpha_fair_shares(r_star, a)
        }
    };
    let bin_rates: Vec<T> = shares.iter().zip(r_star).map(|(s, r)| *s * *r).collect();
    Ok(SchedulePlan { utility_value: utility_value(utility, &bin_rates), shares, bin_rates, utility, iterations })
}

/// Utility of shares `rho` at normalized rates `r`, divided by a positive
/// constant that keeps the terms representable: rates are measured in units
/// of `unit` before the power is taken. Argmax and comparisons at a fixed
/// unit are unaffected.
fn scaled_objective<T: Real>(rho: &[T], r: &[T], alpha: T, unit: T) -> T {
    if rho.iter().any(|p| !(*p > T::zero())) {
        return T::neg_infinity();
    }
    let rates = rho.iter().zip(r).map(|(p, x)| *p * *x / unit);
    if (alpha - T::one()).abs() <= T::epsilon() {
        return compensated_sum(rates.map(|v| v.ln()));
    }
    let e = T::one() - alpha;
    compensated_sum(rates.map(|v| v.powf(e) / e))
}

/// Ascent on the simplex, with the gradient scaled by the inverse diagonal
/// Hessian and projected onto sum(d) = 0 in that metric.
///
/// With g_k = r_k^(1-a) rho_k^(-a) and |H_kk| = a g_k / rho_k, the step is
/// d_k = (rho_k - u_k / sum u) / a where u_k = rho_k / g_k; u is formed in
/// log space since g spans hundreds of decades when a is large. Steps stop
/// short of the boundary and are backtracked until Armijo holds, so the
/// utility never decreases.
fn alpha_fair_shares<T: Real>(r_star: &[T], alpha: T) -> (Vec<T>, usize) {
    alpha_fair_iterate(r_star, alpha, |_| {})
}

fn alpha_fair_iterate<T: Real>(r_star: &[T], alpha: T, mut on_step: impl FnMut(&[T])) -> (Vec<T>, usize) {
    let peak = r_star.iter().copied().fold(T::zero(), T::max);
    let r: Vec<T> = r_star.iter().map(|x| *x / peak).collect();
    let k = r.len();
    let mut rho = vec![T::one() / count(k); k];
    let armijo = lit::<T>(1e-4);
    let boundary = lit::<T>(0.99);
    let step_tol = lit::<T>(STEP_TOL).max(T::epsilon() * lit(16.0));
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let log_u: Vec<T> = rho
            .iter()
            .zip(&r)
            .map(|(p, x)| (T::one() + alpha) * p.ln() + (alpha - T::one()) * x.ln())
            .collect();
        let top = log_u.iter().copied().fold(T::neg_infinity(), T::max);
        let u: Vec<T> = log_u.iter().map(|l| (*l - top).exp()).collect();
        let u_sum = compensated_sum(u.iter().copied());
        let dir: Vec<T> = rho.iter().zip(&u).map(|(p, ui)| (*p - *ui / u_sum) / alpha).collect();
        // Directional derivative in the same scaled units as the objective.
        let unit = rho.iter().zip(&r).map(|(p, x)| *p * *x).fold(T::infinity(), T::min);
        let slope = compensated_sum(
            dir.iter()
                .zip(rho.iter().zip(&r))
                .map(|(d, (p, x))| *d * (*p * *x / unit).powf(-alpha) * *x / unit),
        );
        let value = scaled_objective(&rho, &r, alpha, unit);
        let mut t = dir
            .iter()
            .zip(&rho)
            .filter(|(d, _)| **d < T::zero())
            .map(|(d, p)| boundary * -*p / *d)
            .fold(T::one(), T::min);
        let mut accepted = None;
        while t > lit(1e-30) {
            let trial: Vec<T> = rho.iter().zip(&dir).map(|(p, d)| *p + t * *d).collect();
            let v = scaled_objective(&trial, &r, alpha, unit);
            if v.is_finite() && v >= value + armijo * t * slope {
                accepted = Some((trial, v));
                break;
            }
            t = t / lit(2.0);
        }
        let Some((next, v)) = accepted else { break };
        let moved = next.iter().zip(&rho).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max);
        let improvement = v - value;
        let total = compensated_sum(next.iter().copied());
        rho = next.into_iter().map(|p| p / total).collect();
        on_step(&rho);
        if improvement < lit::<T>(IMPROVEMENT_TOL) * (T::one() + value.abs()) && moved < step_tol {
            break;
        }
    }
    (rho, iterations)
}

/// Cluster throughput in bit/s: sum of R_k times the bandwidth.
pub fn system_throughput<T: Real>(plan: &SchedulePlan<T>, bandwidth_hz: T) -> T {
    compensated_sum(plan.bin_rates.iter().copied()) * bandwidth_hz
}

/// Per-user rate in each bin when its rate is shared evenly among
/// `users[k]` users.
pub fn per_user_rates<T: Real>(plan: &SchedulePlan<T>, users: &[T]) -> Vec<T> {
    plan.bin_rates.iter().zip(users).map(|(r, u)| *r / *u).collect()
}
