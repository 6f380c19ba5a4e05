//! Constrained maximization of the pseudo log-likelihood.
//!
//! The central solver is a log-barrier interior-point method over linear
//! equality and inequality constraints, driven by finite-difference
//! gradients and a damped BFGS curvature model (the exact Hessian of the
//! copula likelihood is out of reach without symbolic work). An EM
//! baseline for mixture fitting lives alongside it for benchmarking.

mod em;
mod interior_point;
mod scalar;

pub use em::{em_fit, EmOptions};
pub use interior_point::{interior_point_minimize, BarrierState, SolveReport};
pub use scalar::brent_minimize;

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Objective callable: returns the value to minimize; non-finite values
/// mark infeasible or numerically failed points and are rejected by line
/// searches.
pub type Objective<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

/// Linear inequality block G x <= h, one row per constraint.
#[derive(Debug, Clone, Default)]
pub struct LinearInequalities {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearInequalities {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }
}

/// Linear equality block A x = b.
#[derive(Debug, Clone, Default)]
pub struct LinearEqualities {
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// A constrained nonlinear program: minimize `objective` subject to box
/// bounds, linear equalities, and linear inequalities.
pub struct NlpProblem<'a> {
    pub objective: Box<Objective<'a>>,
    pub dim: usize,
    /// Per-slot (lower, upper); use infinities for unbounded slots.
    pub bounds: Vec<(f64, f64)>,
    pub equalities: LinearEqualities,
    pub inequalities: LinearInequalities,
}

/// Interior-point solver settings.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub mu_initial: f64,
    pub mu_shrink: f64,
    pub kkt_tolerance: f64,
    pub constraint_tolerance: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub fd_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            mu_initial: 0.1,
            mu_shrink: 0.2,
            kkt_tolerance: 1e-6,
            constraint_tolerance: 1e-8,
            max_outer: 40,
            max_inner: 60,
            // cube root of machine epsilon, the central-difference optimum
            fd_step: 6e-6,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.mu_initial,
            self.mu_shrink,
            self.kkt_tolerance,
            self.constraint_tolerance,
            self.fd_step,
        ];
        if positive.iter().any(|&v| !(v > 0.0)) || self.mu_shrink >= 1.0 {
            return Err(Error::InvalidInput(
                "solver settings must be positive with mu_shrink < 1".into(),
            ));
        }
        Ok(())
    }
}

/// Central finite-difference gradient with per-slot step
/// `fd_step * max(1, |x_i|)`.
///
/// A non-finite probe falls back to a one-sided difference through f(x);
/// both sides non-finite is an error.
pub fn finite_difference_gradient(
    objective: &Objective<'_>,
    x: &[f64],
    fd_step: f64,
) -> Result<Vec<f64>> {
    let f0 = std::sync::OnceLock::new();
    let f_at = |x: &[f64]| (objective)(x);
    let partials: Vec<Result<f64>> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let h = fd_step * x[i].abs().max(1.0);
            let mut plus = x.to_vec();
            plus[i] += h;
            let mut minus = x.to_vec();
            minus[i] -= h;
            let fp = f_at(&plus);
            let fm = f_at(&minus);
            match (fp.is_finite(), fm.is_finite()) {
                (true, true) => Ok((fp - fm) / (2.0 * h)),
                (true, false) => {
                    let f = *f0.get_or_init(|| f_at(x));
                    if !f.is_finite() {
                        return Err(Error::NonFinite("objective at center point".into()));
                    }
                    Ok((fp - f) / h)
                }
                (false, true) => {
                    let f = *f0.get_or_init(|| f_at(x));
                    if !f.is_finite() {
                        return Err(Error::NonFinite("objective at center point".into()));
                    }
                    Ok((f - fm) / h)
                }
                (false, false) => Err(Error::NonFinite(format!(
                    "both finite-difference probes for slot {} failed",
                    i
                ))),
            }
        })
        .collect();
    partials.into_iter().collect()
}

/// Unconstrained BFGS with Armijo backtracking and finite-difference
/// gradients; used for smooth low-dimensional problems like marginal MLEs.
pub fn bfgs_minimize(
    objective: &Objective<'_>,
    x0: &[f64],
    fd_step: f64,
    grad_tolerance: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64)> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut f = (objective)(&x);
    if !f.is_finite() {
        return Err(Error::NonFinite("objective at starting point".into()));
    }
    let mut grad = finite_difference_gradient(objective, &x, fd_step)?;
    let mut b_inv = identity(d); // inverse Hessian approximation

    for _ in 0..max_iter {
        let gnorm = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        if gnorm < grad_tolerance {
            break;
        }
        // direction = -B_inv * grad
        let mut dir = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                dir[i] -= b_inv[i * d + j] * grad[j];
            }
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // curvature model broke down; restart from steepest descent
            b_inv = identity(d);
            for (di, gi) in dir.iter_mut().zip(&grad) {
                *di = -gi;
            }
        }
        let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(&xi, &di)| xi + alpha * di).collect();
            let fn_ = (objective)(&xn);
            if fn_.is_finite() && fn_ <= f + 1e-4 * alpha * slope {
                let gn = finite_difference_gradient(objective, &xn, fd_step)?;
                // BFGS inverse update (Sherman-Morrison form)
                let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gn.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                if sy > 1e-12 {
                    let mut hy = vec![0.0; d];
                    for i in 0..d {
                        for j in 0..d {
                            hy[i] += b_inv[i * d + j] * y[j];
                        }
                    }
                    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
                    for i in 0..d {
                        for j in 0..d {
                            b_inv[i * d + j] += ((sy + yhy) * s[i] * s[j]) / (sy * sy)
                                - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                        }
                    }
                }
                x = xn;
                f = fn_;
                grad = gn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((x, f))
}

fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}
