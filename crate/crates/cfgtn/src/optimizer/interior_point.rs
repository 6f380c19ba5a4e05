//! Log-barrier interior-point minimization over linear constraints.
//!
//! Inequalities g(x) <= 0 (box bounds and explicit rows) are replaced by
//! slacks g(x) + s = 0, s > 0, and the barrier subproblem
//! min f(x) - mu * sum ln(s_i) subject to A x = b is solved for a
//! decreasing sequence of mu. Because the constraints are linear the
//! slacks are maintained implicitly as s = h - G x, which keeps
//! g(x) + s = 0 exact at every iterate.
//!
//! Each inner iteration first attempts a direct (Newton-type) step from
//! the reduced KKT system, with curvature modeled as damped BFGS for the
//! objective plus the exact barrier Hessian; when that model is not
//! positive definite the step falls back to a trust-region-limited
//! steepest descent direction.

use super::{finite_difference_gradient, NlpProblem, SolverSettings};
use crate::error::{Error, Result};

/// Terminal barrier parameter: the outer loop stops once mu has shrunk
/// below this and the KKT residual meets the tolerance.
const MU_MIN: f64 = 1e-9;

/// Fraction-to-boundary rule keeping slacks strictly positive.
const BOUNDARY_FRACTION: f64 = 0.995;

/// Iterate state of the barrier method: primal point, implicit slacks,
/// barrier parameter, and multiplier estimates.
#[derive(Debug, Clone)]
pub struct BarrierState {
    pub x: Vec<f64>,
    pub slacks: Vec<f64>,
    pub mu: f64,
    /// Inequality multipliers z_i = mu / s_i (complementarity s_i z_i = mu
    /// holds exactly).
    pub ineq_multipliers: Vec<f64>,
    /// Equality multipliers from the least-squares stationarity fit.
    pub eq_multipliers: Vec<f64>,
}

/// Outcome of one interior-point solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub objective: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub mu_final: f64,
    pub wall_time: f64,
}

struct Constraints {
    g_rows: Vec<Vec<f64>>,
    h: Vec<f64>,
    a_rows: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Constraints {
    fn from_problem(problem: &NlpProblem<'_>) -> Self {
        let d = problem.dim;
        let mut g_rows = Vec::new();
        let mut h = Vec::new();
        for (i, &(lo, up)) in problem.bounds.iter().enumerate() {
            if lo.is_finite() {
                let mut row = vec![0.0; d];
                row[i] = -1.0;
                g_rows.push(row);
                h.push(-lo);
            }
            if up.is_finite() {
                let mut row = vec![0.0; d];
                row[i] = 1.0;
                g_rows.push(row);
                h.push(up);
            }
        }
        for (row, &rhs) in problem
            .inequalities
            .rows
            .iter()
            .zip(&problem.inequalities.rhs)
        {
            g_rows.push(row.clone());
            h.push(rhs);
        }
        Constraints {
            g_rows,
            h,
            a_rows: problem.equalities.rows.clone(),
            b: problem.equalities.rhs.clone(),
        }
    }

    fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.g_rows
            .iter()
            .zip(&self.h)
            .map(|(row, &hi)| hi - dot(row, x))
            .collect()
    }

    fn eq_violation(&self, x: &[f64]) -> f64 {
        self.a_rows
            .iter()
            .zip(&self.b)
            .map(|(row, &bi)| (dot(row, x) - bi).abs())
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the null space of A (rows assumed independent).
fn null_space_basis(a_rows: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    // orthonormalize the equality rows
    let mut q: Vec<Vec<f64>> = Vec::new();
    for row in a_rows {
        let mut v = row.clone();
        for qi in &q {
            let c = dot(&v, qi);
            for (vj, qj) in v.iter_mut().zip(qi) {
                *vj -= c * qj;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            for vj in &mut v {
                *vj /= norm;
            }
            q.push(v);
        }
    }
    // extend with standard basis vectors orthogonal to the row space
    let mut z: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        if z.len() == d - q.len() {
            break;
        }
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        for qi in q.iter().chain(z.iter()) {
            let c = dot(&v, qi);
            for (vj, qj) in v.iter_mut().zip(qi) {
                *vj -= c * qj;
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            for vj in &mut v {
                *vj /= norm;
            }
            z.push(v);
        }
    }
    z
}

/// Projects x onto the affine set A x = b (A rows orthonormalized inside).
fn project_onto_equalities(x: &mut [f64], a_rows: &[Vec<f64>], b: &[f64]) {
    // small residual correction by one pass of orthogonalized rows
    for _ in 0..2 {
        for (row, &bi) in a_rows.iter().zip(b) {
            let norm2 = dot(row, row);
            if norm2 <= 0.0 {
                continue;
            }
            let resid = dot(row, x) - bi;
            for (xj, rj) in x.iter_mut().zip(row) {
                *xj -= resid * rj / norm2;
            }
        }
    }
}

/// Dense Cholesky solve of (M)v = rhs; returns None when M is not
/// positive definite.
fn cholesky_solve(m: &[f64], d: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = m[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 1e-14 {
                    return None;
                }
                l[i * d + j] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut sum = rhs[i];
        for k in 0..i {
            sum -= l[i * d + k] * y[k];
        }
        y[i] = sum / l[i * d + i];
    }
    let mut v = vec![0.0; d];
    for i in (0..d).rev() {
        let mut sum = y[i];
        for k in (i + 1)..d {
            sum -= l[k * d + i] * v[k];
        }
        v[i] = sum / l[i * d + i];
    }
    Some(v)
}

/// Minimizes the problem's objective subject to its constraints, starting
/// from a strictly feasible point.
///
/// Returns the final iterate and a report; when the iteration or
/// line-search budget runs out the best feasible iterate seen so far comes
/// back with `converged = false`.
pub fn interior_point_minimize(
    problem: &NlpProblem<'_>,
    x0: &[f64],
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    settings.validate()?;
    let start_time = std::time::Instant::now();
    let d = problem.dim;
    if x0.len() != d {
        return Err(Error::InvalidInput("starting point dimension mismatch".into()));
    }
    let cons = Constraints::from_problem(problem);
    let m = cons.g_rows.len();

    let mut x = x0.to_vec();
    if cons.eq_violation(&x) > settings.constraint_tolerance {
        return Err(Error::InfeasibleStart(format!(
            "equality violation {} at start",
            cons.eq_violation(&x)
        )));
    }
    project_onto_equalities(&mut x, &cons.a_rows, &cons.b);
    let slacks = cons.slacks(&x);
    if slacks.iter().any(|&s| s <= 0.0) {
        return Err(Error::InfeasibleStart(
            "starting point is not strictly interior to the inequalities".into(),
        ));
    }

    let f = |x: &[f64]| (problem.objective)(x);
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::NonFinite("objective at starting point".into()));
    }
    let f_start = fx;

    let z = null_space_basis(&cons.a_rows, d);
    let dz = z.len();
    if dz == 0 {
        // the equality system pins the point down entirely
        let report = SolveReport {
            objective: fx,
            outer_iterations: 0,
            inner_iterations: 0,
            converged: true,
            kkt_residual: 0.0,
            mu_final: 0.0,
            wall_time: start_time.elapsed().as_secs_f64(),
        };
        return Ok((x, report));
    }

    let mut grad_f = finite_difference_gradient(&*problem.objective, &x, settings.fd_step)?;
    // BFGS model of the objective Hessian only; barrier curvature is exact.
    let mut b_mat = vec![0.0; d * d];
    for i in 0..d {
        b_mat[i * d + i] = 1.0;
    }

    let mut best_x = x.clone();
    let mut best_f = fx;
    let mut mu = settings.mu_initial;
    let mut outer = 0;
    let mut inner_total = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;

    'outer: while outer < settings.max_outer {
        outer += 1;
        let inner_tol = settings.kkt_tolerance.max(mu);

        for _ in 0..settings.max_inner {
            let slacks = cons.slacks(&x);
            // barrier gradient: grad f + sum_i (mu / s_i) g_i
            let mut grad_phi = grad_f.clone();
            for (row, &s) in cons.g_rows.iter().zip(&slacks) {
                let w = mu / s;
                for (gj, rj) in grad_phi.iter_mut().zip(row) {
                    *gj += w * rj;
                }
            }
            let reduced_grad: Vec<f64> = z.iter().map(|zi| dot(zi, &grad_phi)).collect();
            kkt = reduced_grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
            if kkt <= inner_tol {
                break;
            }
            inner_total += 1;

            // Hessian model H = B + sum_i (mu / s_i^2) g_i g_i^T, reduced
            // through the null-space basis.
            let mut h_full = b_mat.clone();
            for (row, &s) in cons.g_rows.iter().zip(&slacks) {
                let w = mu / (s * s);
                for i in 0..d {
                    if row[i] == 0.0 {
                        continue;
                    }
                    let wi = w * row[i];
                    for j in 0..d {
                        if row[j] != 0.0 {
                            h_full[i * d + j] += wi * row[j];
                        }
                    }
                }
            }
            let mut h_red = vec![0.0; dz * dz];
            // H Z first, then Z^T (H Z)
            let mut hz = vec![0.0; d * dz];
            for (c, zc) in z.iter().enumerate() {
                for i in 0..d {
                    let mut sum = 0.0;
                    for j in 0..d {
                        sum += h_full[i * d + j] * zc[j];
                    }
                    hz[i * dz + c] = sum;
                }
            }
            for (r, zr) in z.iter().enumerate() {
                for c in 0..dz {
                    let mut sum = 0.0;
                    for i in 0..d {
                        sum += zr[i] * hz[i * dz + c];
                    }
                    h_red[r * dz + c] = sum;
                }
            }

            let neg_rg: Vec<f64> = reduced_grad.iter().map(|&g| -g).collect();
            // direct step; trust-region steepest descent if the model is
            // not positive definite
            let dv = cholesky_solve(&h_red, dz, &neg_rg).unwrap_or_else(|| {
                let norm = reduced_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                neg_rg.iter().map(|g| g / norm.max(1.0)).collect()
            });
            let mut dx = vec![0.0; d];
            for (c, zc) in z.iter().enumerate() {
                for (dxj, zj) in dx.iter_mut().zip(zc) {
                    *dxj += dv[c] * zj;
                }
            }

            // fraction-to-boundary cap on the slacks
            let mut alpha_cap = 1.0f64;
            for (row, &s) in cons.g_rows.iter().zip(&slacks) {
                let gd = dot(row, &dx);
                if gd > 0.0 {
                    alpha_cap = alpha_cap.min(BOUNDARY_FRACTION * s / gd);
                }
            }

            let phi0 = fx - mu * slacks.iter().map(|s| s.ln()).sum::<f64>();
            let dphi = dot(&grad_phi, &dx);
            let mut alpha = alpha_cap.min(1.0);
            let mut accepted = false;
            while alpha > 1e-14 {
                let xn: Vec<f64> = x.iter().zip(&dx).map(|(&xi, &di)| xi + alpha * di).collect();
                let sn = cons.slacks(&xn);
                if sn.iter().all(|&s| s > 0.0) {
                    let fxn = f(&xn);
                    if fxn.is_finite() {
                        let phin = fxn - mu * sn.iter().map(|s| s.ln()).sum::<f64>();
                        if phin <= phi0 + 1e-4 * alpha * dphi {
                            let grad_new = finite_difference_gradient(
                                &*problem.objective,
                                &xn,
                                settings.fd_step,
                            )?;
                            damped_bfgs_update(&mut b_mat, &x, &xn, &grad_f, &grad_new);
                            x = xn;
                            fx = fxn;
                            grad_f = grad_new;
                            if fx < best_f {
                                best_f = fx;
                                best_x = x.clone();
                            }
                            accepted = true;
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // stalled at this barrier level; shrinking mu reshapes the
                // subproblem
                break;
            }
        }

        if mu < MU_MIN && kkt <= settings.kkt_tolerance {
            converged = true;
            break 'outer;
        }
        if mu < MU_MIN * settings.mu_shrink {
            break;
        }
        mu *= settings.mu_shrink;
    }

    // final iterate must not be worse than the start; fall back to the best
    // feasible point tracked along the way
    if !converged || fx > f_start {
        if best_f < fx {
            x = best_x;
            fx = best_f;
        }
    }

    let slacks = cons.slacks(&x);
    let report = SolveReport {
        objective: fx,
        outer_iterations: outer,
        inner_iterations: inner_total,
        converged,
        kkt_residual: kkt.max(cons.eq_violation(&x)),
        mu_final: mu,
        wall_time: start_time.elapsed().as_secs_f64(),
    };
    debug_assert!(slacks.iter().all(|&s| s > 0.0));
    let _ = m;
    Ok((x, report))
}

/// Powell-damped BFGS update keeping the model positive definite.
fn damped_bfgs_update(b: &mut [f64], x_old: &[f64], x_new: &[f64], g_old: &[f64], g_new: &[f64]) {
    let d = x_old.len();
    let s: Vec<f64> = x_new.iter().zip(x_old).map(|(a, o)| a - o).collect();
    let y: Vec<f64> = g_new.iter().zip(g_old).map(|(a, o)| a - o).collect();
    let mut bs = vec![0.0; d];
    for i in 0..d {
        bs[i] = dot(&b[i * d..(i + 1) * d], &s);
    }
    let sbs = dot(&s, &bs);
    let sy = dot(&s, &y);
    if !(sbs > 1e-14) {
        return;
    }
    let y_hat: Vec<f64> = if sy < 0.2 * sbs {
        let theta = 0.8 * sbs / (sbs - sy);
        y.iter()
            .zip(&bs)
            .map(|(&yi, &bsi)| theta * yi + (1.0 - theta) * bsi)
            .collect()
    } else {
        y
    };
    let s_yhat = dot(&s, &y_hat);
    if !(s_yhat > 1e-14) {
        return;
    }
    for i in 0..d {
        for j in 0..d {
            b[i * d + j] += y_hat[i] * y_hat[j] / s_yhat - bs[i] * bs[j] / sbs;
        }
    }
}
