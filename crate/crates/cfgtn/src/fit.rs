//! Likelihood evaluation and maximum pseudo-likelihood fitting of a fixed
//! mixture structure.
//!
//! [`MixtureEvaluator`] precomputes the per-dataset transforms every
//! component reuses (log u, log(-log u), normal scores) and memoizes
//! Student-t scores per degrees-of-freedom value, which keeps
//! finite-difference gradients cheap: only the two probes that move the
//! t parameter recompute quantiles.

use crate::copula::{frank_psi_abs_coeffs, gumbel_coeff_ln, log_sum_exp as lse, Family};
use crate::correlation::{
    correlation_to_angles, AngleVector, CholeskyFactor, CorrelationMatrix,
};
use crate::data::PseudoSample;
use crate::error::{Error, Result};
use crate::mixture::{aicc, CfgtnModel, FitReport, MixtureStructure, Packing, PROPORTION_THRESHOLD};
use crate::optimizer::{
    brent_minimize, interior_point_minimize, NlpProblem, SolverSettings,
};
use crate::special::{norm_quantile, t_quantile};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Rows per deterministic reduction chunk; partial sums are combined in
/// fixed order so results do not depend on the thread count.
const CHUNK: usize = 1024;

/// Precomputed transforms of one dataset for fast repeated likelihood
/// evaluation.
pub struct MixtureEvaluator<'a> {
    sample: &'a PseudoSample,
    ln_u: Vec<f64>,
    lnln_u: Vec<f64>,
    z: Vec<f64>,
    t_cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

enum ComponentCtx {
    Clayton {
        ln_w: f64,
        alpha: f64,
    },
    Frank {
        ln_w: f64,
        alpha: f64,
        coeffs: Vec<f64>,
    },
    Gumbel {
        ln_w: f64,
        alpha: f64,
        coeff_ln: Vec<f64>,
    },
    Gaussian {
        ln_w: f64,
        chol: CholeskyFactor,
    },
    StudentT {
        ln_w: f64,
        chol: CholeskyFactor,
        nu: f64,
        scores: Arc<Vec<f64>>,
    },
}

impl<'a> MixtureEvaluator<'a> {
    pub fn new(sample: &'a PseudoSample) -> Self {
        let ln_u: Vec<f64> = sample.values().iter().map(|&u| u.ln()).collect();
        let lnln_u: Vec<f64> = ln_u.iter().map(|&l| (-l).ln()).collect();
        let z: Vec<f64> = sample.values().iter().map(|&u| norm_quantile(u)).collect();
        Self {
            sample,
            ln_u,
            lnln_u,
            z,
            t_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn sample(&self) -> &PseudoSample {
        self.sample
    }

    fn t_scores(&self, nu: f64) -> Arc<Vec<f64>> {
        let key = nu.to_bits();
        {
            let cache = self.t_cache.lock().unwrap();
            if let Some(hit) = cache.get(&key) {
                return Arc::clone(hit);
            }
        }
        let scores: Vec<f64> = self
            .sample
            .values()
            .par_iter()
            .map(|&u| t_quantile(u, nu))
            .collect();
        let scores = Arc::new(scores);
        let mut cache = self.t_cache.lock().unwrap();
        if cache.len() > 64 {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&scores));
        scores
    }

    /// Per-component contexts for the model's active components; `None`
    /// when a parameter is outside its domain (the optimizer treats the
    /// resulting non-finite objective as a rejected step).
    fn contexts(&self, model: &CfgtnModel) -> Option<Vec<ComponentCtx>> {
        let p = self.sample.dim();
        if model.dimension != p {
            return None;
        }
        let mut ctxs = Vec::new();
        if model.w_clayton > 0.0 {
            if !(model.alpha_clayton > 0.0) {
                return None;
            }
            ctxs.push(ComponentCtx::Clayton {
                ln_w: model.w_clayton.ln(),
                alpha: model.alpha_clayton,
            });
        }
        if model.w_frank > 0.0 {
            if !(model.alpha_frank > 0.0) {
                return None;
            }
            ctxs.push(ComponentCtx::Frank {
                ln_w: model.w_frank.ln(),
                alpha: model.alpha_frank,
                coeffs: frank_psi_abs_coeffs(p),
            });
        }
        if model.w_gumbel > 0.0 {
            if !(model.alpha_gumbel >= 1.0) {
                return None;
            }
            ctxs.push(ComponentCtx::Gumbel {
                ln_w: model.w_gumbel.ln(),
                alpha: model.alpha_gumbel,
                coeff_ln: gumbel_coeff_ln(p, model.alpha_gumbel),
            });
        }
        if model.w_t > 0.0 {
            if !(model.nu > 0.0 && model.nu.is_finite()) {
                return None;
            }
            let r = model.theta_t.to_correlation();
            let chol = r.cholesky().ok()?;
            ctxs.push(ComponentCtx::StudentT {
                ln_w: model.w_t.ln(),
                chol,
                nu: model.nu,
                scores: self.t_scores(model.nu),
            });
        }
        for (w, theta) in model.normal_weights.iter().zip(&model.theta_normals) {
            if *w > 0.0 {
                let r = theta.to_correlation();
                let chol = r.cholesky().ok()?;
                ctxs.push(ComponentCtx::Gaussian {
                    ln_w: w.ln(),
                    chol,
                });
            }
        }
        if ctxs.is_empty() {
            return None;
        }
        Some(ctxs)
    }

    fn row_terms(&self, ctxs: &[ComponentCtx], i: usize, terms: &mut Vec<f64>, buf: &mut [f64]) {
        let p = self.sample.dim();
        let lo = i * p;
        let hi = lo + p;
        terms.clear();
        for ctx in ctxs {
            let t = match ctx {
                ComponentCtx::Clayton { ln_w, alpha } => {
                    ln_w + crate::copula::clayton_ln_pdf_row(&self.ln_u[lo..hi], *alpha)
                }
                ComponentCtx::Frank {
                    ln_w,
                    alpha,
                    coeffs,
                } => ln_w + crate::copula::frank_ln_pdf_row(self.sample.row(i), *alpha, coeffs),
                ComponentCtx::Gumbel {
                    ln_w,
                    alpha,
                    coeff_ln,
                } => {
                    ln_w
                        + crate::copula::gumbel_ln_pdf_row(
                            &self.ln_u[lo..hi],
                            &self.lnln_u[lo..hi],
                            *alpha,
                            coeff_ln,
                        )
                }
                ComponentCtx::Gaussian { ln_w, chol } => {
                    ln_w + crate::copula::gaussian_ln_pdf_row(&self.z[lo..hi], chol, buf)
                }
                ComponentCtx::StudentT {
                    ln_w,
                    chol,
                    nu,
                    scores,
                } => ln_w + crate::copula::student_t_ln_pdf_row(&scores[lo..hi], chol, *nu, buf),
            };
            terms.push(t);
        }
    }

    /// Log pseudo-likelihood of the model on the dataset; -inf flags a
    /// rejected (out-of-domain or degenerate) parameter point.
    pub fn log_likelihood(&self, model: &CfgtnModel) -> f64 {
        let Some(ctxs) = self.contexts(model) else {
            return f64::NEG_INFINITY;
        };
        let n = self.sample.n();
        let p = self.sample.dim();
        let n_chunks = n.div_ceil(CHUNK);
        let partials: Vec<f64> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = ((c + 1) * CHUNK).min(n);
                let mut sum = 0.0;
                let mut terms = Vec::with_capacity(ctxs.len());
                let mut buf = vec![0.0; p];
                for i in start..end {
                    self.row_terms(&ctxs, i, &mut terms, &mut buf);
                    let v = lse(&terms);
                    if !v.is_finite() {
                        return f64::NEG_INFINITY;
                    }
                    sum += v;
                }
                sum
            })
            .collect();
        let total: f64 = partials.iter().sum();
        if total.is_finite() {
            total
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Mixture log-density for every row; used for grid scoring.
    pub fn log_density_rows(&self, model: &CfgtnModel) -> Result<Vec<f64>> {
        let ctxs = self
            .contexts(model)
            .ok_or_else(|| Error::Domain("model parameters outside domain".into()))?;
        let n = self.sample.n();
        let p = self.sample.dim();
        let n_chunks = n.div_ceil(CHUNK);
        let rows: Vec<Vec<f64>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = ((c + 1) * CHUNK).min(n);
                let mut out = Vec::with_capacity(end - start);
                let mut terms = Vec::with_capacity(ctxs.len());
                let mut buf = vec![0.0; p];
                for i in start..end {
                    self.row_terms(&ctxs, i, &mut terms, &mut buf);
                    out.push(lse(&terms));
                }
                out
            })
            .collect();
        Ok(rows.into_iter().flatten().collect())
    }

    /// Per-row, per-active-component log(w_j) + log c_j values, used by
    /// the EM E-step. Component order matches the model's slot order.
    pub fn component_log_terms(&self, model: &CfgtnModel) -> Result<Vec<Vec<f64>>> {
        let ctxs = self
            .contexts(model)
            .ok_or_else(|| Error::Domain("model parameters outside domain".into()))?;
        let n = self.sample.n();
        let p = self.sample.dim();
        let n_chunks = n.div_ceil(CHUNK);
        let rows: Vec<Vec<Vec<f64>>> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = ((c + 1) * CHUNK).min(n);
                let mut out = Vec::with_capacity(end - start);
                let mut terms = Vec::with_capacity(ctxs.len());
                let mut buf = vec![0.0; p];
                for i in start..end {
                    self.row_terms(&ctxs, i, &mut terms, &mut buf);
                    out.push(terms.clone());
                }
                out
            })
            .collect();
        Ok(rows.into_iter().flatten().collect())
    }
}

// ---------------------------------------------------------------------------
// Fitting a fixed structure by the interior-point solver
// ---------------------------------------------------------------------------

/// Pulls a packed vector strictly inside its bounds and constraints so the
/// barrier method can start: slots move a margin off their bounds, weights
/// are renormalized onto the simplex, and tied Gaussian weights get a tiny
/// strict ordering separation.
pub fn make_strictly_feasible(packing: &Packing, beta: &mut [f64]) {
    let bounds = packing.bounds();
    let wc = packing.weight_count();
    for (i, (v, &(lo, up))) in beta.iter_mut().zip(&bounds).enumerate() {
        let span = if up.is_finite() && lo.is_finite() {
            up - lo
        } else {
            1.0
        };
        let margin = (1e-6 * span).min(1e-4).max(1e-9);
        let m = if i < wc { 1e-4 } else { margin };
        if lo.is_finite() && *v < lo + m {
            *v = lo + m;
        }
        if up.is_finite() && *v > up - m {
            *v = up - m;
        }
    }
    // strictly decreasing Gaussian weights
    let s = &packing.structure;
    let first_normal =
        s.clayton as usize + s.frank as usize + s.gumbel as usize + s.student_t as usize;
    for j in 1..s.normals {
        let idx = first_normal + j;
        if beta[idx] >= beta[idx - 1] {
            beta[idx] = (beta[idx - 1] - 1e-4).max(1e-5);
        }
    }
    // renormalize onto the simplex
    let total: f64 = beta[..wc].iter().sum();
    if total > 0.0 {
        for v in &mut beta[..wc] {
            *v /= total;
        }
    }
}

/// Maximum pseudo-likelihood fit of a fixed structure starting from
/// `init`, via the log-barrier interior-point method. The returned model
/// is NOT thresholded; the report carries loglik, DF(0.01), and AICc.
pub fn fit_structure(
    sample: &PseudoSample,
    structure: MixtureStructure,
    init: &CfgtnModel,
    settings: &SolverSettings,
) -> Result<(CfgtnModel, FitReport)> {
    let n = sample.n();
    let packing = Packing::new(structure, sample.dim());
    let evaluator = MixtureEvaluator::new(sample);
    let scale = 1.0 / n as f64;

    let mut beta0 = packing.pack(init);
    make_strictly_feasible(&packing, &mut beta0);

    let packing_obj = packing.clone();
    let objective = move |beta: &[f64]| -> f64 {
        match packing_obj.unpack(beta) {
            Ok(model) => -evaluator.log_likelihood(&model) * scale,
            Err(_) => f64::INFINITY,
        }
    };
    let problem = NlpProblem {
        objective: Box::new(objective),
        dim: packing.len(),
        bounds: packing.bounds(),
        equalities: packing.equalities(),
        inequalities: packing.inequalities(),
    };
    let (beta, solve) = interior_point_minimize(&problem, &beta0, settings)?;
    let model = packing.unpack(&beta)?;
    let loglik = -solve.objective * n as f64;
    let df = model.degrees_of_freedom(PROPORTION_THRESHOLD);
    let report = FitReport {
        loglik,
        df,
        aicc: aicc(loglik, df, n)?,
        iterations: solve.inner_iterations,
        wall_time: solve.wall_time,
        converged: solve.converged,
        kkt_residual: solve.kkt_residual,
        angle_cap_hit: model.hits_angle_cap(),
    };
    Ok((model, report))
}

// ---------------------------------------------------------------------------
// Single-family maximum likelihood fits
// ---------------------------------------------------------------------------

/// Normal-scores correlation of the sample: Pearson correlation of
/// Phi^{-1}-transformed columns, normalized back to unit diagonal.
pub fn normal_scores_correlation(sample: &PseudoSample) -> CorrelationMatrix {
    let evaluator = MixtureEvaluator::new(sample);
    weighted_scores_correlation(&evaluator.z, sample.n(), sample.dim(), None)
}

/// Correlation of score rows under optional nonnegative row weights.
pub(crate) fn weighted_scores_correlation(
    z: &[f64],
    n: usize,
    p: usize,
    weights: Option<&[f64]>,
) -> CorrelationMatrix {
    let mut s = vec![0.0; p * p];
    let mut wsum = 0.0;
    for i in 0..n {
        let w = weights.map_or(1.0, |ws| ws[i]);
        if w <= 0.0 {
            continue;
        }
        wsum += w;
        let row = &z[i * p..(i + 1) * p];
        for a in 0..p {
            for b in 0..=a {
                s[a * p + b] += w * row[a] * row[b];
            }
        }
    }
    if wsum <= 0.0 {
        return CorrelationMatrix::identity(p);
    }
    for v in &mut s {
        *v /= wsum;
    }
    let diag: Vec<f64> = (0..p).map(|a| s[a * p + a].max(1e-12).sqrt()).collect();
    let mut r = vec![0.0; p * p];
    for a in 0..p {
        r[a * p + a] = 1.0;
        for b in 0..a {
            let v = (s[a * p + b] / (diag[a] * diag[b])).clamp(-0.999_999, 0.999_999);
            r[a * p + b] = v;
            r[b * p + a] = v;
        }
    }
    CorrelationMatrix::new(p, r).unwrap_or_else(|_| CorrelationMatrix::identity(p))
}

/// Angle vector of a (possibly borderline) correlation estimate, shrinking
/// toward the identity until the Cholesky factorization succeeds.
pub fn project_to_angles(r: &CorrelationMatrix) -> AngleVector {
    let p = r.dim();
    let mut shrink = 0.0;
    for _ in 0..12 {
        let candidate = if shrink == 0.0 {
            r.clone()
        } else {
            let mut entries = vec![0.0; p * p];
            for i in 0..p {
                for j in 0..p {
                    let base = if i == j { 1.0 } else { 0.0 };
                    entries[i * p + j] = (1.0 - shrink) * r.get(i, j) + shrink * base;
                }
            }
            CorrelationMatrix::new(p, entries).unwrap_or_else(|_| CorrelationMatrix::identity(p))
        };
        if let Ok(theta) = correlation_to_angles(&candidate) {
            // keep strictly inside the capped interval
            let capped: Vec<f64> = theta
                .angles()
                .iter()
                .map(|&a| {
                    a.clamp(
                        crate::mixture::ANGLE_EPS * 2.0,
                        std::f64::consts::PI - crate::mixture::ANGLE_EPS * 2.0,
                    )
                })
                .collect();
            if let Ok(t) = AngleVector::new(p, capped) {
                return t;
            }
        }
        shrink = (shrink + 0.05).min(0.9);
    }
    AngleVector::identity(p)
}

/// Single-family maximum likelihood fit: bounded scalar search for the
/// Archimedean families, angle-space interior-point optimization for the
/// elliptical ones.
pub fn fit_single_family(
    sample: &PseudoSample,
    family: Family,
    settings: &SolverSettings,
) -> Result<(CfgtnModel, FitReport)> {
    let start = std::time::Instant::now();
    let n = sample.n();
    let p = sample.dim();
    let evaluator = MixtureEvaluator::new(sample);

    let structure = match family {
        Family::Clayton => MixtureStructure::single_clayton(),
        Family::Frank => MixtureStructure::single_frank(),
        Family::Gumbel => MixtureStructure::single_gumbel(),
        Family::StudentT => MixtureStructure::single_student_t(),
        Family::Gaussian => MixtureStructure::single_gaussian(),
    };
    let mut model = CfgtnModel::equal_weights(structure, p);

    match family {
        Family::Clayton | Family::Frank | Family::Gumbel => {
            let lo = if family == Family::Gumbel { 1.0 + 1e-9 } else { 1e-4 };
            let nll = |alpha: f64| {
                let mut m = model.clone();
                match family {
                    Family::Clayton => m.alpha_clayton = alpha,
                    Family::Frank => m.alpha_frank = alpha,
                    Family::Gumbel => m.alpha_gumbel = alpha,
                    _ => unreachable!(),
                }
                -evaluator.log_likelihood(&m)
            };
            let (alpha, _) = brent_minimize(nll, lo, crate::mixture::ALPHA_MAX, 1e-9, 200);
            match family {
                Family::Clayton => model.alpha_clayton = alpha,
                Family::Frank => model.alpha_frank = alpha,
                Family::Gumbel => model.alpha_gumbel = alpha,
                _ => unreachable!(),
            }
            let loglik = evaluator.log_likelihood(&model);
            if !loglik.is_finite() {
                return Err(Error::NonFinite(format!("{} single-family fit", family)));
            }
            let df = model.degrees_of_freedom(PROPORTION_THRESHOLD);
            let report = FitReport {
                loglik,
                df,
                aicc: aicc(loglik, df, n)?,
                iterations: 200,
                wall_time: start.elapsed().as_secs_f64(),
                converged: true,
                kkt_residual: 0.0,
                angle_cap_hit: false,
            };
            Ok((model, report))
        }
        Family::Gaussian | Family::StudentT => {
            let theta0 = project_to_angles(&normal_scores_correlation(sample));
            if family == Family::Gaussian {
                model.theta_normals[0] = theta0;
            } else {
                model.theta_t = theta0;
                // coarse profile over nu before the joint refinement
                let mut best = (10.0, f64::INFINITY);
                for nu in [2.0, 5.0, 10.0, 20.0, 50.0, 200.0, 1000.0] {
                    let mut m = model.clone();
                    m.nu = nu;
                    let v = -evaluator.log_likelihood(&m);
                    if v < best.1 {
                        best = (nu, v);
                    }
                }
                model.nu = best.0;
            }
            fit_structure(sample, structure, &model, settings)
        }
    }
}
