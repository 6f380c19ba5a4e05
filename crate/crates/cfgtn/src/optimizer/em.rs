//! EM baseline for mixture fitting, used to benchmark the interior-point
//! solver.
//!
//! E-step: responsibilities from the current component densities.
//! M-step: weights are mean responsibilities (the exact maximizer);
//! Archimedean parameters and the t degrees of freedom maximize their
//! responsibility-weighted log-likelihood by bounded scalar search;
//! elliptical correlation matrices come from responsibility-weighted
//! normal-scores correlation projected through angle space. Every
//! component update is kept only when it does not decrease its weighted
//! objective, which makes each sweep a generalized EM step and the
//! likelihood monotone.

use crate::data::PseudoSample;
use crate::error::{Error, Result};
use crate::fit::{project_to_angles, weighted_scores_correlation, MixtureEvaluator};
use crate::mixture::{aicc, CfgtnModel, FitReport, ALPHA_MAX, NU_MAX, PROPORTION_THRESHOLD};
use crate::optimizer::brent_minimize;
use crate::special::norm_quantile;

/// Options for an EM run with intermediate snapshots.
#[derive(Debug, Clone)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Iteration counts at which to record a snapshot (for example
    /// 50/100/500 to mimic several budget variants in one run).
    pub snapshots: Vec<usize>,
    /// Brent iterations per scalar M-step search.
    pub scalar_search_iters: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            snapshots: Vec::new(),
            scalar_search_iters: 40,
        }
    }
}

/// One recorded state of an EM run.
#[derive(Debug, Clone)]
pub struct EmSnapshot {
    pub iteration: usize,
    pub model: CfgtnModel,
    pub loglik: f64,
    pub wall_time: f64,
}

/// Full EM run result: final state plus any requested snapshots and the
/// per-iteration log-likelihood trace.
#[derive(Debug, Clone)]
pub struct EmRun {
    pub model: CfgtnModel,
    pub report: FitReport,
    pub snapshots: Vec<EmSnapshot>,
    pub loglik_trace: Vec<f64>,
}

/// Fits the model's active structure by EM for at most `max_iter`
/// iterations and returns the final model and report.
pub fn em_fit(
    sample: &PseudoSample,
    model0: &CfgtnModel,
    max_iter: usize,
) -> Result<(CfgtnModel, FitReport)> {
    let run = em_fit_with_snapshots(
        sample,
        model0,
        &EmOptions {
            max_iter,
            ..EmOptions::default()
        },
    )?;
    Ok((run.model, run.report))
}

/// EM with snapshot recording; see [`EmOptions`].
pub fn em_fit_with_snapshots(
    sample: &PseudoSample,
    model0: &CfgtnModel,
    options: &EmOptions,
) -> Result<EmRun> {
    model0.validate()?;
    let structure = model0.structure();
    if structure.component_count() == 0 {
        return Err(Error::InvalidInput("model has no active components".into()));
    }
    let start = std::time::Instant::now();
    let n = sample.n();
    let p = sample.dim();
    let evaluator = MixtureEvaluator::new(sample);
    let z: Vec<f64> = sample.values().iter().map(|&u| norm_quantile(u)).collect();

    let mut model = model0.clone();
    let mut loglik = evaluator.log_likelihood(&model);
    if !loglik.is_finite() {
        return Err(Error::NonFinite("log-likelihood at the EM start".into()));
    }
    let mut trace = vec![loglik];
    let mut snapshots = Vec::new();

    for iter in 1..=options.max_iter {
        // E-step: responsibilities per row and active component.
        let terms = evaluator.component_log_terms(&model)?;
        let m = terms[0].len();
        let mut resp = vec![0.0; n * m];
        for (i, row) in terms.iter().enumerate() {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for &t in row {
                denom += (t - mx).exp();
            }
            for (j, &t) in row.iter().enumerate() {
                resp[i * m + j] = (t - mx).exp() / denom;
            }
        }

        // M-step. Active component order matches the evaluator's:
        // Clayton, Frank, Gumbel, t, then Gaussians.
        let mut slot = 0;
        let col = |resp: &[f64], j: usize| -> Vec<f64> {
            (0..n).map(|i| resp[i * m + j]).collect()
        };

        let mut new_model = model.clone();
        if structure.clayton {
            let r = col(&resp, slot);
            new_model.w_clayton = mean(&r);
            new_model.alpha_clayton = scalar_m_step(
                &evaluator,
                &model,
                &r,
                ScalarParam::ClaytonAlpha,
                1e-4,
                ALPHA_MAX,
                options.scalar_search_iters,
            );
            slot += 1;
        }
        if structure.frank {
            let r = col(&resp, slot);
            new_model.w_frank = mean(&r);
            new_model.alpha_frank = scalar_m_step(
                &evaluator,
                &model,
                &r,
                ScalarParam::FrankAlpha,
                1e-4,
                ALPHA_MAX,
                options.scalar_search_iters,
            );
            slot += 1;
        }
        if structure.gumbel {
            let r = col(&resp, slot);
            new_model.w_gumbel = mean(&r);
            new_model.alpha_gumbel = scalar_m_step(
                &evaluator,
                &model,
                &r,
                ScalarParam::GumbelAlpha,
                1.0 + 1e-9,
                ALPHA_MAX,
                options.scalar_search_iters,
            );
            slot += 1;
        }
        if structure.student_t {
            let r = col(&resp, slot);
            new_model.w_t = mean(&r);
            // correlation from weighted normal scores, then profile nu
            let theta_candidate =
                project_to_angles(&weighted_scores_correlation(&z, n, p, Some(&r)));
            let old_q = weighted_component_ll(&evaluator, &model, ScalarParam::TDof, &r, None);
            let mut cand = model.clone();
            cand.theta_t = theta_candidate.clone();
            let new_q = weighted_component_ll(&evaluator, &cand, ScalarParam::TDof, &r, None);
            if new_q >= old_q {
                new_model.theta_t = theta_candidate;
            }
            let base = new_model.clone();
            new_model.nu = scalar_m_step(
                &evaluator,
                &base,
                &r,
                ScalarParam::TDof,
                0.3,
                NU_MAX,
                options.scalar_search_iters,
            );
            slot += 1;
        }
        for j in 0..structure.normals {
            let r = col(&resp, slot);
            new_model.normal_weights[j] = mean(&r);
            let theta_candidate =
                project_to_angles(&weighted_scores_correlation(&z, n, p, Some(&r)));
            let old_q =
                weighted_component_ll(&evaluator, &model, ScalarParam::Normal(j), &r, None);
            let mut cand = model.clone();
            cand.theta_normals[j] = theta_candidate.clone();
            let new_q =
                weighted_component_ll(&evaluator, &cand, ScalarParam::Normal(j), &r, None);
            if new_q >= old_q {
                new_model.theta_normals[j] = theta_candidate;
            }
            slot += 1;
        }

        let new_loglik = evaluator.log_likelihood(&new_model);
        if new_loglik.is_finite() {
            model = new_model;
            loglik = new_loglik;
        }
        trace.push(loglik);

        if options.snapshots.contains(&iter) {
            snapshots.push(EmSnapshot {
                iteration: iter,
                model: model.clone(),
                loglik,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
    }

    let df = model.degrees_of_freedom(PROPORTION_THRESHOLD);
    let report = FitReport {
        loglik,
        df,
        aicc: aicc(loglik, df, n)?,
        iterations: options.max_iter,
        wall_time: start.elapsed().as_secs_f64(),
        converged: true,
        kkt_residual: f64::NAN,
        angle_cap_hit: model.hits_angle_cap(),
    };
    Ok(EmRun {
        model,
        report,
        snapshots,
        loglik_trace: trace,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Clone, Copy, PartialEq)]
enum ScalarParam {
    ClaytonAlpha,
    FrankAlpha,
    GumbelAlpha,
    TDof,
    Normal(usize),
}

/// Responsibility-weighted log-likelihood of one component, optionally
/// with its scalar parameter overridden.
fn weighted_component_ll(
    evaluator: &MixtureEvaluator<'_>,
    model: &CfgtnModel,
    which: ScalarParam,
    resp: &[f64],
    value: Option<f64>,
) -> f64 {
    // single-component model carrying just the targeted component
    let mut single = CfgtnModel::equal_weights(
        crate::mixture::MixtureStructure {
            clayton: false,
            frank: false,
            gumbel: false,
            student_t: false,
            normals: 0,
        },
        model.dimension,
    );
    match which {
        ScalarParam::ClaytonAlpha => {
            single.w_clayton = 1.0;
            single.alpha_clayton = value.unwrap_or(model.alpha_clayton);
        }
        ScalarParam::FrankAlpha => {
            single.w_frank = 1.0;
            single.alpha_frank = value.unwrap_or(model.alpha_frank);
        }
        ScalarParam::GumbelAlpha => {
            single.w_gumbel = 1.0;
            single.alpha_gumbel = value.unwrap_or(model.alpha_gumbel);
        }
        ScalarParam::TDof => {
            single.w_t = 1.0;
            single.nu = value.unwrap_or(model.nu);
            single.theta_t = model.theta_t.clone();
        }
        ScalarParam::Normal(j) => {
            single.normal_weights = vec![1.0];
            single.theta_normals = vec![model.theta_normals[j].clone()];
        }
    }
    match evaluator.log_density_rows(&single) {
        Ok(rows) => rows.iter().zip(resp).map(|(ld, &r)| r * ld).sum(),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Bounded search for a component's scalar parameter, guarded so the
/// weighted objective never decreases (inner-maximization failures keep
/// the previous value).
#[allow(clippy::too_many_arguments)]
fn scalar_m_step(
    evaluator: &MixtureEvaluator<'_>,
    model: &CfgtnModel,
    resp: &[f64],
    which: ScalarParam,
    lo: f64,
    hi: f64,
    iters: usize,
) -> f64 {
    let old_value = match which {
        ScalarParam::ClaytonAlpha => model.alpha_clayton,
        ScalarParam::FrankAlpha => model.alpha_frank,
        ScalarParam::GumbelAlpha => model.alpha_gumbel,
        ScalarParam::TDof => model.nu,
        ScalarParam::Normal(_) => unreachable!("normals have no scalar parameter"),
    };
    let objective =
        |v: f64| -weighted_component_ll(evaluator, model, which, resp, Some(v));
    let (candidate, f_candidate) = brent_minimize(objective, lo, hi, 1e-7, iters);
    let f_old = objective(old_value);
    if f_candidate.is_finite() && f_candidate <= f_old {
        candidate
    } else {
        old_value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Family;
    use crate::mixture::MixtureStructure;
    use crate::sampling::{sample_archimedean, sample_mixture, Dependence, ScenarioComponent, ScenarioSpec};

    #[test]
    fn single_component_em_reproduces_mle() {
        let sample = sample_archimedean(1500, 2, Family::Clayton, 3.0, 31).unwrap();
        let mut m0 = CfgtnModel::equal_weights(MixtureStructure::single_clayton(), 2);
        m0.alpha_clayton = 1.0;
        let (em_model, _) = em_fit(&sample, &m0, 1).unwrap();
        // responsibilities are all 1, so one EM iteration is the plain MLE
        let (mle_model, _) = crate::fit::fit_single_family(
            &sample,
            Family::Clayton,
            &crate::optimizer::SolverSettings::default(),
        )
        .unwrap();
        assert!(
            (em_model.alpha_clayton - mle_model.alpha_clayton).abs() < 1e-3,
            "em {} vs mle {}",
            em_model.alpha_clayton,
            mle_model.alpha_clayton
        );
    }

    #[test]
    fn em_loglik_is_monotone() {
        let spec = ScenarioSpec {
            components: vec![
                ScenarioComponent {
                    family: Family::Clayton,
                    dependence: Dependence::Param(8.0),
                    nu: None,
                    weight: 0.5,
                },
                ScenarioComponent {
                    family: Family::Gaussian,
                    dependence: Dependence::Param(0.0),
                    nu: None,
                    weight: 0.5,
                },
            ],
            dimension: 2,
            sample_size: 800,
        };
        let sample = sample_mixture(&spec, 8).unwrap();
        let structure = MixtureStructure {
            clayton: true,
            frank: false,
            gumbel: false,
            student_t: false,
            normals: 1,
        };
        let m0 = CfgtnModel::equal_weights(structure, 2);
        let run = em_fit_with_snapshots(
            &sample,
            &m0,
            &EmOptions {
                max_iter: 40,
                ..EmOptions::default()
            },
        )
        .unwrap();
        for w in run.loglik_trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8,
                "EM log-likelihood decreased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn em_recovers_well_separated_weights() {
        let spec = ScenarioSpec {
            components: vec![
                ScenarioComponent {
                    family: Family::Clayton,
                    dependence: Dependence::Param(8.0),
                    nu: None,
                    weight: 0.5,
                },
                ScenarioComponent {
                    family: Family::Gaussian,
                    dependence: Dependence::Param(0.0),
                    nu: None,
                    weight: 0.5,
                },
            ],
            dimension: 2,
            sample_size: 2000,
        };
        let sample = sample_mixture(&spec, 12).unwrap();
        let structure = MixtureStructure {
            clayton: true,
            frank: false,
            gumbel: false,
            student_t: false,
            normals: 1,
        };
        let m0 = CfgtnModel::equal_weights(structure, 2);
        let (model, _) = em_fit(&sample, &m0, 120).unwrap();
        assert!(
            (model.w_clayton - 0.5).abs() < 0.05,
            "w_clayton {}",
            model.w_clayton
        );
        assert!(
            (model.normal_weights[0] - 0.5).abs() < 0.05,
            "w_normal {}",
            model.normal_weights[0]
        );
    }
}
