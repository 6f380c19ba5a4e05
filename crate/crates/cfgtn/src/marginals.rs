//! Stage one of the two-stage estimator: mapping raw data columns to
//! pseudo-observations, either through rescaled empirical ranks or a
//! fitted location-scale t distribution.

use crate::data::PseudoSample;
use crate::error::{Error, Result};
use crate::optimizer::{bfgs_minimize, finite_difference_gradient, Objective};
use crate::special::{t_cdf, t_ln_pdf};
use crate::stats::average_ranks;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Raw ingested data, n rows by p columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl RawSample {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if n < 10 {
            return Err(Error::InvalidInput(format!(
                "need at least 10 rows, got {}",
                n
            )));
        }
        if values.len() != n * p {
            return Err(Error::InvalidInput("value count mismatch".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        Ok(Self { n, p, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.p + j]).collect()
    }
}

/// Maximum likelihood fit of a three-parameter location-scale t
/// distribution to one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TMarginalFit {
    pub location: f64,
    pub scale: f64,
    pub dof: f64,
    pub loglik: f64,
}

/// Rescaled empirical marginal transform: rank within the column divided
/// by n + 1 (ties averaged). The n + 1 divisor keeps pseudo-observations
/// off the boundary.
pub fn pseudo_observations(x: &RawSample) -> PseudoSample {
    let n = x.n;
    let p = x.p;
    let mut values = vec![0.0; n * p];
    for j in 0..p {
        let ranks = average_ranks(&x.column(j));
        for i in 0..n {
            values[i * p + j] = ranks[i] / (n as f64 + 1.0);
        }
    }
    PseudoSample::new(n, p, values).expect("ranks/(n+1) always lie inside (0,1)")
}

/// Mean log-likelihood of a location-scale t model, parameterized over
/// (location, log scale, log dof) so the search is unconstrained.
fn t_mean_loglik(x: &[f64], params: &[f64]) -> f64 {
    let loc = params[0];
    let scale = params[1].exp();
    let dof = params[2].exp();
    if !scale.is_finite() || !dof.is_finite() || dof > 1e8 {
        return f64::NEG_INFINITY;
    }
    let ln_scale = params[1];
    let mut sum = 0.0;
    for &xi in x {
        sum += t_ln_pdf((xi - loc) / scale, dof) - ln_scale;
    }
    sum / x.len() as f64
}

/// Fits the three-parameter t distribution to a column by direct
/// numerical maximization with moment initialization and a dof start of
/// 10. The fitted point is verified to be a stationary point of the mean
/// log-likelihood (finite-difference gradient below 1e-6).
pub fn fit_t_marginal(x: &[f64]) -> Result<TMarginalFit> {
    let n = x.len();
    if n < 10 {
        return Err(Error::InvalidInput(format!(
            "need at least 10 observations, got {}",
            n
        )));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var <= 0.0 || !var.is_finite() {
        return Err(Error::InvalidInput("degenerate (constant) column".into()));
    }

    let objective: Box<Objective> = Box::new(move |params: &[f64]| -t_mean_loglik(x, params));
    let start = [mean, (var.sqrt()).ln(), 10.0_f64.ln()];
    let start_value = -(*objective)(&start);
    let (params, neg_ll) = bfgs_minimize(&*objective, &start, 1e-7, 1e-8, 400)?;

    let grad = finite_difference_gradient(&*objective, &params, 1e-7)?;
    let gnorm = grad.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
    if gnorm > 1e-6 {
        return Err(Error::Convergence(format!(
            "t marginal fit stalled with gradient norm {}",
            gnorm
        )));
    }

    let loglik = -neg_ll * n as f64;
    debug_assert!(loglik >= start_value * n as f64 - 1e-9);
    Ok(TMarginalFit {
        location: params[0],
        scale: params[1].exp(),
        dof: params[2].exp(),
        loglik,
    })
}

/// Fits every column concurrently.
pub fn fit_t_marginals(x: &RawSample) -> Result<Vec<TMarginalFit>> {
    (0..x.dim())
        .into_par_iter()
        .map(|j| fit_t_marginal(&x.column(j)))
        .collect()
}

/// Probability-integral transform through a fitted t marginal,
/// epsilon-clamped into the open interval.
pub fn transform_with_t(x: &[f64], fit: &TMarginalFit) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            t_cdf((xi - fit.location) / fit.scale, fit.dof).clamp(
                crate::copula::UNIT_EPS,
                1.0 - crate::copula::UNIT_EPS,
            )
        })
        .collect()
}

/// Full parametric stage one: fit a t marginal per column and transform.
pub fn pseudo_observations_t(x: &RawSample) -> Result<(PseudoSample, Vec<TMarginalFit>)> {
    let fits = fit_t_marginals(x)?;
    let n = x.n();
    let p = x.dim();
    let mut values = vec![0.0; n * p];
    for (j, fit) in fits.iter().enumerate() {
        let col = transform_with_t(&x.column(j), fit);
        for i in 0..n {
            values[i * p + j] = col[i];
        }
    }
    Ok((PseudoSample::new(n, p, values)?, fits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::t_quantile;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    #[test]
    fn rank_transform_examples() {
        let x = RawSample::new(
            10,
            2,
            vec![
                3.1, 1.0, 1.2, 2.0, 2.5, 3.0, 4.0, 4.0, 5.0, 5.0, 6.0, 6.0, 7.0, 7.0, 8.0, 8.0,
                9.0, 9.0, 10.0, 10.0,
            ],
        )
        .unwrap();
        let u = pseudo_observations(&x);
        // first column starts (3.1, 1.2, 2.5, ...) -> ranks (3, 1, 2)
        assert_relative_eq!(u.row(0)[0], 3.0 / 11.0);
        assert_relative_eq!(u.row(1)[0], 1.0 / 11.0);
        assert_relative_eq!(u.row(2)[0], 2.0 / 11.0);
        // strictly increasing column maps to i/(n+1)
        for i in 0..10 {
            assert_relative_eq!(u.row(i)[1], (i as f64 + 1.0) / 11.0);
        }
    }

    #[test]
    fn tied_values_get_average_ranks() {
        let mut values = vec![0.0; 20];
        for i in 0..10 {
            values[i * 2] = [1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0][i];
            values[i * 2 + 1] = i as f64;
        }
        let x = RawSample::new(10, 2, values).unwrap();
        let u = pseudo_observations(&x);
        assert_relative_eq!(u.row(0)[0], 1.5 / 11.0);
        assert_relative_eq!(u.row(1)[0], 1.5 / 11.0);
        assert_relative_eq!(u.row(2)[0], 3.0 / 11.0);
    }

    #[test]
    fn rank_invariance_under_monotone_transform() {
        let raw: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let mut both = Vec::new();
        for (i, &v) in raw.iter().enumerate() {
            both.push(v);
            both.push(i as f64);
        }
        let x = RawSample::new(40, 2, both.clone()).unwrap();
        // strictly increasing transform exp(v/2) of column 0
        let mut transformed = both;
        for i in 0..40 {
            transformed[i * 2] = (transformed[i * 2] / 2.0).exp();
        }
        let xt = RawSample::new(40, 2, transformed).unwrap();
        assert_eq!(pseudo_observations(&x), pseudo_observations(&xt));
    }

    #[test]
    fn t_fit_on_normal_data_gives_large_dof() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..100_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let fit = fit_t_marginal(&x).unwrap();
        assert!(fit.dof > 50.0, "dof {}", fit.dof);
        assert!(fit.location.abs() < 0.02, "location {}", fit.location);
        assert!((fit.scale - 1.0).abs() < 0.02, "scale {}", fit.scale);
    }

    #[test]
    fn t_fit_recovers_shifted_scaled_t5() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let t5 = StudentT::new(5.0).unwrap();
        let x: Vec<f64> = (0..100_000)
            .map(|_| 1.0 + 2.0 * t5.sample(&mut rng))
            .collect();
        let fit = fit_t_marginal(&x).unwrap();
        assert!((fit.location - 1.0).abs() < 0.05, "location {}", fit.location);
        assert!((fit.scale - 2.0).abs() < 0.05, "scale {}", fit.scale);
        assert!((fit.dof - 5.0).abs() < 0.8, "dof {}", fit.dof);
    }

    #[test]
    fn constant_column_is_rejected() {
        let x = vec![2.5; 50];
        assert!(matches!(
            fit_t_marginal(&x),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn transform_maps_location_to_half() {
        let fit = TMarginalFit {
            location: 3.0,
            scale: 1.5,
            dof: 7.0,
            loglik: 0.0,
        };
        let u = transform_with_t(&[3.0], &fit);
        assert_relative_eq!(u[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn transform_inverse_forward_identity() {
        let fit = TMarginalFit {
            location: -1.0,
            scale: 0.7,
            dof: 4.0,
            loglik: 0.0,
        };
        let x = fit.location + fit.scale * t_quantile(0.9, fit.dof);
        let u = transform_with_t(&[x], &fit);
        assert_relative_eq!(u[0], 0.9, epsilon = 1e-10);
        // identity across the central range
        for i in 1..20 {
            let q = i as f64 / 20.0;
            let xi = fit.location + fit.scale * t_quantile(q, fit.dof);
            assert_relative_eq!(transform_with_t(&[xi], &fit)[0], q, epsilon = 1e-8);
        }
    }

    #[test]
    fn transform_is_monotone() {
        let fit = TMarginalFit {
            location: 0.0,
            scale: 1.0,
            dof: 3.0,
            loglik: 0.0,
        };
        let u = transform_with_t(&[-2.0, -0.5, 0.1, 4.4], &fit);
        for w in u.windows(2) {
            assert!(w[0] < w[1]);
        }
    }
}
