//! Exact random generation from each copula family and from mixtures.
//!
//! Archimedean families use the Marshall-Olkin frailty construction
//! U_j = psi(E_j / V) with i.i.d. unit exponentials E_j and the family's
//! frailty V: Gamma(1/a) for Clayton, positive a-stable with index 1/a for
//! Gumbel (Chambers-Mallows-Stuck), and a logarithmic-series variate for
//! Frank. Elliptical families map correlated normal (or t) scores through
//! their univariate CDFs.

use crate::copula::{kendall_tau_to_param, Family};
use crate::correlation::{angles_to_cholesky, correlation_to_angles, CorrelationMatrix};
use crate::data::PseudoSample;
use crate::error::{Error, Result};
use crate::special::{norm_cdf, t_cdf};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// Streams reserved inside one mixture draw: component j uses stream j,
/// the label sequence uses this one.
const LABEL_STREAM: u64 = u64::MAX;

/// Derives an independent substream seed for replication `index`.
/// SplitMix64 over seed + index * golden-ratio increment; the counter-based
/// form keeps parallel replication order irrelevant.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// How a scenario component's dependence level is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dependence {
    /// Kendall's tau, converted through the family's analytic map.
    Tau(f64),
    /// The family parameter directly: alpha for Archimedean components,
    /// the common pairwise correlation for elliptical ones.
    Param(f64),
}

/// One mixture component of a simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioComponent {
    pub family: Family,
    pub dependence: Dependence,
    /// Degrees of freedom, Student-t only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub nu: Option<f64>,
    pub weight: f64,
}

impl ScenarioComponent {
    /// The scalar family parameter implied by the dependence field.
    pub fn param(&self) -> Result<f64> {
        match self.dependence {
            Dependence::Param(v) => Ok(v),
            Dependence::Tau(tau) => kendall_tau_to_param(self.family, tau),
        }
    }

    /// Exchangeable correlation matrix for elliptical components.
    pub fn correlation(&self, p: usize) -> Result<CorrelationMatrix> {
        CorrelationMatrix::exchangeable(p, self.param()?)
    }
}

/// A full simulation scenario: mixture components, dimension, and sample
/// size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub components: Vec<ScenarioComponent>,
    pub dimension: usize,
    pub sample_size: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidInput("dimension must be at least 2".into()));
        }
        if self.components.is_empty() {
            return Err(Error::InvalidInput("scenario needs components".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {}, expected 1",
                total
            )));
        }
        for c in &self.components {
            if c.weight < 0.0 {
                return Err(Error::InvalidInput("negative weight".into()));
            }
            if let Dependence::Tau(tau) = c.dependence {
                if !(tau > 0.0 && tau < 1.0) {
                    return Err(Error::Domain(format!("tau {} outside (0,1)", tau)));
                }
            }
            if c.family == Family::StudentT && c.nu.is_none() {
                return Err(Error::InvalidInput(
                    "t component needs degrees of freedom".into(),
                ));
            }
        }
        Ok(())
    }

    /// True mixture log-density of the scenario at a point; used to score
    /// estimates against ground truth.
    pub fn log_density(&self, u: &crate::copula::UnitPoint) -> Result<f64> {
        use crate::copula as cop;
        let mut terms = Vec::with_capacity(self.components.len());
        for c in &self.components {
            if c.weight == 0.0 {
                continue;
            }
            let ld = match c.family {
                Family::Clayton => cop::clayton_log_density(u, c.param()?)?,
                Family::Frank => cop::frank_log_density(u, c.param()?)?,
                Family::Gumbel => cop::gumbel_log_density(u, c.param()?)?,
                Family::Gaussian => {
                    cop::gaussian_log_density(u, &c.correlation(self.dimension)?)?
                }
                Family::StudentT => cop::student_t_log_density(
                    u,
                    &c.correlation(self.dimension)?,
                    c.nu.expect("validated"),
                )?,
            };
            terms.push(c.weight.ln() + ld);
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln())
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws n rows from an Archimedean copula in dimension p.
pub fn sample_archimedean(
    n: usize,
    p: usize,
    family: Family,
    alpha: f64,
    seed: u64,
) -> Result<PseudoSample> {
    let mut rng = rng_for(seed, 0);
    let mut values = Vec::with_capacity(n * p);
    let mut draw = archimedean_row_sampler(family, alpha, p)?;
    for _ in 0..n {
        draw(&mut rng, &mut values);
    }
    PseudoSample::new(n, p, values)
}

/// Row sampler closure shared by the single-family and mixture entry
/// points so a degenerate mixture reproduces the component stream.
fn archimedean_row_sampler(
    family: Family,
    alpha: f64,
    p: usize,
) -> Result<Box<dyn FnMut(&mut ChaCha12Rng, &mut Vec<f64>)>> {
    match family {
        Family::Clayton => {
            if !(alpha > 0.0) {
                return Err(Error::Domain(format!(
                    "Clayton alpha {} must be > 0",
                    alpha
                )));
            }
            let gamma = Gamma::new(1.0 / alpha, 1.0)
                .map_err(|e| Error::Domain(format!("gamma frailty: {}", e)))?;
            Ok(Box::new(move |rng, out| {
                let v: f64 = gamma.sample(rng);
                for _ in 0..p {
                    let e: f64 = Exp1.sample(rng);
                    // psi(t) = (1+t)^{-1/alpha}
                    let u = (-(e / v).ln_1p() / alpha).exp();
                    out.push(clamp_unit(u));
                }
            }))
        }
        Family::Gumbel => {
            if !(alpha >= 1.0) {
                return Err(Error::Domain(format!(
                    "Gumbel alpha {} must be >= 1",
                    alpha
                )));
            }
            let a = 1.0 / alpha;
            Ok(Box::new(move |rng, out| {
                // positive a-stable frailty by Chambers-Mallows-Stuck;
                // V degenerates to 1 at alpha = 1
                let v = if alpha == 1.0 {
                    1.0
                } else {
                    let theta: f64 = rng.random::<f64>() * std::f64::consts::PI;
                    let w: f64 = Exp1.sample(rng);
                    let num = ((1.0 - a) * theta).sin();
                    (num / w).powf((1.0 - a) / a) * (a * theta).sin()
                        / theta.sin().powf(1.0 / a)
                };
                for _ in 0..p {
                    let e: f64 = Exp1.sample(rng);
                    // psi(t) = exp(-t^{1/alpha})
                    let u = (-(e / v).powf(a)).exp();
                    out.push(clamp_unit(u));
                }
            }))
        }
        Family::Frank => {
            if !(alpha > 0.0) {
                return Err(Error::Domain(format!("Frank alpha {} must be > 0", alpha)));
            }
            let ps = -(-alpha).exp_m1(); // 1 - e^{-alpha}
            Ok(Box::new(move |rng, out| {
                let v = sample_log_series(ps, -alpha, rng);
                for _ in 0..p {
                    let e: f64 = Exp1.sample(rng);
                    // psi(t) = -ln(1 - ps e^{-t}) / alpha
                    let u = -(-ps * (-e / v).exp()).ln_1p() / alpha;
                    out.push(clamp_unit(u));
                }
            }))
        }
        _ => Err(Error::InvalidInput(format!(
            "{} is not an Archimedean family",
            family
        ))),
    }
}

/// Logarithmic-series variate with parameter `ps`; `ln_1m_ps` = ln(1-ps)
/// is passed exactly to avoid cancellation for ps near 1.
///
/// Small means use sequential inversion search on the P(k+1)/P(k)
/// recurrence; the heavy-tailed regime switches to the exact mixture
/// representation V | W ~ Geometric(1-W) with W = 1-(1-ps)^U, which is
/// rejection-free and O(1).
fn sample_log_series<R: Rng + ?Sized>(ps: f64, ln_1m_ps: f64, rng: &mut R) -> f64 {
    let mean = -ps / ((1.0 - ps) * ln_1m_ps);
    if mean <= 8.0 {
        let mut u: f64 = rng.random();
        let mut k = 1.0;
        let mut pk = -ps / ln_1m_ps;
        loop {
            if u <= pk || k >= 1e6 {
                return k;
            }
            u -= pk;
            pk *= ps * k / (k + 1.0);
            k += 1.0;
        }
    }
    let v: f64 = rng.random();
    let ln_w = (-(v * ln_1m_ps).exp_m1()).ln();
    let u: f64 = rng.random();
    let x = (1.0 + u.ln() / ln_w).floor();
    x.clamp(1.0, 1e18)
}

fn clamp_unit(u: f64) -> f64 {
    u.clamp(crate::copula::UNIT_EPS, 1.0 - crate::copula::UNIT_EPS)
}

/// Draws n rows from a Gaussian (nu = None) or Student-t copula.
pub fn sample_elliptical(
    n: usize,
    p: usize,
    r: &CorrelationMatrix,
    nu: Option<f64>,
    seed: u64,
) -> Result<PseudoSample> {
    let mut rng = rng_for(seed, 0);
    let mut values = Vec::with_capacity(n * p);
    let mut draw = elliptical_row_sampler(r, nu, p)?;
    for _ in 0..n {
        draw(&mut rng, &mut values);
    }
    PseudoSample::new(n, p, values)
}

fn elliptical_row_sampler(
    r: &CorrelationMatrix,
    nu: Option<f64>,
    p: usize,
) -> Result<Box<dyn FnMut(&mut ChaCha12Rng, &mut Vec<f64>)>> {
    if r.dim() != p {
        return Err(Error::InvalidInput("correlation dimension mismatch".into()));
    }
    if let Some(v) = nu {
        if !(v > 0.0) {
            return Err(Error::Domain(format!(
                "degrees of freedom {} must be > 0",
                v
            )));
        }
    }
    // validates positive definiteness up front
    let chol = angles_to_cholesky(&correlation_to_angles(r)?);
    let chi = nu
        .map(|v| ChiSquared::new(v).map_err(|e| Error::Domain(format!("chi-squared: {}", e))))
        .transpose()?;
    Ok(Box::new(move |rng, out| {
        let g: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let start = out.len();
        for i in 0..p {
            let mut z = 0.0;
            for k in 0..=i {
                z += chol.get(i, k) * g[k];
            }
            out.push(z);
        }
        match (&chi, nu) {
            (Some(chi), Some(v)) => {
                let w: f64 = chi.sample(rng);
                let scale = (v / w).sqrt();
                for z in &mut out[start..] {
                    *z = clamp_unit(t_cdf(*z * scale, v));
                }
            }
            _ => {
                for z in &mut out[start..] {
                    *z = clamp_unit(norm_cdf(*z));
                }
            }
        }
    }))
}

/// Draws a sample from a mixture scenario; labels come from a reserved
/// stream and component j consumes stream j, so a single-component spec
/// reproduces the component sampler's output bit for bit.
pub fn sample_mixture(spec: &ScenarioSpec, seed: u64) -> Result<PseudoSample> {
    sample_mixture_with_labels(spec, seed).map(|(s, _)| s)
}

/// As [`sample_mixture`], also returning the component label of each row.
pub fn sample_mixture_with_labels(
    spec: &ScenarioSpec,
    seed: u64,
) -> Result<(PseudoSample, Vec<usize>)> {
    spec.validate()?;
    let n = spec.sample_size;
    let p = spec.dimension;
    let m = spec.components.len();

    let mut label_rng = rng_for(seed, LABEL_STREAM);
    let labels: Vec<usize> = if m == 1 {
        vec![0; n]
    } else {
        let cumulative: Vec<f64> = spec
            .components
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c.weight;
                Some(*acc)
            })
            .collect();
        (0..n)
            .map(|_| {
                let x: f64 = label_rng.random();
                cumulative.iter().position(|&c| x < c).unwrap_or(m - 1)
            })
            .collect()
    };

    // Draw each component's rows from its own stream, then place them by
    // label order.
    let mut per_component: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (j, comp) in spec.components.iter().enumerate() {
        let count = labels.iter().filter(|&&l| l == j).count();
        let mut rng = rng_for(seed, j as u64);
        let mut vals = Vec::with_capacity(count * p);
        match comp.family {
            Family::Clayton | Family::Frank | Family::Gumbel => {
                let mut draw = archimedean_row_sampler(comp.family, comp.param()?, p)?;
                for _ in 0..count {
                    draw(&mut rng, &mut vals);
                }
            }
            Family::Gaussian | Family::StudentT => {
                let r = comp.correlation(p)?;
                let nu = if comp.family == Family::StudentT {
                    comp.nu
                } else {
                    None
                };
                let mut draw = elliptical_row_sampler(&r, nu, p)?;
                for _ in 0..count {
                    draw(&mut rng, &mut vals);
                }
            }
        }
        per_component.push(vals);
    }

    let mut offsets = vec![0usize; m];
    let mut values = Vec::with_capacity(n * p);
    for &l in &labels {
        let off = offsets[l];
        values.extend_from_slice(&per_component[l][off..off + p]);
        offsets[l] = off + p;
    }
    Ok((PseudoSample::new(n, p, values)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{kendall_tau, ks_critical_value, ks_uniform_statistic};
    use approx::assert_relative_eq;

    const N: usize = 100_000;

    fn pairwise_tau(s: &PseudoSample, a: usize, b: usize) -> f64 {
        kendall_tau(&s.column(a), &s.column(b))
    }

    #[test]
    fn clayton_tau_calibration() {
        let s = sample_archimedean(N, 2, Family::Clayton, 0.5, 42).unwrap();
        // analytic tau = alpha / (alpha + 2) = 0.2
        assert_relative_eq!(pairwise_tau(&s, 0, 1), 0.2, epsilon = 0.02);
    }

    #[test]
    fn gumbel_alpha_one_is_independent() {
        let s = sample_archimedean(N, 3, Family::Gumbel, 1.0, 7).unwrap();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert!(pairwise_tau(&s, a, b).abs() < 0.02);
        }
    }

    #[test]
    fn frank_tau_calibration_three_dims() {
        let alpha = kendall_tau_to_param(Family::Frank, 0.4).unwrap();
        let s = sample_archimedean(N, 3, Family::Frank, alpha, 11).unwrap();
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert_relative_eq!(pairwise_tau(&s, a, b), 0.4, epsilon = 0.02);
        }
    }

    #[test]
    fn frank_high_alpha_stays_calibrated() {
        let alpha = kendall_tau_to_param(Family::Frank, 0.8).unwrap();
        let s = sample_archimedean(30_000, 2, Family::Frank, alpha, 13).unwrap();
        assert_relative_eq!(pairwise_tau(&s, 0, 1), 0.8, epsilon = 0.025);
    }

    #[test]
    fn elliptical_identity_is_independent() {
        let r = CorrelationMatrix::identity(2);
        let s = sample_elliptical(N, 2, &r, None, 3).unwrap();
        assert!(pairwise_tau(&s, 0, 1).abs() < 0.02);
    }

    #[test]
    fn gaussian_tau_calibration() {
        let rho = (std::f64::consts::FRAC_PI_2 * 0.4).sin();
        let r = CorrelationMatrix::exchangeable(2, rho).unwrap();
        let s = sample_elliptical(N, 2, &r, None, 5).unwrap();
        assert_relative_eq!(pairwise_tau(&s, 0, 1), 0.4, epsilon = 0.02);
    }

    #[test]
    fn student_t_tau_is_nu_free() {
        let rho = (std::f64::consts::FRAC_PI_2 * 0.4).sin();
        let r = CorrelationMatrix::exchangeable(2, rho).unwrap();
        let s = sample_elliptical(N, 2, &r, Some(5.0), 9).unwrap();
        assert_relative_eq!(pairwise_tau(&s, 0, 1), 0.4, epsilon = 0.02);
    }

    #[test]
    fn marginals_are_uniform() {
        let rho = (std::f64::consts::FRAC_PI_2 * 0.6).sin();
        let r = CorrelationMatrix::exchangeable(2, rho).unwrap();
        let crit = ks_critical_value(0.001, N);
        for (name, s) in [
            (
                "clayton",
                sample_archimedean(N, 2, Family::Clayton, 3.0, 21).unwrap(),
            ),
            (
                "frank",
                sample_archimedean(N, 2, Family::Frank, 5.0, 22).unwrap(),
            ),
            (
                "gumbel",
                sample_archimedean(N, 2, Family::Gumbel, 2.0, 23).unwrap(),
            ),
            ("t", sample_elliptical(N, 2, &r, Some(5.0), 24).unwrap()),
            ("gaussian", sample_elliptical(N, 2, &r, None, 25).unwrap()),
        ] {
            for j in 0..2 {
                let d = ks_uniform_statistic(&s.column(j));
                assert!(d < crit, "{} column {} KS {} over {}", name, j, d, crit);
            }
        }
    }

    fn table1_spec(n: usize) -> ScenarioSpec {
        ScenarioSpec {
            components: vec![
                ScenarioComponent {
                    family: Family::Clayton,
                    dependence: Dependence::Param(3.0),
                    nu: None,
                    weight: 0.40,
                },
                ScenarioComponent {
                    family: Family::Gumbel,
                    dependence: Dependence::Param(10.0),
                    nu: None,
                    weight: 0.25,
                },
                ScenarioComponent {
                    family: Family::Gaussian,
                    dependence: Dependence::Param(0.5),
                    nu: None,
                    weight: 0.35,
                },
            ],
            dimension: 2,
            sample_size: n,
        }
    }

    #[test]
    fn mixture_component_counts_follow_weights() {
        let spec = table1_spec(1000);
        let (_, labels) = sample_mixture_with_labels(&spec, 42).unwrap();
        let counts: Vec<usize> = (0..3)
            .map(|j| labels.iter().filter(|&&l| l == j).count())
            .collect();
        for (count, w) in counts.iter().zip([0.40, 0.25, 0.35]) {
            let sd = (1000.0 * w * (1.0 - w)).sqrt();
            assert!(
                (*count as f64 - 1000.0 * w).abs() < 3.0 * sd,
                "count {} vs expected {}",
                count,
                1000.0 * w
            );
        }
    }

    #[test]
    fn degenerate_mixture_matches_component_stream() {
        let spec = ScenarioSpec {
            components: vec![ScenarioComponent {
                family: Family::Clayton,
                dependence: Dependence::Param(2.0),
                nu: None,
                weight: 1.0,
            }],
            dimension: 3,
            sample_size: 50,
        };
        let direct = sample_archimedean(50, 3, Family::Clayton, 2.0, 77).unwrap();
        let via_mixture = sample_mixture(&spec, 77).unwrap();
        assert_eq!(direct, via_mixture);
    }

    #[test]
    fn equal_tau_mixture_keeps_tau() {
        let spec = ScenarioSpec {
            components: vec![
                ScenarioComponent {
                    family: Family::Clayton,
                    dependence: Dependence::Tau(0.2),
                    nu: None,
                    weight: 0.5,
                },
                ScenarioComponent {
                    family: Family::Frank,
                    dependence: Dependence::Tau(0.2),
                    nu: None,
                    weight: 0.5,
                },
            ],
            dimension: 2,
            sample_size: N,
        };
        let s = sample_mixture(&spec, 19).unwrap();
        assert_relative_eq!(pairwise_tau(&s, 0, 1), 0.2, epsilon = 0.02);
    }

    #[test]
    fn same_seed_same_stream() {
        let spec = table1_spec(200);
        let a = sample_mixture(&spec, 4).unwrap();
        let b = sample_mixture(&spec, 4).unwrap();
        assert_eq!(a, b);
        let c = sample_mixture(&spec, 5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(sample_archimedean(10, 2, Family::Clayton, -1.0, 0).is_err());
        assert!(sample_archimedean(10, 2, Family::Gumbel, 0.5, 0).is_err());
        assert!(sample_archimedean(10, 2, Family::Gaussian, 1.0, 0).is_err());
        let bad = CorrelationMatrix::new(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(sample_elliptical(10, 2, &bad, None, 0).is_err());
    }
}
