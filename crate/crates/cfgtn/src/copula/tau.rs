//! Kendall's tau <-> parameter maps for scenario configuration.

use crate::error::{Error, Result};
use crate::special::debye1;
use serde::{Deserialize, Serialize};

/// The five component families of the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Clayton,
    Frank,
    Gumbel,
    #[serde(rename = "t")]
    StudentT,
    Gaussian,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Family::Clayton => "clayton",
            Family::Frank => "frank",
            Family::Gumbel => "gumbel",
            Family::StudentT => "t",
            Family::Gaussian => "gaussian",
        };
        write!(f, "{}", name)
    }
}

/// Population Kendall's tau of a family at a given dependence parameter
/// (the scalar alpha for Archimedean families, the pairwise correlation
/// for elliptical ones).
pub fn tau_from_param(family: Family, param: f64) -> f64 {
    match family {
        Family::Clayton => param / (param + 2.0),
        Family::Gumbel => 1.0 - 1.0 / param,
        Family::Frank => 1.0 - 4.0 / param * (1.0 - debye1(param)),
        Family::StudentT | Family::Gaussian => {
            2.0 / std::f64::consts::PI * param.asin()
        }
    }
}

/// Inverts the tau map: Clayton a = 2τ/(1-τ); Gumbel a = 1/(1-τ);
/// elliptical ρ = sin(πτ/2); Frank solved numerically from the Debye
/// relation τ(a) = 1 - (4/a)(1 - D₁(a)).
pub fn kendall_tau_to_param(family: Family, tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau {} outside (0,1)", tau)));
    }
    match family {
        Family::Clayton => Ok(2.0 * tau / (1.0 - tau)),
        Family::Gumbel => Ok(1.0 / (1.0 - tau)),
        Family::StudentT | Family::Gaussian => {
            Ok((std::f64::consts::FRAC_PI_2 * tau).sin())
        }
        Family::Frank => invert_frank_tau(tau),
    }
}

fn invert_frank_tau(tau: f64) -> Result<f64> {
    // tau(a) is strictly increasing on (0, inf); bracket then bisect.
    let mut lo = 1e-8;
    let mut hi = 1.0;
    while tau_from_param(Family::Frank, hi) < tau {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Convergence(format!(
                "Frank tau {} not bracketed below alpha 1e6",
                tau
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tau_from_param(Family::Frank, mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
