//! Log-density evaluation for the five copula families of the mixture:
//! Clayton, Frank, Gumbel, Student-t, and Gaussian, plus the Kendall-tau
//! parameter maps used to configure simulation scenarios.
//!
//! All densities are computed and accumulated in log space so that high
//! dependence levels stay inside floating-point range.

mod archimedean;
mod elliptical;
mod tau;

pub use archimedean::{
    clayton_log_density, frank_log_density, frank_psi_abs_coeffs, gumbel_coeff_ln,
    gumbel_log_density,
};
pub(crate) use archimedean::{clayton_ln_pdf_row, frank_ln_pdf_row, gumbel_ln_pdf_row};
pub use elliptical::{gaussian_log_density, student_t_log_density};
pub(crate) use elliptical::{gaussian_ln_pdf_row, student_t_ln_pdf_row};
pub use tau::{kendall_tau_to_param, tau_from_param, Family};

use crate::error::{Error, Result};

/// Coordinates are clamped to [EPS, 1-EPS] before evaluation; several
/// families diverge on the boundary and pseudo-observations never reach it.
pub const UNIT_EPS: f64 = 1e-10;

/// A point strictly inside the unit hypercube (0,1)^p with p >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPoint {
    coords: Vec<f64>,
}

impl UnitPoint {
    /// Validates openness of every coordinate and clamps to
    /// [`UNIT_EPS`, 1 - `UNIT_EPS`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidInput(
                "a unit point needs at least 2 coordinates".into(),
            ));
        }
        let mut clamped = coords;
        for u in &mut clamped {
            if !(*u > 0.0 && *u < 1.0) {
                return Err(Error::Domain(format!("coordinate {} outside (0,1)", u)));
            }
            *u = u.clamp(UNIT_EPS, 1.0 - UNIT_EPS);
        }
        Ok(Self { coords: clamped })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

impl std::ops::Index<usize> for UnitPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

/// log(sum of exp(terms)) guarded against empty input and -inf terms.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&t| (t - m).exp()).sum();
    m + sum.ln()
}
