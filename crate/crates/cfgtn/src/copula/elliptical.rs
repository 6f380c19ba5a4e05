//! Gaussian and Student-t copula log-densities.
//!
//! Both work through the Cholesky factor of the correlation matrix; the
//! inverse is never formed explicitly.

use super::UnitPoint;
use crate::correlation::{CholeskyFactor, CorrelationMatrix};
use crate::error::{Error, Result};
use crate::special::{norm_quantile, t_quantile};
use statrs::function::gamma::ln_gamma;

fn cholesky_checked(r: &CorrelationMatrix) -> Result<CholeskyFactor> {
    r.cholesky().map_err(|_| {
        Error::SingularMatrix("correlation matrix is numerically rank-deficient".into())
    })
}

/// Gaussian copula log-density:
/// log c = -1/2 log det R - 1/2 zᵀ(R⁻¹ - I) z with z_j = Φ⁻¹(u_j).
pub fn gaussian_log_density(u: &UnitPoint, r: &CorrelationMatrix) -> Result<f64> {
    if u.dim() != r.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let chol = cholesky_checked(r)?;
    let z: Vec<f64> = u.coords().iter().map(|&v| norm_quantile(v)).collect();
    let mut buf = vec![0.0; u.dim()];
    Ok(gaussian_ln_pdf_row(&z, &chol, &mut buf))
}

/// Gaussian copula log-density from precomputed normal scores.
pub(crate) fn gaussian_ln_pdf_row(z: &[f64], chol: &CholeskyFactor, buf: &mut [f64]) -> f64 {
    chol.solve_lower(z, buf);
    let q: f64 = buf.iter().map(|&w| w * w).sum();
    let z2: f64 = z.iter().map(|&v| v * v).sum();
    -0.5 * chol.ln_det_correlation() - 0.5 * (q - z2)
}

/// Student-t copula log-density: the p-variate t density over the product
/// of univariate t densities, evaluated at t_j = T_ν⁻¹(u_j).
pub fn student_t_log_density(u: &UnitPoint, r: &CorrelationMatrix, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("degrees of freedom {} must be > 0", nu)));
    }
    if u.dim() != r.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let chol = cholesky_checked(r)?;
    let t: Vec<f64> = u.coords().iter().map(|&v| t_quantile(v, nu)).collect();
    let mut buf = vec![0.0; u.dim()];
    Ok(student_t_ln_pdf_row(&t, &chol, nu, &mut buf))
}

/// Student-t copula log-density from precomputed t scores.
pub(crate) fn student_t_ln_pdf_row(t: &[f64], chol: &CholeskyFactor, nu: f64, buf: &mut [f64]) -> f64 {
    let p = t.len() as f64;
    chol.solve_lower(t, buf);
    let q: f64 = buf.iter().map(|&w| w * w).sum();
    let gamma_head = ln_gamma(0.5 * (nu + p)) + (p - 1.0) * ln_gamma(0.5 * nu)
        - p * ln_gamma(0.5 * (nu + 1.0));
    let marginal_tail: f64 = t.iter().map(|&tj| (tj * tj / nu).ln_1p()).sum();
    gamma_head - 0.5 * chol.ln_det_correlation() - 0.5 * (nu + p) * (q / nu).ln_1p()
        + 0.5 * (nu + 1.0) * marginal_tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn up(coords: &[f64]) -> UnitPoint {
        UnitPoint::new(coords.to_vec()).unwrap()
    }

    /// Independent Φ⁻¹ for the oracle below: Acklam's rational
    /// approximation plus one Halley refinement — a different algorithm
    /// from the library's AS 241 implementation.
    fn acklam_norm_quantile(p: f64) -> f64 {
        const A: [f64; 6] = [
            -3.969683028665376e+01,
            2.209460984245205e+02,
            -2.759285104469687e+02,
            1.383577518672690e+02,
            -3.066479806614716e+01,
            2.506628277459239e+00,
        ];
        const B: [f64; 5] = [
            -5.447609879822406e+01,
            1.615858368580409e+02,
            -1.556989798598866e+02,
            6.680131188771972e+01,
            -1.328068155288572e+01,
        ];
        const C: [f64; 6] = [
            -7.784894002430293e-03,
            -3.223964580411365e-01,
            -2.400758277161838e+00,
            -2.549732539343734e+00,
            4.374664141464968e+00,
            2.938163982698783e+00,
        ];
        const D: [f64; 4] = [
            7.784695709041462e-03,
            3.224671290700398e-01,
            2.445134137142996e+00,
            3.754408661907416e+00,
        ];
        let x = if p < 0.02425 {
            let q = (-2.0 * p.ln()).sqrt();
            (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
                / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
        } else if p <= 0.97575 {
            let q = p - 0.5;
            let r = q * q;
            (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
                / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
        } else {
            let q = (-2.0 * (1.0 - p).ln()).sqrt();
            -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
                / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
        };
        // Halley refinement against the erfc-based CDF
        let e = 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2) - p;
        let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
        x - u / (1.0 + x * u / 2.0)
    }

    #[test]
    fn gaussian_identity_is_independence() {
        let r = CorrelationMatrix::identity(3);
        let got = gaussian_log_density(&up(&[0.2, 0.5, 0.9]), &r).unwrap();
        assert_relative_eq!(got, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_at_median_is_pure_determinant() {
        let r = CorrelationMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let got = gaussian_log_density(&up(&[0.5, 0.5]), &r).unwrap();
        assert_relative_eq!(got, -0.5 * 0.75_f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(got, 0.14384, epsilon = 1e-5);
    }

    #[test]
    fn gaussian_matches_direct_bivariate_ratio() {
        // log c = -1/2 ln(1-r^2) - [r^2 (z1^2+z2^2) - 2 r z1 z2] / (2 (1-r^2))
        let rho: f64 = 0.7;
        let z1 = acklam_norm_quantile(0.9);
        let z2 = acklam_norm_quantile(0.9);
        let expected = -0.5 * (1.0 - rho * rho).ln()
            - (rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2)
                / (2.0 * (1.0 - rho * rho));
        let r = CorrelationMatrix::new(2, vec![1.0, rho, rho, 1.0]).unwrap();
        let got = gaussian_log_density(&up(&[0.9, 0.9]), &r).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-10);
    }

    #[test]
    fn gaussian_rejects_rank_deficient() {
        let r = CorrelationMatrix::new(2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            gaussian_log_density(&up(&[0.4, 0.6]), &r),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn student_t_origin_is_gamma_ratio() {
        // at u = (0.5, 0.5) the scores vanish and only the gamma constant
        // remains: Γ((ν+p)/2) Γ(ν/2)^{p-1} / Γ((ν+1)/2)^p
        let r = CorrelationMatrix::identity(2);
        let got = student_t_log_density(&up(&[0.5, 0.5]), &r, 5.0).unwrap();
        let expected = ln_gamma(3.5) + ln_gamma(2.5) - 2.0 * ln_gamma(3.0);
        assert_relative_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn student_t_large_nu_approaches_independence_at_identity() {
        let r = CorrelationMatrix::identity(2);
        for pt in [[0.3, 0.7], [0.1, 0.9], [0.45, 0.52]] {
            let got = student_t_log_density(&up(&pt), &r, 1e6).unwrap();
            assert!(got.exp() > 1.0 - 1e-3 && got.exp() < 1.0 + 1e-3);
        }
    }

    #[test]
    fn student_t_rejects_bad_nu() {
        let r = CorrelationMatrix::identity(2);
        assert!(student_t_log_density(&up(&[0.4, 0.6]), &r, 0.0).is_err());
        assert!(student_t_log_density(&up(&[0.4, 0.6]), &r, -3.0).is_err());
    }

    #[test]
    fn elliptical_symmetry_about_center() {
        // elliptical copulas are radially symmetric: c(u) = c(1-u)
        let r = CorrelationMatrix::new(2, vec![1.0, 0.6, 0.6, 1.0]).unwrap();
        let a = student_t_log_density(&up(&[0.2, 0.35]), &r, 5.0).unwrap();
        let b = student_t_log_density(&up(&[0.8, 0.65]), &r, 5.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9);
        let ga = gaussian_log_density(&up(&[0.2, 0.35]), &r).unwrap();
        let gb = gaussian_log_density(&up(&[0.8, 0.65]), &r).unwrap();
        assert_relative_eq!(ga, gb, max_relative = 1e-9);
    }
}
