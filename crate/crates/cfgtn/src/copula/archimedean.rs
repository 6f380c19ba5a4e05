//! Clayton, Frank, and Gumbel copula log-densities in dimension p >= 2.
//!
//! Each density is the p-th mixed partial of the Archimedean form
//! C(u) = psi(sum_j phi(u_j)); the generator derivatives are evaluated
//! through exact coefficient recursions so page-long symbolic derivatives
//! are unnecessary and evaluation stays in log space.

use super::{log_sum_exp, UnitPoint};
use crate::error::{Error, Result};

fn check_interior(u: &UnitPoint) -> Result<()> {
    // UnitPoint construction already clamps; only the dimension matters here.
    if u.dim() < 2 {
        return Err(Error::InvalidInput("dimension must be at least 2".into()));
    }
    Ok(())
}

/// Clayton copula log-density.
///
/// log c = sum_{k=1}^{p-1} log(k a + 1) - (a+1) sum_j log u_j
///         - (p + 1/a) log(sum_j u_j^{-a} - p + 1).
pub fn clayton_log_density(u: &UnitPoint, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("Clayton alpha {} must be > 0", alpha)));
    }
    check_interior(u)?;
    let ln_u: Vec<f64> = u.coords().iter().map(|&v| v.ln()).collect();
    Ok(clayton_ln_pdf_row(&ln_u, alpha))
}

/// Clayton log-density from precomputed log-coordinates.
pub(crate) fn clayton_ln_pdf_row(ln_u: &[f64], alpha: f64) -> f64 {
    let p = ln_u.len();
    let mut head = 0.0;
    for k in 1..p {
        head += (k as f64 * alpha + 1.0).ln();
    }
    let sum_ln: f64 = ln_u.iter().sum();
    // log(sum_j exp(-a ln u_j) - (p-1)) computed against the max exponent
    let mut m = f64::NEG_INFINITY;
    for &l in ln_u {
        m = m.max(-alpha * l);
    }
    let mut s = 0.0;
    for &l in ln_u {
        s += (-alpha * l - m).exp();
    }
    s -= (p as f64 - 1.0) * (-m).exp();
    let log_core = m + s.ln();
    head - (alpha + 1.0) * sum_ln - (p as f64 + 1.0 / alpha) * log_core
}

/// Absolute coefficients |c_k| of psi^{(p)}(t) = -(1/a) sum_k c_k x^k for
/// the Frank generator inverse, with x = y/(1-y) and y = (1-e^{-a}) e^{-t}.
/// Differentiating term-by-term gives the integer recursion
/// |c_k| <- k |c_k| + (k-1) |c_{k-1}|; signs alternate with the order and
/// factor out of the log-space sum.
pub fn frank_psi_abs_coeffs(p: usize) -> Vec<f64> {
    let mut c = vec![1.0_f64]; // psi' has the single term x
    for _ in 1..p {
        let mut next = vec![0.0; c.len() + 1];
        for (k0, &ck) in c.iter().enumerate() {
            let k = (k0 + 1) as f64;
            next[k0] += k * ck;
            next[k0 + 1] += k * ck;
        }
        c = next;
    }
    c
}

/// Frank copula log-density for alpha > 0 (complete monotonicity holds for
/// every p >= 2 on this range).
pub fn frank_log_density(u: &UnitPoint, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("Frank alpha {} must be > 0", alpha)));
    }
    check_interior(u)?;
    let coeffs = frank_psi_abs_coeffs(u.dim());
    Ok(frank_ln_pdf_row(u.coords(), alpha, &coeffs))
}

/// Frank log-density from raw coordinates and precomputed psi coefficients.
pub(crate) fn frank_ln_pdf_row(u: &[f64], alpha: f64, coeffs: &[f64]) -> f64 {
    let p = u.len();
    debug_assert_eq!(coeffs.len(), p);
    // log(1 - e^{-a}) and per-coordinate log(1 - e^{-a u_j})
    let ln_one_m_exp_a = (-(-alpha).exp_m1()).ln();
    let mut log_y = ln_one_m_exp_a;
    let mut sum_ln_phi_prime = 0.0;
    for &uj in u {
        let ln_g_num = (-(-alpha * uj).exp_m1()).ln(); // log(1 - e^{-a u_j})
        log_y += ln_g_num - ln_one_m_exp_a;
        // |phi'(u)| = a e^{-a u} / (1 - e^{-a u})
        sum_ln_phi_prime += alpha.ln() - alpha * uj - ln_g_num;
    }
    // x = y / (1-y); log(1-y) = log(-expm1(log y)) is stable because y < 1
    let log_one_m_y = (-log_y.exp_m1()).ln();
    let log_x = log_y - log_one_m_y;
    // |psi^{(p)}| = (1/a) sum_k |c_k| x^k
    let terms: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(k0, &c)| c.ln() + (k0 as f64 + 1.0) * log_x)
        .collect();
    let log_psi_p = -alpha.ln() + log_sum_exp(&terms);
    log_psi_p + sum_ln_phi_prime
}

/// log a_{p,k}(alpha) coefficients of the Gumbel generator derivative
/// psi^{(p)}(t) = (-1)^p psi(t) t^{-p} sum_k a_{p,k} t^{k/alpha},
/// built from signed Stirling numbers of the first and second kind.
/// Entries with a_{p,k} = 0 come back as -inf and drop out of the
/// log-sum-exp.
pub fn gumbel_coeff_ln(p: usize, alpha: f64) -> Vec<f64> {
    let beta = 1.0 / alpha;
    // signed Stirling numbers of the first kind s(p, j), j = 0..=p
    let mut s1 = vec![vec![0.0_f64; p + 1]; p + 1];
    s1[0][0] = 1.0;
    for n in 1..=p {
        for k in 1..=n {
            s1[n][k] = s1[n - 1][k - 1] - (n as f64 - 1.0) * s1[n - 1][k];
        }
    }
    // Stirling numbers of the second kind S(j, k)
    let mut s2 = vec![vec![0.0_f64; p + 1]; p + 1];
    s2[0][0] = 1.0;
    for n in 1..=p {
        for k in 1..=n {
            s2[n][k] = k as f64 * s2[n - 1][k] + s2[n - 1][k - 1];
        }
    }
    (1..=p)
        .map(|k| {
            let sign = if (p - k) % 2 == 0 { 1.0 } else { -1.0 };
            let mut a = 0.0;
            let mut beta_j = beta.powi(k as i32);
            for j in k..=p {
                a += beta_j * s1[p][j] * s2[j][k];
                beta_j *= beta;
            }
            let a = sign * a;
            // exact zeros occur (for example alpha = 1); tiny negatives are
            // floating-point residue of cancelling integer sums
            if a <= 0.0 {
                f64::NEG_INFINITY
            } else {
                a.ln()
            }
        })
        .collect()
}

/// Gumbel copula log-density for alpha >= 1; alpha = 1 is the product
/// copula.
pub fn gumbel_log_density(u: &UnitPoint, alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::Domain(format!("Gumbel alpha {} must be >= 1", alpha)));
    }
    check_interior(u)?;
    let ln_u: Vec<f64> = u.coords().iter().map(|&v| v.ln()).collect();
    let lnln_u: Vec<f64> = ln_u.iter().map(|&l| (-l).ln()).collect();
    let coeffs = gumbel_coeff_ln(u.dim(), alpha);
    Ok(gumbel_ln_pdf_row(&ln_u, &lnln_u, alpha, &coeffs))
}

/// Gumbel log-density from precomputed log u, log(-log u), and
/// coefficients from [`gumbel_coeff_ln`].
pub(crate) fn gumbel_ln_pdf_row(
    ln_u: &[f64],
    lnln_u: &[f64],
    alpha: f64,
    coeff_ln: &[f64],
) -> f64 {
    let p = ln_u.len();
    let beta = 1.0 / alpha;
    // s = sum_j (-ln u_j)^alpha in log space
    let terms: Vec<f64> = lnln_u.iter().map(|&l| alpha * l).collect();
    let log_s = log_sum_exp(&terms);
    let s_beta = (beta * log_s).exp();
    // |psi^{(p)}(s)| = psi(s) s^{-p} sum_k a_{p,k} s^{k beta}
    let poly_terms: Vec<f64> = coeff_ln
        .iter()
        .enumerate()
        .map(|(k0, &la)| la + (k0 as f64 + 1.0) * beta * log_s)
        .collect();
    let log_psi_p = -s_beta - p as f64 * log_s + log_sum_exp(&poly_terms);
    // |phi'(u)| = alpha (-ln u)^{alpha-1} / u
    let mut sum_ln_phi_prime = 0.0;
    for j in 0..p {
        sum_ln_phi_prime += alpha.ln() + (alpha - 1.0) * lnln_u[j] - ln_u[j];
    }
    log_psi_p + sum_ln_phi_prime
}
