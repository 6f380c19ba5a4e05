//! Distribution functions used by the copula densities and samplers:
//! standard normal CDF/quantile, Student-t CDF/quantile, the first Debye
//! function, and Gauss-Legendre quadrature rules.

use statrs::function::beta::{beta_reg, inv_beta_reg, ln_beta};
use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile by Wichura's AS 241 (PPND16) rational
/// approximation. Relative accuracy is near machine precision over
/// the full open interval.
pub fn norm_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "norm_quantile requires p in (0,1)");

    const A: [f64; 8] = [
        3.387_132_872_796_366_608e0,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 7] = [
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34e0,
        4.630_337_846_156_545_295_9e0,
        5.769_497_221_460_691_405_5e0,
        3.647_848_324_763_204_605_04e0,
        1.270_458_252_452_368_382_58e0,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 7] = [
        2.053_191_626_637_758_821_87e0,
        1.676_384_830_183_803_849_4e0,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2e0,
        5.463_784_911_164_114_369_9e0,
        1.784_826_539_917_291_335_8e0,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 7] = [
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    fn poly(coeffs: &[f64], r: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = poly(&A, r);
        let den = poly(&B, r) * r + 1.0;
        return q * num / den;
    }

    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / (poly(&D, r) * r + 1.0)
    } else {
        r -= 5.0;
        poly(&E, r) / (poly(&F, r) * r + 1.0)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// CDF of the standard Student-t distribution with `nu` degrees of freedom.
pub fn t_cdf(x: f64, nu: f64) -> f64 {
    assert!(nu > 0.0);
    if x == 0.0 {
        return 0.5;
    }
    // P(T <= x) expressed through the regularized incomplete beta function.
    let ib = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x * x));
    if x > 0.0 {
        1.0 - ib
    } else {
        ib
    }
}

/// Log density of the standard Student-t distribution with `nu` degrees
/// of freedom.
pub fn t_ln_pdf(x: f64, nu: f64) -> f64 {
    -ln_beta(0.5 * nu, 0.5) - 0.5 * nu.ln() - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()
}

/// Quantile of the standard Student-t distribution, computed through the
/// inverse regularized incomplete beta function and polished by one Newton
/// step on the CDF.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "t_quantile requires p in (0,1)");
    assert!(nu > 0.0);
    let tail = 2.0 * p.min(1.0 - p);
    let y = inv_beta_reg(0.5 * nu, 0.5, tail);
    let mut x = if y <= 0.0 {
        // inverse incomplete beta underflowed; fall back to the asymptotic
        // tail t ~ sqrt(nu) * tail^{-1/nu} scale
        (nu / y.max(1e-300)).sqrt()
    } else {
        (nu * (1.0 - y) / y).sqrt()
    };
    if p < 0.5 {
        x = -x;
    }
    // Newton polish: F(x) - p = 0 with F' = t pdf.
    for _ in 0..2 {
        let f = t_cdf(x, nu) - p;
        let dpdf = t_ln_pdf(x, nu).exp();
        if dpdf > 0.0 {
            let step = f / dpdf;
            if step.is_finite() {
                x -= step;
            }
        }
    }
    x
}

/// First Debye function D1(x) = (1/x) * Int_0^x t/(e^t - 1) dt for x > 0.
pub fn debye1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x < 1e-4 {
        // Taylor expansion around 0
        return 1.0 - x / 4.0 + x * x / 36.0;
    }
    // The integrand is smooth on [0, x]; a fixed Gauss-Legendre rule is
    // accurate to machine precision for the argument range used here.
    let (nodes, weights) = gauss_legendre(64);
    let mut sum = 0.0;
    for (&t01, &w) in nodes.iter().zip(weights.iter()) {
        let t = t01 * x;
        let f = if t < 1e-8 { 1.0 - t / 2.0 } else { t / t.exp_m1() };
        sum += w * f;
    }
    sum // (1/x) * integral over [0,x] equals the mean over [0,1] nodes
}

/// Nodes and weights of the n-point Gauss-Legendre rule on (0, 1).
///
/// Computed by Newton iteration on the Legendre polynomial; results are
/// cached per order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess: Chebyshev-like approximation of the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map from (-1,1) to (0,1).
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

    #[test]
    fn norm_quantile_matches_reference() {
        let reference = Normal::standard();
        for &p in &[
            1e-12, 1e-8, 1e-4, 0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975, 0.999, 1.0 - 1e-8,
        ] {
            assert_relative_eq!(
                norm_quantile(p),
                reference.inverse_cdf(p),
                max_relative = 1e-10,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn norm_quantile_round_trip() {
        // tolerance is set by the erfc accuracy of the CDF side, not the
        // quantile; AS 241 itself is near machine precision
        for i in 1..200 {
            let p = i as f64 / 200.0;
            assert_relative_eq!(norm_cdf(norm_quantile(p)), p, max_relative = 1e-9);
        }
    }

    #[test]
    fn t_quantile_round_trip() {
        for &nu in &[0.7, 2.0, 5.0, 15.0, 805.0] {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let x = t_quantile(p, nu);
                assert_relative_eq!(t_cdf(x, nu), p, max_relative = 1e-10, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn t_quantile_matches_reference() {
        let reference = StudentsT::new(0.0, 1.0, 5.0).unwrap();
        for &p in &[0.001, 0.05, 0.3, 0.5, 0.77, 0.9995] {
            assert_relative_eq!(
                t_quantile(p, 5.0),
                reference.inverse_cdf(p),
                max_relative = 1e-8,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn debye_known_values() {
        // D1(1) = 0.7775046341... (Abramowitz & Stegun style reference value)
        assert_relative_eq!(debye1(1.0), 0.777_504_634_1, max_relative = 1e-8);
        // small-x expansion
        assert_relative_eq!(debye1(1e-6), 1.0 - 2.5e-7, max_relative = 1e-10);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        // degree-15 polynomial integrated exactly: Int_0^1 x^15 dx = 1/16
        let approx_int: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(15)).sum();
        assert_relative_eq!(approx_int, 1.0 / 16.0, max_relative = 1e-12);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    }
}
