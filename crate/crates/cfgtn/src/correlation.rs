//! Correlation matrices, their Cholesky factors, and the hyperspherical
//! angle parameterization.
//!
//! A p-by-p correlation matrix R factors as R = L Lᵀ with L lower
//! triangular, unit row norms, and positive diagonal. Row i of L is
//! written in spherical coordinates with angles θ_{i1}, …, θ_{i,i-1}
//! restricted to (0, π), which makes the map between angle vectors and
//! correlation matrices one-to-one and lets an optimizer search over a box
//! instead of the positive semi-definite cone.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Accumulated sine products below this trigger the degenerate-row
/// fallback in [`correlation_to_angles`].
const SINE_PRODUCT_FLOOR: f64 = 1e-12;

/// Pivot tolerance of the Cholesky decomposition.
const CHOLESKY_TOL: f64 = 1e-12;

/// Symmetric positive semi-definite matrix with unit diagonal, stored
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// The p(p-1)/2 angles of a correlation matrix's Cholesky factor, in
/// row-major order θ_{21}, θ_{31}, θ_{32}, …, θ_{p,p-1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleVector {
    dim: usize,
    angles: Vec<f64>,
}

/// Lower-triangular Cholesky factor with unit row norms.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    entries: Vec<f64>, // row-major, upper part zero
}

/// Number of angles parameterizing a p-by-p correlation matrix.
pub fn angle_count(p: usize) -> usize {
    p * (p - 1) / 2
}

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal, and off-diagonal range.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim < 1 || entries.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "correlation matrix needs {}x{} entries",
                dim, dim
            )));
        }
        for i in 0..dim {
            if (entries[i * dim + i] - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(
                    "correlation matrix diagonal must be 1".into(),
                ));
            }
            for j in 0..i {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                if (a - b).abs() > 1e-10 {
                    return Err(Error::InvalidInput("correlation matrix must be symmetric".into()));
                }
                if !(-1.0..=1.0).contains(&a) {
                    return Err(Error::InvalidInput(
                        "off-diagonal correlations must lie in [-1, 1]".into(),
                    ));
                }
            }
        }
        Ok(Self { dim, entries })
    }

    /// Identity correlation (independence).
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    /// Exchangeable matrix with a common off-diagonal value `rho`.
    pub fn exchangeable(dim: usize, rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Domain(format!("rho {} outside [-1,1]", rho)));
        }
        let mut entries = vec![rho; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Lower Cholesky factor; errors when the matrix is not positive
    /// definite within tolerance.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        let p = self.dim;
        let mut l = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..=i {
                let mut sum = self.entries[i * p + j];
                for k in 0..j {
                    sum -= l[i * p + k] * l[j * p + k];
                }
                if i == j {
                    if sum <= CHOLESKY_TOL {
                        return Err(Error::SingularMatrix(format!(
                            "pivot {} at row {}",
                            sum, i
                        )));
                    }
                    l[i * p + j] = sum.sqrt();
                } else {
                    l[i * p + j] = sum / l[j * p + j];
                }
            }
        }
        Ok(CholeskyFactor { dim: p, entries: l })
    }
}

impl AngleVector {
    /// Validates length and the open-interval restriction (0, π).
    pub fn new(dim: usize, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != angle_count(dim) {
            return Err(Error::InvalidInput(format!(
                "dimension {} needs {} angles, got {}",
                dim,
                angle_count(dim),
                angles.len()
            )));
        }
        for &a in &angles {
            if !(a > 0.0 && a < std::f64::consts::PI) {
                return Err(Error::Domain(format!("angle {} outside (0, pi)", a)));
            }
        }
        Ok(Self { dim, angles })
    }

    /// All angles π/2: the identity correlation.
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            angles: vec![std::f64::consts::FRAC_PI_2; angle_count(dim)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Shorthand for the full angle->L->R composition.
    pub fn to_correlation(&self) -> CorrelationMatrix {
        cholesky_to_correlation(&angles_to_cholesky(self))
    }
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Solves L w = v by forward substitution.
    pub fn solve_lower(&self, v: &[f64], out: &mut [f64]) {
        let p = self.dim;
        for i in 0..p {
            let mut sum = v[i];
            for k in 0..i {
                sum -= self.entries[i * p + k] * out[k];
            }
            out[i] = sum / self.entries[i * p + i];
        }
    }

    /// log det(L Lᵀ) = 2 Σ log l_ii.
    pub fn ln_det_correlation(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.entries[i * self.dim + i].ln())
            .sum::<f64>()
            * 2.0
    }
}

/// Builds the Cholesky factor from hyperspherical angles. Row i is
/// (cos θ_{i1}, cos θ_{i2} sin θ_{i1}, …, Π_k sin θ_{ik}); rows have unit
/// norm and a positive diagonal by construction.
pub fn angles_to_cholesky(theta: &AngleVector) -> CholeskyFactor {
    let p = theta.dim;
    let mut l = vec![0.0; p * p];
    l[0] = 1.0;
    let mut pos = 0;
    for i in 1..p {
        let mut sin_prod = 1.0;
        for j in 0..i {
            let a = theta.angles[pos];
            pos += 1;
            l[i * p + j] = a.cos() * sin_prod;
            sin_prod *= a.sin();
        }
        l[i * p + i] = sin_prod;
    }
    CholeskyFactor { dim: p, entries: l }
}

/// R = L Lᵀ.
pub fn cholesky_to_correlation(l: &CholeskyFactor) -> CorrelationMatrix {
    let p = l.dim;
    let mut r = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut sum = 0.0;
            for k in 0..=j.min(i) {
                sum += l.entries[i * p + k] * l.entries[j * p + k];
            }
            r[i * p + j] = sum;
            r[j * p + i] = sum;
        }
        r[i * p + i] = 1.0;
    }
    CorrelationMatrix { dim: p, entries: r }
}

/// Recovers the angle vector of a positive-definite correlation matrix.
///
/// Works row-by-row on the Cholesky factor: θ_{i1} = arccos(l_{i1}), then
/// each later entry is divided by the accumulated sine product before the
/// arccos. A row whose sine product collapses below tolerance is
/// degenerate; its remaining angles are set to π/2 (any value reproduces
/// the row).
pub fn correlation_to_angles(r: &CorrelationMatrix) -> Result<AngleVector> {
    let l = r.cholesky()?;
    let p = r.dim;
    let mut angles = Vec::with_capacity(angle_count(p));
    for i in 1..p {
        let mut sin_prod = 1.0;
        let mut degenerate = false;
        for j in 0..i {
            if degenerate {
                angles.push(std::f64::consts::FRAC_PI_2);
                continue;
            }
            let c = (l.entries[i * p + j] / sin_prod).clamp(-1.0, 1.0);
            // keep strictly inside (0, pi)
            let c = c.clamp(-(1.0 - f64::EPSILON), 1.0 - f64::EPSILON);
            let a = c.acos();
            angles.push(a);
            sin_prod *= a.sin();
            if sin_prod.abs() < SINE_PRODUCT_FLOOR {
                degenerate = true;
            }
        }
    }
    AngleVector::new(p, angles)
}

/// Random positive-definite correlation matrix for tests and
/// initialization: angles drawn uniformly on (0.3, π - 0.3) and mapped
/// forward, which guarantees validity without rejection.
pub fn random_correlation<R: Rng + ?Sized>(p: usize, rng: &mut R) -> CorrelationMatrix {
    random_angles(p, rng).to_correlation()
}

/// Random angle vector uniform on (0.3, π - 0.3) per coordinate.
pub fn random_angles<R: Rng + ?Sized>(p: usize, rng: &mut R) -> AngleVector {
    let lo = 0.3;
    let hi = std::f64::consts::PI - 0.3;
    let angles = (0..angle_count(p))
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    AngleVector::new(p, angles).expect("angles in range by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

    #[test]
    fn right_angles_give_identity() {
        let theta = AngleVector::new(2, vec![FRAC_PI_2]).unwrap();
        let l = angles_to_cholesky(&theta);
        assert_relative_eq!(l.get(0, 0), 1.0);
        assert_relative_eq!(l.get(1, 0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(l.get(1, 1), 1.0);

        let theta3 = AngleVector::new(3, vec![FRAC_PI_2; 3]).unwrap();
        let l3 = angles_to_cholesky(&theta3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(l3.get(i, j), expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn sixty_degree_cholesky() {
        let theta = AngleVector::new(2, vec![FRAC_PI_3]).unwrap();
        let l = angles_to_cholesky(&theta);
        assert_relative_eq!(l.get(1, 0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(l.get(1, 1), 3.0f64.sqrt() / 2.0, max_relative = 1e-15);
        let r = cholesky_to_correlation(&l);
        assert_relative_eq!(r.get(0, 1), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn correlation_from_quarter_angles_matches_brute_force() {
        let theta = AngleVector::new(3, vec![PI / 4.0; 3]).unwrap();
        let l = angles_to_cholesky(&theta);
        let r = cholesky_to_correlation(&l);
        // brute-force L * L^T
        for i in 0..3 {
            for j in 0..3 {
                let mut sum = 0.0;
                for k in 0..3 {
                    sum += l.get(i, k) * l.get(j, k);
                }
                assert_relative_eq!(r.get(i, j), sum, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn identity_round_trip() {
        for p in 2..=6 {
            let r = CorrelationMatrix::identity(p);
            let theta = correlation_to_angles(&r).unwrap();
            for &a in theta.angles() {
                assert_relative_eq!(a, FRAC_PI_2, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn arccos_of_half() {
        let r = CorrelationMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let theta = correlation_to_angles(&r).unwrap();
        assert_relative_eq!(theta.angles()[0], FRAC_PI_3, max_relative = 1e-14);
    }

    #[test]
    fn random_round_trips() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            for p in 3..=6 {
                let r = random_correlation(p, &mut rng);
                let theta = correlation_to_angles(&r).unwrap();
                let back = theta.to_correlation();
                for i in 0..p {
                    for j in 0..p {
                        assert!((r.get(i, j) - back.get(i, j)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn angle_round_trips() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(13);
        for _ in 0..50 {
            for p in 2..=6 {
                let theta = random_angles(p, &mut rng);
                let r = theta.to_correlation();
                let back = correlation_to_angles(&r).unwrap();
                for (a, b) in theta.angles().iter().zip(back.angles()) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn non_pd_matrix_rejected() {
        // correlation-like matrix that is not PSD: r12=r13=0.9, r23=-0.9
        let r = CorrelationMatrix::new(
            3,
            vec![1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0],
        )
        .unwrap();
        assert!(matches!(
            correlation_to_angles(&r),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn angles_outside_range_rejected() {
        assert!(AngleVector::new(2, vec![0.0]).is_err());
        assert!(AngleVector::new(2, vec![PI]).is_err());
        assert!(AngleVector::new(2, vec![-0.4]).is_err());
    }
}
