//! The n-by-p pseudo-observation matrix consumed by fitting and
//! evaluation.

use crate::copula::UNIT_EPS;
use crate::error::{Error, Result};

/// Matrix of pseudo-observations, every entry strictly inside (0,1),
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl PseudoSample {
    /// Validates openness of every entry and clamps to the working
    /// interval [eps, 1-eps].
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidInput("dimension must be at least 2".into()));
        }
        if values.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {}x{} sample, got {}",
                n * p,
                n,
                p,
                values.len()
            )));
        }
        let mut values = values;
        for v in &mut values {
            if !(*v > 0.0 && *v < 1.0) {
                return Err(Error::Domain(format!("entry {} outside (0,1)", v)));
            }
            *v = v.clamp(UNIT_EPS, 1.0 - UNIT_EPS);
        }
        Ok(Self { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        let p = rows[0].len();
        let mut values = Vec::with_capacity(n * p);
        for r in rows {
            if r.len() != p {
                return Err(Error::InvalidInput("ragged rows".into()));
            }
            values.extend_from_slice(r);
        }
        Self::new(n, p, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.p + j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows drawn with replacement according to `indices`.
    pub fn resample(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n: indices.len(),
            p: self.p,
            values,
        }
    }
}
