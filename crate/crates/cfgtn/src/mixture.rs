//! The CFGTN mixture model: one Clayton, Frank, Gumbel, and Student-t
//! slot plus k Gaussian components, with weights on the simplex and
//! Gaussian weights in non-increasing order.
//!
//! This module owns parameter packing for the optimizer, the mixture
//! log-density and pseudo-likelihood, effective degrees of freedom, AICc,
//! proportion thresholding, and the JSON persistence schema.

use crate::copula::{
    clayton_log_density, frank_log_density, gaussian_log_density, gumbel_log_density,
    student_t_log_density, UnitPoint,
};
use crate::correlation::{angle_count, AngleVector, CorrelationMatrix};
use crate::data::PseudoSample;
use crate::error::{Error, Result};
use crate::optimizer::{LinearEqualities, LinearInequalities};
use serde::{Deserialize, Serialize};

/// Upper bound on the Archimedean dependence parameters; tau exceeds 0.96
/// beyond this, far past every experiment, and the generator recursions
/// stay inside floating-point range.
pub const ALPHA_MAX: f64 = 50.0;

/// Upper bound on the t degrees of freedom. The likelihood flattens as the
/// t component approaches a Gaussian, and fitted values near 800 occur on
/// real data, so the cap must sit well above that scale.
pub const NU_MAX: f64 = 2000.0;

/// Angles are kept this far inside (0, pi); a fit touching the cap is
/// flagged in its report.
pub const ANGLE_EPS: f64 = 1e-6;

/// Proportion threshold below which a fitted component is discarded.
pub const PROPORTION_THRESHOLD: f64 = 0.01;

/// Which component slots participate in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureStructure {
    pub clayton: bool,
    pub frank: bool,
    pub gumbel: bool,
    pub student_t: bool,
    pub normals: usize,
}

impl MixtureStructure {
    pub fn full(normals: usize) -> Self {
        Self {
            clayton: true,
            frank: true,
            gumbel: true,
            student_t: true,
            normals,
        }
    }

    pub fn single_clayton() -> Self {
        Self { clayton: true, frank: false, gumbel: false, student_t: false, normals: 0 }
    }

    pub fn single_frank() -> Self {
        Self { clayton: false, frank: true, gumbel: false, student_t: false, normals: 0 }
    }

    pub fn single_gumbel() -> Self {
        Self { clayton: false, frank: false, gumbel: true, student_t: false, normals: 0 }
    }

    pub fn single_student_t() -> Self {
        Self { clayton: false, frank: false, gumbel: false, student_t: true, normals: 0 }
    }

    pub fn single_gaussian() -> Self {
        Self { clayton: false, frank: false, gumbel: false, student_t: false, normals: 1 }
    }

    /// Number of mixture components present.
    pub fn component_count(&self) -> usize {
        self.clayton as usize
            + self.frank as usize
            + self.gumbel as usize
            + self.student_t as usize
            + self.normals
    }

    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.clayton {
            parts.push("C".to_string());
        }
        if self.frank {
            parts.push("F".to_string());
        }
        if self.gumbel {
            parts.push("G".to_string());
        }
        if self.student_t {
            parts.push("T".to_string());
        }
        if self.normals > 0 {
            parts.push(format!("N{}", self.normals));
        }
        parts.join("+")
    }
}

/// The fitted mixture: weights, copula parameters, and correlation angles.
///
/// Inactive components carry weight zero and canonical parameter values;
/// the density skips them.
#[derive(Debug, Clone, PartialEq)]
pub struct CfgtnModel {
    pub dimension: usize,
    pub w_clayton: f64,
    pub w_frank: f64,
    pub w_gumbel: f64,
    pub w_t: f64,
    pub normal_weights: Vec<f64>,
    pub alpha_clayton: f64,
    pub alpha_frank: f64,
    pub alpha_gumbel: f64,
    pub nu: f64,
    pub theta_t: AngleVector,
    pub theta_normals: Vec<AngleVector>,
}

impl CfgtnModel {
    /// Model with the given structure, equal weights over its active
    /// components, and canonical parameters.
    pub fn equal_weights(structure: MixtureStructure, p: usize) -> Self {
        let m = structure.component_count().max(1) as f64;
        let w = 1.0 / m;
        Self {
            dimension: p,
            w_clayton: if structure.clayton { w } else { 0.0 },
            w_frank: if structure.frank { w } else { 0.0 },
            w_gumbel: if structure.gumbel { w } else { 0.0 },
            w_t: if structure.student_t { w } else { 0.0 },
            normal_weights: vec![w; structure.normals],
            alpha_clayton: 1.0,
            alpha_frank: 1.0,
            alpha_gumbel: 1.5,
            nu: 10.0,
            theta_t: AngleVector::identity(p),
            theta_normals: vec![AngleVector::identity(p); structure.normals],
        }
    }

    /// The structure implied by nonzero weights.
    pub fn structure(&self) -> MixtureStructure {
        MixtureStructure {
            clayton: self.w_clayton > 0.0,
            frank: self.w_frank > 0.0,
            gumbel: self.w_gumbel > 0.0,
            student_t: self.w_t > 0.0,
            normals: self.normal_weights.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.weight_sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {}, expected 1",
                total
            )));
        }
        let weights = [self.w_clayton, self.w_frank, self.w_gumbel, self.w_t];
        if weights.iter().chain(&self.normal_weights).any(|&w| w < 0.0) {
            return Err(Error::InvalidInput("negative weight".into()));
        }
        for pair in self.normal_weights.windows(2) {
            if pair[0] < pair[1] - 1e-10 {
                return Err(Error::InvalidInput(
                    "normal weights must be non-increasing".into(),
                ));
            }
        }
        if self.w_clayton > 0.0 && !(self.alpha_clayton > 0.0) {
            return Err(Error::Domain("Clayton alpha must be > 0".into()));
        }
        if self.w_frank > 0.0 && !(self.alpha_frank > 0.0) {
            return Err(Error::Domain("Frank alpha must be > 0".into()));
        }
        if self.w_gumbel > 0.0 && !(self.alpha_gumbel >= 1.0) {
            return Err(Error::Domain("Gumbel alpha must be >= 1".into()));
        }
        if self.w_t > 0.0 && !(self.nu > 0.0) {
            return Err(Error::Domain("t degrees of freedom must be > 0".into()));
        }
        if self.theta_t.dim() != self.dimension
            || self.theta_normals.iter().any(|t| t.dim() != self.dimension)
        {
            return Err(Error::InvalidInput("angle vector dimension mismatch".into()));
        }
        Ok(())
    }

    pub fn weight_sum(&self) -> f64 {
        self.w_clayton
            + self.w_frank
            + self.w_gumbel
            + self.w_t
            + self.normal_weights.iter().sum::<f64>()
    }

    /// Mixture log-density: log-sum-exp over log w_j + log c_j(u),
    /// skipping zero-weight components.
    pub fn log_density(&self, u: &UnitPoint) -> Result<f64> {
        let mut terms: Vec<f64> = Vec::with_capacity(4 + self.normal_weights.len());
        if self.w_clayton > 0.0 {
            terms.push(self.w_clayton.ln() + clayton_log_density(u, self.alpha_clayton)?);
        }
        if self.w_frank > 0.0 {
            terms.push(self.w_frank.ln() + frank_log_density(u, self.alpha_frank)?);
        }
        if self.w_gumbel > 0.0 {
            terms.push(self.w_gumbel.ln() + gumbel_log_density(u, self.alpha_gumbel)?);
        }
        if self.w_t > 0.0 {
            let r = self.theta_t.to_correlation();
            terms.push(self.w_t.ln() + student_t_log_density(u, &r, self.nu)?);
        }
        for (w, theta) in self.normal_weights.iter().zip(&self.theta_normals) {
            if *w > 0.0 {
                let r = theta.to_correlation();
                terms.push(w.ln() + gaussian_log_density(u, &r)?);
            }
        }
        if terms.is_empty() {
            return Err(Error::InvalidInput("model has no active components".into()));
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln())
    }

    /// Sum of per-row mixture log-densities; errors when any row
    /// degenerates to -inf so the optimizer can reject the step.
    pub fn log_pseudo_likelihood(&self, sample: &PseudoSample) -> Result<f64> {
        if sample.dim() != self.dimension {
            return Err(Error::InvalidInput("sample dimension mismatch".into()));
        }
        let evaluator = crate::fit::MixtureEvaluator::new(sample);
        let ll = evaluator.log_likelihood(self);
        if !ll.is_finite() {
            return Err(Error::NonFinite("log pseudo-likelihood".into()));
        }
        Ok(ll)
    }

    /// Weights in slot order: Clayton, Frank, Gumbel, t, then Gaussians.
    fn all_weights(&self) -> Vec<f64> {
        let mut w = vec![self.w_clayton, self.w_frank, self.w_gumbel, self.w_t];
        w.extend_from_slice(&self.normal_weights);
        w
    }

    /// Which components survive the proportion threshold. When every
    /// weight sits at or below it, the largest-weight component (first in
    /// slot order on ties) is kept so the model never empties out.
    fn kept_flags(&self, threshold: f64) -> Vec<bool> {
        let weights = self.all_weights();
        let mut kept: Vec<bool> = weights.iter().map(|&w| w > threshold).collect();
        if !kept.iter().any(|&k| k) {
            let mut best = 0;
            for (i, &w) in weights.iter().enumerate() {
                if w > weights[best] {
                    best = i;
                }
            }
            kept[best] = weights[best] > 0.0;
        }
        kept
    }

    /// Effective parameter count DF(k) of the thresholded mixture:
    /// 2 per kept Archimedean component, 2 + p(p-1)/2 for a kept t
    /// component, 1 + p(p-1)/2 per kept Gaussian, minus 1 for the
    /// sum-to-one constraint.
    pub fn degrees_of_freedom(&self, threshold: f64) -> usize {
        let q = angle_count(self.dimension) as i64;
        let kept = self.kept_flags(threshold);
        let mut df: i64 = -1;
        for (i, &k) in kept.iter().enumerate() {
            if !k {
                continue;
            }
            df += match i {
                0..=2 => 2,
                3 => 2 + q,
                _ => 1 + q,
            };
        }
        df.max(0) as usize
    }

    /// Discards components with proportion at or below the threshold and
    /// renormalizes; the largest component always survives. Gaussian
    /// ordering is preserved.
    pub fn thresholded(&self, threshold: f64) -> CfgtnModel {
        let kept = self.kept_flags(threshold);
        let mut out = self.clone();
        if !kept[0] {
            out.w_clayton = 0.0;
        }
        if !kept[1] {
            out.w_frank = 0.0;
        }
        if !kept[2] {
            out.w_gumbel = 0.0;
        }
        if !kept[3] {
            out.w_t = 0.0;
        }
        let mut kept_normals = Vec::new();
        let mut kept_thetas = Vec::new();
        for (j, (w, theta)) in out
            .normal_weights
            .iter()
            .zip(&out.theta_normals)
            .enumerate()
        {
            if kept[4 + j] {
                kept_normals.push(*w);
                kept_thetas.push(theta.clone());
            }
        }
        out.normal_weights = kept_normals;
        out.theta_normals = kept_thetas;
        let total = out.weight_sum();
        if total > 0.0 {
            out.w_clayton /= total;
            out.w_frank /= total;
            out.w_gumbel /= total;
            out.w_t /= total;
            for w in &mut out.normal_weights {
                *w /= total;
            }
        }
        out
    }

    /// Any correlation angle at the working cap [ANGLE_EPS, pi-ANGLE_EPS]?
    pub fn hits_angle_cap(&self) -> bool {
        let at_cap = |a: &f64| {
            *a <= ANGLE_EPS * 1.5 || *a >= std::f64::consts::PI - ANGLE_EPS * 1.5
        };
        (self.w_t > 0.0 && self.theta_t.angles().iter().any(at_cap))
            || self
                .theta_normals
                .iter()
                .zip(&self.normal_weights)
                .any(|(t, &w)| w > 0.0 && t.angles().iter().any(at_cap))
    }
}

/// AICc = -2 L + 2 DF + 2 DF (2 DF + 1) / (n - DF - 1).
pub fn aicc(loglik: f64, df: usize, n: usize) -> Result<f64> {
    let dff = df as f64;
    let nf = n as f64;
    if nf <= dff + 1.0 {
        return Err(Error::Domain(format!(
            "AICc needs n > DF + 1 (n = {}, DF = {})",
            n, df
        )));
    }
    Ok(-2.0 * loglik + 2.0 * dff + 2.0 * dff * (2.0 * dff + 1.0) / (nf - dff - 1.0))
}

/// Convergence and quality diagnostics for one fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub loglik: f64,
    pub df: usize,
    pub aicc: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Set when a fitted correlation angle landed on the working cap
    /// just inside (0, pi).
    pub angle_cap_hit: bool,
}

// ---------------------------------------------------------------------------
// Parameter packing
// ---------------------------------------------------------------------------

/// Maps between a model (restricted to a structure) and the flat vector
/// the optimizer works on, with the bounds and linear constraints
/// attached. Slot order follows the model definition: weights, Archimedean
/// parameters, t degrees of freedom, t angles, Gaussian angles.
#[derive(Debug, Clone)]
pub struct Packing {
    pub structure: MixtureStructure,
    pub dimension: usize,
}

impl Packing {
    pub fn new(structure: MixtureStructure, dimension: usize) -> Self {
        Self { structure, dimension }
    }

    pub fn len(&self) -> usize {
        let s = &self.structure;
        let q = angle_count(self.dimension);
        s.component_count()
            + s.clayton as usize
            + s.frank as usize
            + s.gumbel as usize
            + s.student_t as usize * (1 + q)
            + s.normals * q
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of leading weight slots.
    pub fn weight_count(&self) -> usize {
        self.structure.component_count()
    }

    pub fn pack(&self, model: &CfgtnModel) -> Vec<f64> {
        let s = &self.structure;
        let mut beta = Vec::with_capacity(self.len());
        if s.clayton {
            beta.push(model.w_clayton);
        }
        if s.frank {
            beta.push(model.w_frank);
        }
        if s.gumbel {
            beta.push(model.w_gumbel);
        }
        if s.student_t {
            beta.push(model.w_t);
        }
        beta.extend_from_slice(&model.normal_weights[..s.normals]);
        if s.clayton {
            beta.push(model.alpha_clayton);
        }
        if s.frank {
            beta.push(model.alpha_frank);
        }
        if s.gumbel {
            beta.push(model.alpha_gumbel);
        }
        if s.student_t {
            beta.push(model.nu);
            beta.extend_from_slice(model.theta_t.angles());
        }
        for theta in &model.theta_normals[..s.normals] {
            beta.extend_from_slice(theta.angles());
        }
        beta
    }

    pub fn unpack(&self, beta: &[f64]) -> Result<CfgtnModel> {
        if beta.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} slots, got {}",
                self.len(),
                beta.len()
            )));
        }
        let s = &self.structure;
        let p = self.dimension;
        let q = angle_count(p);
        let mut model = CfgtnModel::equal_weights(
            MixtureStructure { clayton: false, frank: false, gumbel: false, student_t: false, normals: 0 },
            p,
        );
        model.w_clayton = 0.0;
        model.w_frank = 0.0;
        model.w_gumbel = 0.0;
        model.w_t = 0.0;
        let mut pos = 0;
        let mut take = |k: usize| {
            let slice = &beta[pos..pos + k];
            pos += k;
            slice.to_vec()
        };
        if s.clayton {
            model.w_clayton = take(1)[0];
        }
        if s.frank {
            model.w_frank = take(1)[0];
        }
        if s.gumbel {
            model.w_gumbel = take(1)[0];
        }
        if s.student_t {
            model.w_t = take(1)[0];
        }
        model.normal_weights = take(s.normals);
        if s.clayton {
            model.alpha_clayton = take(1)[0];
        }
        if s.frank {
            model.alpha_frank = take(1)[0];
        }
        if s.gumbel {
            model.alpha_gumbel = take(1)[0];
        }
        if s.student_t {
            model.nu = take(1)[0];
            model.theta_t = AngleVector::new(p, take(q))?;
        }
        model.theta_normals = (0..s.normals)
            .map(|_| AngleVector::new(p, take(q)))
            .collect::<Result<Vec<_>>>()?;
        Ok(model)
    }

    /// Box bounds per slot, matching the constrained problem: weights in
    /// [0,1], Archimedean parameters and t degrees of freedom in their
    /// capped domains, angles inside the capped open interval.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let s = &self.structure;
        let q = angle_count(self.dimension);
        let mut b = vec![(0.0, 1.0); self.weight_count()];
        if s.clayton {
            b.push((0.0, ALPHA_MAX));
        }
        if s.frank {
            b.push((0.0, ALPHA_MAX));
        }
        if s.gumbel {
            b.push((1.0, ALPHA_MAX));
        }
        if s.student_t {
            b.push((0.0, NU_MAX));
            b.extend(vec![(ANGLE_EPS, std::f64::consts::PI - ANGLE_EPS); q]);
        }
        b.extend(vec![
            (ANGLE_EPS, std::f64::consts::PI - ANGLE_EPS);
            s.normals * q
        ]);
        b
    }

    /// The sum-to-one equality over the weight slots.
    pub fn equalities(&self) -> LinearEqualities {
        let mut row = vec![0.0; self.len()];
        for slot in row.iter_mut().take(self.weight_count()) {
            *slot = 1.0;
        }
        LinearEqualities {
            rows: vec![row],
            rhs: vec![1.0],
        }
    }

    /// Gaussian weight ordering rows w_{j+1} - w_j <= 0.
    pub fn inequalities(&self) -> LinearInequalities {
        let s = &self.structure;
        let first_normal =
            s.clayton as usize + s.frank as usize + s.gumbel as usize + s.student_t as usize;
        let mut ineq = LinearInequalities::default();
        for j in 0..s.normals.saturating_sub(1) {
            let mut row = vec![0.0; self.len()];
            row[first_normal + j] = -1.0;
            row[first_normal + j + 1] = 1.0;
            ineq.rows.push(row);
            ineq.rhs.push(0.0);
        }
        ineq
    }

    /// Human-readable slot names aligned with `pack`.
    pub fn slot_names(&self) -> Vec<String> {
        let s = &self.structure;
        let q = angle_count(self.dimension);
        let mut names = Vec::with_capacity(self.len());
        if s.clayton {
            names.push("w_clayton".into());
        }
        if s.frank {
            names.push("w_frank".into());
        }
        if s.gumbel {
            names.push("w_gumbel".into());
        }
        if s.student_t {
            names.push("w_t".into());
        }
        for j in 0..s.normals {
            names.push(format!("w_normal{}", j + 1));
        }
        if s.clayton {
            names.push("clayton_alpha".into());
        }
        if s.frank {
            names.push("frank_alpha".into());
        }
        if s.gumbel {
            names.push("gumbel_alpha".into());
        }
        if s.student_t {
            names.push("t_dof".into());
            for a in 0..q {
                names.push(format!("t_theta{}", a + 1));
            }
        }
        for j in 0..s.normals {
            for a in 0..q {
                names.push(format!("normal{}_theta{}", j + 1, a + 1));
            }
        }
        names
    }
}

// ---------------------------------------------------------------------------
// JSON persistence
// ---------------------------------------------------------------------------

/// On-disk model document. Correlation matrices are stored both as angle
/// vectors and as full entry matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub dimension: usize,
    pub weights: WeightsDocument,
    pub clayton_alpha: f64,
    pub frank_alpha: f64,
    pub gumbel_alpha: f64,
    pub t_dof: f64,
    pub t_angles: Vec<f64>,
    pub t_correlation: Vec<Vec<f64>>,
    pub normal_angles: Vec<Vec<f64>>,
    pub normal_correlations: Vec<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub loglik: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub df: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aicc: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsDocument {
    pub clayton: f64,
    pub frank: f64,
    pub gumbel: f64,
    pub t: f64,
    pub normals: Vec<f64>,
}

fn matrix_rows(r: &CorrelationMatrix) -> Vec<Vec<f64>> {
    (0..r.dim())
        .map(|i| (0..r.dim()).map(|j| r.get(i, j)).collect())
        .collect()
}

impl ModelDocument {
    pub fn from_model(model: &CfgtnModel, report: Option<&FitReport>) -> Self {
        Self {
            dimension: model.dimension,
            weights: WeightsDocument {
                clayton: model.w_clayton,
                frank: model.w_frank,
                gumbel: model.w_gumbel,
                t: model.w_t,
                normals: model.normal_weights.clone(),
            },
            clayton_alpha: model.alpha_clayton,
            frank_alpha: model.alpha_frank,
            gumbel_alpha: model.alpha_gumbel,
            t_dof: model.nu,
            t_angles: model.theta_t.angles().to_vec(),
            t_correlation: matrix_rows(&model.theta_t.to_correlation()),
            normal_angles: model
                .theta_normals
                .iter()
                .map(|t| t.angles().to_vec())
                .collect(),
            normal_correlations: model
                .theta_normals
                .iter()
                .map(|t| matrix_rows(&t.to_correlation()))
                .collect(),
            loglik: report.map(|r| r.loglik),
            df: report.map(|r| r.df),
            aicc: report.map(|r| r.aicc),
        }
    }

    pub fn to_model(&self) -> Result<CfgtnModel> {
        let p = self.dimension;
        let model = CfgtnModel {
            dimension: p,
            w_clayton: self.weights.clayton,
            w_frank: self.weights.frank,
            w_gumbel: self.weights.gumbel,
            w_t: self.weights.t,
            normal_weights: self.weights.normals.clone(),
            alpha_clayton: self.clayton_alpha,
            alpha_frank: self.frank_alpha,
            alpha_gumbel: self.gumbel_alpha,
            nu: self.t_dof,
            theta_t: AngleVector::new(p, self.t_angles.clone())?,
            theta_normals: self
                .normal_angles
                .iter()
                .map(|a| AngleVector::new(p, a.clone()))
                .collect::<Result<Vec<_>>>()?,
        };
        model.validate()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn up(coords: &[f64]) -> UnitPoint {
        UnitPoint::new(coords.to_vec()).unwrap()
    }

    /// The Table-1 style three-component model used across the test suite.
    fn table1_model() -> CfgtnModel {
        let rho: f64 = 0.5;
        let theta = AngleVector::new(2, vec![rho.acos()]).unwrap();
        CfgtnModel {
            dimension: 2,
            w_clayton: 0.40,
            w_frank: 0.0,
            w_gumbel: 0.25,
            w_t: 0.0,
            normal_weights: vec![0.35],
            alpha_clayton: 3.0,
            alpha_frank: 1.0,
            alpha_gumbel: 10.0,
            nu: 10.0,
            theta_t: AngleVector::identity(2),
            theta_normals: vec![theta],
        }
    }

    #[test]
    fn product_copula_slots_give_unit_density() {
        let mut m = CfgtnModel::equal_weights(MixtureStructure::single_gumbel(), 2);
        m.alpha_gumbel = 1.0;
        for pt in [[0.5, 0.5], [0.1, 0.9], [0.33, 0.77]] {
            assert_relative_eq!(m.log_density(&up(&pt)).unwrap(), 0.0, epsilon = 1e-12);
        }
        let g = CfgtnModel::equal_weights(MixtureStructure::single_gaussian(), 2);
        for pt in [[0.5, 0.5], [0.1, 0.9]] {
            assert_relative_eq!(g.log_density(&up(&pt)).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixture_density_is_weighted_sum_of_components() {
        let m = table1_model();
        let u = up(&[0.5, 0.5]);
        let c = clayton_log_density(&u, 3.0).unwrap().exp();
        let g = gumbel_log_density(&u, 10.0).unwrap().exp();
        let r = CorrelationMatrix::new(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let n = gaussian_log_density(&u, &r).unwrap().exp();
        let expected = 0.40 * c + 0.25 * g + 0.35 * n;
        assert_relative_eq!(
            m.log_density(&u).unwrap().exp(),
            expected,
            max_relative = 1e-10
        );
    }

    #[test]
    fn pseudo_likelihood_of_product_copula_is_zero() {
        let mut m = CfgtnModel::equal_weights(MixtureStructure::single_gumbel(), 2);
        m.alpha_gumbel = 1.0;
        let sample =
            PseudoSample::from_rows(&[vec![0.2, 0.8], vec![0.5, 0.5], vec![0.9, 0.1]]).unwrap();
        assert_relative_eq!(
            m.log_pseudo_likelihood(&sample).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_row_likelihood_equals_density() {
        let m = table1_model();
        let sample = PseudoSample::from_rows(&[vec![0.4, 0.7]]).unwrap();
        let direct = m.log_density(&up(&[0.4, 0.7])).unwrap();
        assert_relative_eq!(
            m.log_pseudo_likelihood(&sample).unwrap(),
            direct,
            max_relative = 1e-12
        );
    }

    #[test]
    fn degrees_of_freedom_examples() {
        // p=2, C+F+G+T kept plus one normal: 2*3 + (2+1) + (1+1) - 1 = 10
        let mut m = CfgtnModel::equal_weights(MixtureStructure::full(1), 2);
        m.alpha_gumbel = 2.0;
        assert_eq!(m.degrees_of_freedom(0.01), 10);

        // p=4, only T kept: (2+6) - 1 = 7
        let t4 = CfgtnModel::equal_weights(MixtureStructure::single_student_t(), 4);
        assert_eq!(t4.degrees_of_freedom(0.01), 7);
    }

    #[test]
    fn degrees_of_freedom_keeps_largest_when_all_below_threshold() {
        let m = CfgtnModel::equal_weights(MixtureStructure::full(1), 2);
        // every weight is 0.2 which is <= 0.5 threshold; the guard keeps one
        let df = m.degrees_of_freedom(0.49);
        assert_eq!(df, 1); // a single Archimedean-or-normal slot survives
    }

    #[test]
    fn aicc_examples() {
        assert_relative_eq!(aicc(0.0, 0, 100).unwrap(), 0.0);
        assert_relative_eq!(
            aicc(500.0, 10, 1000).unwrap(),
            -1000.0 + 20.0 + 420.0 / 989.0,
            max_relative = 1e-14
        );
        assert!(aicc(10.0, 99, 100).is_err());
        // monotone increasing in DF at fixed loglik
        let mut last = f64::NEG_INFINITY;
        for df in 0..100 {
            let v = aicc(570.11, df, 329).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn thresholding_examples() {
        // weights (0.005, 0.995) over {Clayton, T} -> pure T
        let mut m = CfgtnModel::equal_weights(
            MixtureStructure { clayton: true, frank: false, gumbel: false, student_t: true, normals: 0 },
            2,
        );
        m.w_clayton = 0.005;
        m.w_t = 0.995;
        let t = m.thresholded(0.01);
        assert_eq!(t.w_clayton, 0.0);
        assert_relative_eq!(t.w_t, 1.0, epsilon = 1e-12);

        // all weights above threshold: unchanged up to renormalization
        let m2 = table1_model();
        let t2 = m2.thresholded(0.01);
        assert_relative_eq!(t2.w_clayton, 0.40, epsilon = 1e-12);
        assert_relative_eq!(t2.normal_weights[0], 0.35, epsilon = 1e-12);

        // weight exactly at the threshold is discarded
        let mut m3 = CfgtnModel::equal_weights(MixtureStructure::full(1), 2);
        m3.w_clayton = 0.4;
        m3.w_frank = 0.3;
        m3.w_gumbel = 0.2;
        m3.w_t = 0.09;
        m3.normal_weights = vec![0.01];
        m3.alpha_gumbel = 2.0;
        let t3 = m3.thresholded(0.01);
        assert!(t3.normal_weights.is_empty());
        assert_relative_eq!(t3.w_clayton, 0.4 / 0.99, max_relative = 1e-12);
        assert_relative_eq!(t3.w_t, 0.09 / 0.99, max_relative = 1e-12);
    }

    #[test]
    fn threshold_idempotent() {
        let mut m = CfgtnModel::equal_weights(MixtureStructure::full(2), 3);
        m.w_clayton = 0.6;
        m.w_frank = 0.005;
        m.w_gumbel = 0.195;
        m.w_t = 0.1;
        m.normal_weights = vec![0.08, 0.02];
        m.alpha_gumbel = 2.0;
        let once = m.thresholded(0.01);
        let twice = once.thresholded(0.01);
        assert_eq!(once, twice);
    }

    #[test]
    fn pack_unpack_round_trip_exact() {
        let structure = MixtureStructure::full(2);
        let packing = Packing::new(structure, 3);
        let mut m = CfgtnModel::equal_weights(structure, 3);
        m.w_clayton = 0.3;
        m.w_frank = 0.2;
        m.w_gumbel = 0.15;
        m.w_t = 0.15;
        m.normal_weights = vec![0.15, 0.05];
        m.alpha_clayton = 2.4;
        m.alpha_frank = 6.1;
        m.alpha_gumbel = 3.3;
        m.nu = 7.7;
        m.theta_t = AngleVector::new(3, vec![0.4, 1.0, 2.2]).unwrap();
        m.theta_normals = vec![
            AngleVector::new(3, vec![0.9, 1.4, 0.3]).unwrap(),
            AngleVector::new(3, vec![2.0, 1.1, 1.9]).unwrap(),
        ];
        let beta = packing.pack(&m);
        assert_eq!(beta.len(), packing.len());
        let back = packing.unpack(&beta).unwrap();
        assert_eq!(m, back);
        assert_eq!(packing.slot_names().len(), packing.len());
    }

    #[test]
    fn label_switch_leaves_density_unchanged() {
        let theta_a = AngleVector::new(2, vec![0.8]).unwrap();
        let theta_b = AngleVector::new(2, vec![2.1]).unwrap();
        let m1 = CfgtnModel {
            dimension: 2,
            w_clayton: 0.0,
            w_frank: 0.0,
            w_gumbel: 0.0,
            w_t: 0.0,
            normal_weights: vec![0.6, 0.4],
            alpha_clayton: 1.0,
            alpha_frank: 1.0,
            alpha_gumbel: 1.5,
            nu: 10.0,
            theta_t: AngleVector::identity(2),
            theta_normals: vec![theta_a.clone(), theta_b.clone()],
        };
        // swap the labels: weights with matched angle vectors
        let mut m2 = m1.clone();
        m2.normal_weights = vec![0.4, 0.6];
        m2.theta_normals = vec![theta_b, theta_a];
        for pt in [[0.2, 0.3], [0.5, 0.9], [0.77, 0.11]] {
            let a = m1.log_density(&up(&pt)).unwrap();
            let b = m2.log_density(&up(&pt)).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let m = table1_model();
        let doc = ModelDocument::from_model(&m, None);
        let json = serde_json::to_string_pretty(&doc).unwrap();
        for field in [
            "\"weights\"",
            "\"clayton_alpha\"",
            "\"frank_alpha\"",
            "\"gumbel_alpha\"",
            "\"t_dof\"",
            "\"t_angles\"",
            "\"normal_angles\"",
            "\"dimension\"",
        ] {
            assert!(json.contains(field), "missing {}", field);
        }
        let parsed: ModelDocument = serde_json::from_str(&json).unwrap();
        let back = parsed.to_model().unwrap();
        assert_eq!(m, back);
    }
}
