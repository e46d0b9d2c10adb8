//! Hilbert coresets: sparse data weights chosen to keep the empirical
//! `(2,ν)`-Fisher distance between the weighted and full posteriors small.
//!
//! Both posteriors carry the same prior, so the score gap is
//! `Σ_j (1 - w_j)∇L_j(θ)` and the prior never enters the features.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::certificates::{check_slack_k, ConvexityCertificate, Theorem, WassersteinCertificate, ASSUME_PROJECTION};
use crate::error::{invalid, Error, Result};
use crate::fisher::{ComparabilityFactor, FisherEstimate, ReferenceMeasure};
use crate::model::{check_dim, DatumModel};

pub const DEFAULT_PROJECTION_SIZE: usize = 256;

/// Row `j` stacks `∇L_j(θ_i)/√S` over `S` draws `θ_i ~ ν`.
#[derive(Debug, Clone)]
pub struct GradientFeatureSet {
    features: DMatrix<f64>,
    block: usize,
    nu_seed: u64,
}

impl GradientFeatureSet {
    /// Wraps a precomputed `n × (S·d)` feature matrix whose columns come in
    /// blocks of `block = d` per draw.
    pub fn from_features(features: DMatrix<f64>, block: usize, nu_seed: u64) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if block == 0 || !features.ncols().is_multiple_of(block) {
            return Err(invalid("feature columns must split into whole per-draw blocks"));
        }
        Ok(Self {
            features,
            block,
            nu_seed,
        })
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn n_data(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_draws(&self) -> usize {
        self.features.ncols() / self.block
    }

    pub fn nu_seed(&self) -> u64 {
        self.nu_seed
    }

    /// Score gap `Σ_j (w_j - 1)·row_j` in feature space.
    fn gap(&self, w: &[f64]) -> DVector<f64> {
        let c = DVector::from_iterator(w.len(), w.iter().map(|x| x - 1.0));
        self.features.tr_mul(&c)
    }

    /// Empirical `F_{2,ν̂}(π̂_w ‖ π)`.
    pub fn objective(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.n_data(), w.len())?;
        Ok(self.gap(w).norm())
    }

    /// The objective with a delta-method standard error over the `S` draws.
    pub fn objective_with_error(&self, w: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.n_data(), w.len())?;
        let gap = self.gap(w);
        let s = self.n_draws();
        // each block holds ∇-gap(θ_i)/√S, so S·‖block‖² is the per-draw statistic
        let stats: Vec<f64> = (0..s)
            .map(|i| s as f64 * gap.rows(i * self.block, self.block).norm_squared())
            .collect();
        let mean = stats.iter().sum::<f64>() / s as f64;
        let var = stats.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s as f64 - 1.0).max(1.0);
        let value = mean.sqrt();
        let se = if value > 0.0 { (var / s as f64).sqrt() / (2.0 * value) } else { 0.0 };
        Ok((value, se))
    }
}

/// Builds per-datum gradient features at `s` draws from `nu`.
pub fn gradient_feature_matrix(
    model: &dyn DatumModel,
    nu: &ReferenceMeasure,
    s: usize,
    seed: u64,
) -> Result<GradientFeatureSet> {
    let d = model.dim();
    check_dim(d, nu.dim())?;
    if s == 0 {
        return Err(invalid("need at least one projection draw"));
    }
    let n = model.n_data();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let draws = nu.draws(seed, s);
    let scale = 1.0 / (s as f64).sqrt();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut row = vec![0.0; s * d];
            for (i, theta) in draws.iter().enumerate() {
                model.datum_grad(j, theta, &mut row[i * d..(i + 1) * d]);
            }
            row.iter_mut().for_each(|v| *v *= scale);
            row
        })
        .collect();
    for (j, row) in rows.iter().enumerate() {
        if let Some(pos) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                index: j,
                point: draws[pos / d].clone(),
            });
        }
    }
    let features = DMatrix::from_fn(n, s * d, |j, c| rows[j][c]);
    GradientFeatureSet::from_features(features, d, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoresetResult {
    pub weights: Vec<f64>,
    pub support_size: usize,
    /// Objective after each of the `K` iterations (the first is the initial atom).
    pub objective_trace: Vec<f64>,
    pub certificate: Option<WassersteinCertificate>,
}

/// Frank–Wolfe on `{w ≥ 0, Σw = n}` for `‖Σ_j (w_j - 1)·row_j‖²` with exact
/// line search. Iteration 1 places all mass on the best single atom; each
/// further iteration adds at most one atom, so `‖w‖₀ ≤ K`.
pub fn build_coreset_fw(fs: &GradientFeatureSet, k: usize) -> Result<CoresetResult> {
    if k < 1 {
        return Err(invalid("need at least one iteration"));
    }
    let phi = fs.features();
    let n = fs.n_data();
    let mass = n as f64;
    let target: DVector<f64> = phi.row_sum().transpose();

    let best_atom = (0..n)
        .map(|j| (j, (&target - phi.row(j).transpose() * mass).norm_squared()))
        .fold((0, f64::INFINITY), |acc, (j, v)| if v < acc.1 { (j, v) } else { acc });
    let mut w = vec![0.0; n];
    w[best_atom.0] = mass;
    let mut approx: DVector<f64> = phi.row(best_atom.0).transpose() * mass;
    let mut trace = vec![(&target - &approx).norm()];

    for _ in 1..k {
        let resid = &target - &approx;
        let scores = phi * &resid;
        let j = scores.imax();
        let dir: DVector<f64> = phi.row(j).transpose() * mass - &approx;
        let dd = dir.norm_squared();
        let gamma = if dd > 0.0 { (resid.dot(&dir) / dd).clamp(0.0, 1.0) } else { 0.0 };
        let last = *trace.last().expect("trace starts nonempty");
        if gamma > 0.0 {
            let cand: DVector<f64> = &approx * (1.0 - gamma) + phi.row(j).transpose() * (gamma * mass);
            let obj = (&target - &cand).norm();
            // a step that only looks worse through rounding is skipped
            if obj <= last {
                w.iter_mut().for_each(|v| *v *= 1.0 - gamma);
                w[j] += gamma * mass;
                approx = cand;
                trace.push(obj);
                continue;
            }
        }
        trace.push(last);
    }
    let support_size = w.iter().filter(|v| **v > 0.0).count();
    Ok(CoresetResult {
        weights: w,
        support_size,
        objective_trace: trace,
        certificate: None,
    })
}

/// `W_p(π̂_w, π) ≤ α⁻¹·B_p·F`, with `F` a fresh Monte Carlo Fisher estimate when
/// supplied, else the projected objective (flagged as a projection estimate).
pub fn coreset_certificate(
    cert: &ConvexityCertificate,
    b: &ComparabilityFactor,
    objective_value: f64,
    fisher_check: Option<&FisherEstimate>,
    k: f64,
) -> Result<WassersteinCertificate> {
    check_slack_k(k)?;
    if !b.is_finite() {
        return Err(Error::NoCertificate(format!("comparability factor B_{} is infinite", b.p)));
    }
    let mut assumptions = Vec::new();
    if cert.is_conditional() {
        assumptions.push(crate::certificates::ASSUME_ALPHA_USER.to_string());
    }
    let (f, se, n_samples, seed) = match fisher_check {
        Some(fe) => {
            if fe.p != 2 {
                return Err(invalid("the coreset certificate consumes F_{2,ν}"));
            }
            (fe.value, fe.std_error, Some(fe.n_samples), Some(fe.seed))
        }
        None => {
            if !(objective_value >= 0.0) {
                return Err(invalid("objective must be nonnegative"));
            }
            assumptions.push(ASSUME_PROJECTION.to_string());
            (objective_value, 0.0, None, None)
        }
    };
    Ok(WassersteinCertificate {
        theorem: Theorem::Coreset,
        p: b.p,
        bound: b.value * (f + k * se) / cert.alpha(),
        alpha: cert.alpha(),
        b_factor: b.value,
        fisher_value: Some(f),
        fisher_stderr: Some(se),
        slack_k: k,
        n_samples,
        seed,
        assumptions,
    })
}
