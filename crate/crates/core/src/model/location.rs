use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DatumModel, GaussianMeasure};
use crate::error::{invalid, Result};

/// `x_j ~ N(θ, σ²I)` with prior `θ ~ N(0, τ⁻¹I)`.
///
/// Every weighted posterior is Gaussian in closed form, which makes this the
/// reference model for coreset checks.
#[derive(Debug, Clone)]
pub struct GaussianLocationModel {
    data: DMatrix<f64>,
    noise_variance: f64,
    prior_precision: f64,
}

impl GaussianLocationModel {
    pub fn new(data: DMatrix<f64>, noise_variance: f64, prior_precision: f64) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(crate::Error::EmptyDataset);
        }
        if data.ncols() == 0 {
            return Err(invalid("observations have zero dimension"));
        }
        if !(noise_variance > 0.0) || !(prior_precision > 0.0) {
            return Err(invalid("noise variance and prior precision must be positive"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observations must be finite"));
        }
        Ok(Self {
            data,
            noise_variance,
            prior_precision,
        })
    }

    /// `n` draws from `N(theta_true, noise_variance·I)`.
    pub fn synthetic(
        n: usize,
        theta_true: &[f64],
        noise_variance: f64,
        prior_precision: f64,
        seed: u64,
    ) -> Result<Self> {
        let d = theta_true.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = noise_variance.sqrt();
        let data = DMatrix::from_fn(n, d, |_, k| {
            let z: f64 = rng.sample(StandardNormal);
            theta_true[k] + sd * z
        });
        Self::new(data, noise_variance, prior_precision)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// The weighted posterior `N(m_w, P_w⁻¹ I)` with `P_w = τ + Σw/σ²`.
    pub fn posterior(&self, weights: &[f64]) -> Result<GaussianMeasure> {
        if weights.len() != self.data.nrows() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.data.nrows(),
                got: weights.len(),
            });
        }
        let d = self.data.ncols();
        let total: f64 = weights.iter().sum();
        let precision = self.prior_precision + total / self.noise_variance;
        let mut mean = vec![0.0; d];
        for (j, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                for (k, m) in mean.iter_mut().enumerate() {
                    *m += w * self.data[(j, k)];
                }
            }
        }
        for m in mean.iter_mut() {
            *m /= self.noise_variance * precision;
        }
        GaussianMeasure::isotropic(mean, 1.0 / precision)
    }
}

impl DatumModel for GaussianLocationModel {
    fn dim(&self) -> usize {
        self.data.ncols()
    }

    fn n_data(&self) -> usize {
        self.data.nrows()
    }

    fn datum_log_likelihood(&self, j: usize, theta: &[f64]) -> f64 {
        let sq: f64 = theta
            .iter()
            .enumerate()
            .map(|(k, t)| (self.data[(j, k)] - t).powi(2))
            .sum();
        -0.5 * sq / self.noise_variance
    }

    fn datum_grad(&self, j: usize, theta: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = (self.data[(j, k)] - theta[k]) / self.noise_variance;
        }
    }

    fn datum_hess(&self, _j: usize, _theta: &[f64]) -> Option<DMatrix<f64>> {
        let d = self.data.ncols();
        Some(DMatrix::identity(d, d) * (-1.0 / self.noise_variance))
    }

    fn datum_curvature(&self, _j: usize) -> f64 {
        1.0 / self.noise_variance
    }

    fn prior_precision(&self) -> f64 {
        self.prior_precision
    }
}
