use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{PI, SQRT_2};

use super::{check_dim, Density1d, DiffLogDensity, Sampler, Tail, Univariate};
use crate::error::{invalid, Result};

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal quantile, accurate into the far lower tail.
pub fn normal_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    -SQRT_2 * erfc_inv(2.0 * u)
}

/// A multivariate normal with symmetric positive-definite covariance.
#[derive(Debug, Clone)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det_cov: f64,
}

impl GaussianMeasure {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(invalid("Gaussian dimension must be positive"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(invalid(format!(
                "covariance is {}x{}, mean has length {d}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("Gaussian parameters must be finite"));
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (cov[(i, j)], cov[(j, i)]);
                if (a - b).abs() > 1e-10 * a.abs().max(b.abs()).max(1.0) {
                    return Err(invalid("covariance is not symmetric"));
                }
            }
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        let chol = Cholesky::new(sym.clone())
            .ok_or_else(|| invalid("covariance is not positive definite"))?;
        let chol_lower = chol.l();
        let log_det_cov = 2.0 * chol_lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision = chol.inverse();
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov: sym,
            chol_lower,
            precision,
            log_det_cov,
        })
    }

    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(invalid(format!("variance must be positive, got {variance}")));
        }
        Self::new(vec![mean], DMatrix::from_element(1, 1, variance))
    }

    pub fn diagonal(mean: Vec<f64>, variances: &[f64]) -> Result<Self> {
        if variances.len() != mean.len() {
            return Err(invalid("mean and variance lengths differ"));
        }
        Self::new(mean, DMatrix::from_diagonal(&DVector::from_column_slice(variances)))
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let v = vec![variance; mean.len()];
        Self::diagonal(mean, &v)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Standard deviation of the first coordinate.
    pub fn sd(&self) -> f64 {
        self.cov[(0, 0)].sqrt()
    }

    /// `∇Û(θ) = Σ^{-1}(θ - μ)` for the potential `Û = -log density`.
    pub fn potential_grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), theta.len())?;
        Ok(self.potential_grad_unchecked(theta))
    }

    fn potential_grad_unchecked(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += self.precision[(i, j)] * (theta[j] - self.mean[j]);
            }
            out[i] = acc;
        }
        out
    }

    /// Smallest eigenvalue of the precision, i.e. the strong-convexity constant of the potential.
    pub fn min_precision_eigenvalue(&self) -> f64 {
        1.0 / self.cov_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Spectral norm `‖Σ‖₂`.
    pub fn cov_spectral_norm(&self) -> f64 {
        self.cov_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn cov_eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.cov.clone()).eigenvalues.iter().cloned().collect()
    }

    pub fn log_det_cov(&self) -> f64 {
        self.log_det_cov
    }

    pub fn descriptor(&self) -> String {
        if self.dim() == 1 {
            format!("normal(mean={}, var={})", self.mean[0], self.cov[(0, 0)])
        } else {
            format!("normal(dim={})", self.dim())
        }
    }
}

impl DiffLogDensity for GaussianMeasure {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let g = self.potential_grad_unchecked(theta);
        let quad: f64 = g
            .iter()
            .zip(theta.iter().zip(self.mean.iter()))
            .map(|(gi, (t, m))| gi * (t - m))
            .sum();
        -0.5 * quad - 0.5 * self.log_det_cov - 0.5 * (self.dim() as f64) * (2.0 * PI).ln()
    }

    fn grad_log_density(&self, theta: &[f64]) -> Vec<f64> {
        self.potential_grad_unchecked(theta).into_iter().map(|v| -v).collect()
    }

    fn hess_log_density(&self, _theta: &[f64]) -> Option<DMatrix<f64>> {
        Some(-self.precision.clone())
    }

    fn strong_convexity(&self) -> Option<f64> {
        Some(self.min_precision_eigenvalue())
    }

    fn third_derivative_bound(&self) -> Option<f64> {
        Some(0.0)
    }

    fn tail(&self) -> Option<Tail> {
        (self.dim() == 1).then(|| self.tail_class())
    }
}

impl Sampler for GaussianMeasure {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            let mut acc = self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                acc += self.chol_lower[(i, j)] * zj;
            }
            out[i] = acc;
        }
    }
}

// The 1-D view uses the first coordinate; callers that need a genuinely
// univariate measure check `dim() == 1` first.
impl Density1d for GaussianMeasure {
    fn ln_pdf(&self, x: f64) -> f64 {
        let (m, s) = (self.mean[0], self.sd());
        let z = (x - m) / s;
        -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln()
    }

    fn location(&self) -> f64 {
        self.mean[0]
    }

    fn spread(&self) -> f64 {
        self.sd()
    }

    fn tail_class(&self) -> Tail {
        Tail::Gaussian {
            variance: self.cov[(0, 0)],
            mean: Some(self.mean[0]),
        }
    }

    fn truncation(&self, mass: f64) -> (f64, f64) {
        (self.quantile(mass), self.upper_quantile(mass))
    }
}

impl Univariate for GaussianMeasure {
    fn cdf(&self, x: f64) -> f64 {
        normal_cdf((x - self.mean[0]) / self.sd())
    }

    fn quantile(&self, u: f64) -> f64 {
        self.mean[0] + self.sd() * normal_quantile(u)
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        self.mean[0] - self.sd() * normal_quantile(q)
    }

    fn mean(&self) -> Option<f64> {
        Some(self.mean[0])
    }

    fn variance(&self) -> Option<f64> {
        Some(self.cov[(0, 0)])
    }

    fn mad(&self) -> Option<f64> {
        Some(self.sd() * (2.0 / PI).sqrt())
    }

    fn density_cap(&self) -> f64 {
        1.0 / (self.sd() * (2.0 * PI).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn potential_grad_examples() {
        let g = GaussianMeasure::isotropic(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(g.potential_grad(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let g = GaussianMeasure::univariate(1.0, 1.0).unwrap();
        assert!((g.potential_grad(&[0.0]).unwrap()[0] + 1.0).abs() < 1e-15);

        let g = GaussianMeasure::univariate(0.0, 4.0).unwrap();
        assert!((g.potential_grad(&[2.0]).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_covariances() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussianMeasure::new(vec![0.0, 0.0], asym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussianMeasure::new(vec![0.0, 0.0], indefinite).is_err());
        assert!(GaussianMeasure::univariate(0.0, 0.0).is_err());
        let g = GaussianMeasure::isotropic(vec![0.0; 2], 1.0).unwrap();
        assert!(g.potential_grad(&[1.0]).is_err());
    }

    #[test]
    fn quantile_inverts_cdf_into_the_tails() {
        let g = GaussianMeasure::univariate(0.3, 2.5).unwrap();
        for &u in &[1e-30, 1e-12, 1e-3, 0.2, 0.5, 0.9] {
            let x = g.quantile(u);
            let rel = (g.cdf(x) - u).abs() / u;
            assert!(rel < 1e-10, "u={u} rel={rel}");
        }
        let x = g.upper_quantile(1e-20);
        assert!((x - (0.3 + 2.5f64.sqrt() * 9.262340089798408)).abs() < 1e-8);
    }

    #[test]
    fn sampling_matches_moments() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let g = GaussianMeasure::new(vec![1.0, -1.0], cov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mut s = [0.0; 2];
        let mut cross = 0.0;
        let mut buf = [0.0; 2];
        for _ in 0..n {
            g.sample_into(&mut rng, &mut buf);
            s[0] += buf[0];
            s[1] += buf[1];
            cross += (buf[0] - 1.0) * (buf[1] + 1.0);
        }
        assert!((s[0] / n as f64 - 1.0).abs() < 0.02);
        assert!((s[1] / n as f64 + 1.0).abs() < 0.02);
        assert!((cross / n as f64 - 0.6).abs() < 0.02);
    }
}
