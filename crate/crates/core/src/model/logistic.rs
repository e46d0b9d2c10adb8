use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_dim, DatumModel, DiffLogDensity, Tail};
use crate::error::{invalid, Result};

/// `sup_z |s''(z)|` for `s = σ(1-σ)`, the third derivative of `log σ`.
pub const LOGISTIC_THIRD_DERIVATIVE_SUP: f64 = 0.096_225_044_864_937_64; // 1/(6√3)

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log σ(z)` without overflow.
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    -((-z).max(0.0) + (-z.abs()).exp().ln_1p())
}

/// Bayesian logistic regression with a zero-mean isotropic Gaussian prior.
#[derive(Debug, Clone)]
pub struct LogisticRegressionPosterior {
    design: DMatrix<f64>,
    labels: Vec<f64>,
    prior_precision: f64,
}

impl LogisticRegressionPosterior {
    pub fn new(design: DMatrix<f64>, labels: Vec<f64>, prior_precision: f64) -> Result<Self> {
        if design.nrows() != labels.len() {
            return Err(crate::Error::DimensionMismatch {
                expected: design.nrows(),
                got: labels.len(),
            });
        }
        if design.ncols() == 0 {
            return Err(invalid("design matrix has no columns"));
        }
        if !(prior_precision > 0.0 && prior_precision.is_finite()) {
            return Err(invalid(format!("prior precision must be positive, got {prior_precision}")));
        }
        if design.iter().any(|v| !v.is_finite()) {
            return Err(invalid("design matrix contains non-finite values"));
        }
        let labels = labels
            .into_iter()
            .map(|y| match y {
                y if y == 1.0 => Ok(1.0),
                y if y == -1.0 || y == 0.0 => Ok(-1.0),
                other => Err(invalid(format!("label {other} is not in {{-1, 0, 1}}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            design,
            labels,
            prior_precision,
        })
    }

    /// Synthetic data: standard normal covariates, labels drawn from the model at `theta_true`.
    pub fn synthetic(n: usize, theta_true: &[f64], prior_precision: f64, seed: u64) -> Result<Self> {
        let d = theta_true.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut design = DMatrix::zeros(n, d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mut z = 0.0;
            for k in 0..d {
                let x: f64 = rng.sample(StandardNormal);
                design[(i, k)] = x;
                z += x * theta_true[k];
            }
            let u: f64 = rng.random();
            labels.push(if u < sigmoid(z) { 1.0 } else { -1.0 });
        }
        Self::new(design, labels, prior_precision)
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn margin(&self, j: usize, theta: &[f64]) -> f64 {
        let row = self.design.row(j);
        self.labels[j] * row.iter().zip(theta).map(|(x, t)| x * t).sum::<f64>()
    }

    pub fn checked_grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.design.ncols(), theta.len())?;
        Ok(self.grad_log_density(theta))
    }

    /// Per-coordinate aggregate `v_k = Σ_j |x_jk|·‖x_j‖²` used by the third-derivative bound.
    fn third_derivative_weights(&self) -> Vec<f64> {
        let d = self.design.ncols();
        let mut v = vec![0.0; d];
        for j in 0..self.design.nrows() {
            let row = self.design.row(j);
            let sq: f64 = row.iter().map(|x| x * x).sum();
            for k in 0..d {
                v[k] += row[k].abs() * sq;
            }
        }
        v
    }
}

impl DatumModel for LogisticRegressionPosterior {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn n_data(&self) -> usize {
        self.design.nrows()
    }

    fn datum_log_likelihood(&self, j: usize, theta: &[f64]) -> f64 {
        log_sigmoid(self.margin(j, theta))
    }

    fn datum_grad(&self, j: usize, theta: &[f64], out: &mut [f64]) {
        let c = self.labels[j] * sigmoid(-self.margin(j, theta));
        for (o, x) in out.iter_mut().zip(self.design.row(j).iter()) {
            *o = c * x;
        }
    }

    fn datum_hess(&self, j: usize, theta: &[f64]) -> Option<DMatrix<f64>> {
        let s = sigmoid(self.margin(j, theta));
        let x = self.design.row(j).transpose();
        Some(&x * x.transpose() * -(s * (1.0 - s)))
    }

    fn prior_precision(&self) -> f64 {
        self.prior_precision
    }
}

impl DiffLogDensity for LogisticRegressionPosterior {
    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let prior = -0.5 * self.prior_precision * theta.iter().map(|t| t * t).sum::<f64>();
        (0..self.n_data())
            .map(|j| log_sigmoid(self.margin(j, theta)))
            .sum::<f64>()
            + prior
    }

    fn grad_log_density(&self, theta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = theta.iter().map(|t| -self.prior_precision * t).collect();
        for j in 0..self.n_data() {
            let c = self.labels[j] * sigmoid(-self.margin(j, theta));
            for (gi, x) in g.iter_mut().zip(self.design.row(j).iter()) {
                *gi += c * x;
            }
        }
        g
    }

    fn hess_log_density(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let d = self.design.ncols();
        let mut h = DMatrix::<f64>::identity(d, d) * -self.prior_precision;
        for j in 0..self.n_data() {
            h += self.datum_hess(j, theta)?;
        }
        Some(h)
    }

    /// The likelihood is log-concave, so the prior precision is a global constant.
    fn strong_convexity(&self) -> Option<f64> {
        Some(self.prior_precision)
    }

    fn third_derivative_bound(&self) -> Option<f64> {
        let v = self.third_derivative_weights();
        Some(LOGISTIC_THIRD_DERIVATIVE_SUP * v.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    fn tail(&self) -> Option<Tail> {
        (self.design.ncols() == 1).then_some(Tail::Gaussian {
            variance: 1.0 / self.prior_precision,
            mean: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(m: &LogisticRegressionPosterior, theta: &[f64]) -> Vec<f64> {
        (0..theta.len())
            .map(|k| {
                let step = 1e-5 * (1.0 + theta[k].abs());
                let mut p = theta.to_vec();
                let mut q = theta.to_vec();
                p[k] += step;
                q[k] -= step;
                (m.log_density(&p) - m.log_density(&q)) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn zero_design_is_prior_only() {
        let m = LogisticRegressionPosterior::new(DMatrix::zeros(4, 2), vec![1.0, -1.0, 0.0, 1.0], 2.5).unwrap();
        let g = m.checked_grad(&[0.4, -1.2]).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-15 && (g[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_datum_at_origin() {
        let m = LogisticRegressionPosterior::new(DMatrix::from_element(1, 1, 1.0), vec![1.0], 1.0).unwrap();
        assert!((m.checked_grad(&[0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
        assert!(m.checked_grad(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = LogisticRegressionPosterior::synthetic(20, &[1.0, -0.5, 0.3], 1.0, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let theta: Vec<f64> = (0..3).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let g = m.grad_log_density(&theta);
            let f = fd_grad(&m, &theta);
            let scale = g.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (a, b) in g.iter().zip(&f) {
                assert!((a - b).abs() / scale < 1e-5);
            }
        }
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) + 2f64.ln()).abs() < 1e-15);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
    }

    #[test]
    fn third_derivative_constant() {
        let s3 = 1.0 / (6.0 * 3f64.sqrt());
        assert!((LOGISTIC_THIRD_DERIVATIVE_SUP - s3).abs() < 1e-16);
        // attained at z = ln(2 ± √3)
        let z = (2.0 + 3f64.sqrt()).ln();
        let s = sigmoid(z);
        assert!(((s * (1.0 - s) * (1.0 - 2.0 * s)).abs() - s3).abs() < 1e-12);
    }
}
