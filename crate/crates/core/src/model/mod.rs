//! Log-density abstractions and the concrete model families.
//!
//! Every density here is handled through its score, `∇ log p`. The
//! normalizing constant of a posterior is never needed by the certificate
//! machinery, so [`DiffLogDensity::log_density`] is only defined up to an
//! additive constant. The 1-D closed-form families additionally implement
//! [`Univariate`], which exposes the normalized density, CDF and quantiles
//! used by divergences, comparability factors and the oracles.

mod dataset;
mod gaussian;
mod location;
mod logistic;
mod quartic;
mod student_t;
mod summary;

pub use dataset::{load_dataset, load_observations, parse_dataset, parse_observations};
pub use gaussian::{normal_cdf, normal_quantile, GaussianMeasure};
pub use location::GaussianLocationModel;
pub use logistic::{LogisticRegressionPosterior, LOGISTIC_THIRD_DERIVATIVE_SUP};
pub use quartic::{quartic_third_derivative_sup, QuarticGaussian};
pub use student_t::StudentTMeasure;
pub use summary::{summarize, EmpiricalSummary, IntervalProbability};

use nalgebra::DMatrix;
use rand::RngCore;

/// A density on ℝ^d known through its log density (up to a constant) and score.
pub trait DiffLogDensity: Send + Sync {
    fn dim(&self) -> usize;

    /// Log density up to an additive constant.
    fn log_density(&self, theta: &[f64]) -> f64;

    /// Gradient of the log density, i.e. minus the potential gradient.
    fn grad_log_density(&self, theta: &[f64]) -> Vec<f64>;

    fn hess_log_density(&self, _theta: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Global strong-convexity constant of `-log p`, when the family certifies one.
    fn strong_convexity(&self) -> Option<f64> {
        None
    }

    /// A constant `M` with `sup_θ Σ_j ‖∇²∂_j log p(θ)‖₂² ≤ M²`, when the family
    /// supplies one analytically.
    fn third_derivative_bound(&self) -> Option<f64> {
        None
    }

    /// Tail class of a one-dimensional density.
    fn tail(&self) -> Option<Tail> {
        None
    }
}

/// Asymptotic tail behaviour of a 1-D density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    /// `log p(x) = -x²/(2·variance) + O(|x|)`; `mean` is known when the
    /// linear term is exactly that of a Gaussian centred there.
    Gaussian { variance: f64, mean: Option<f64> },
    /// `p(x) ~ |x|^(-exponent)`.
    Polynomial { exponent: f64 },
}

impl Tail {
    /// Whether `num/den` stays bounded as `|x| → ∞`.
    pub fn ratio_bounded(num: Tail, den: Tail) -> bool {
        match (num, den) {
            (Tail::Gaussian { variance: vn, mean: mn }, Tail::Gaussian { variance: vd, mean: md }) => {
                if vn < vd {
                    true
                } else if vn == vd {
                    matches!((mn, md), (Some(a), Some(b)) if a == b)
                } else {
                    false
                }
            }
            (Tail::Gaussian { .. }, Tail::Polynomial { .. }) => true,
            (Tail::Polynomial { .. }, Tail::Gaussian { .. }) => false,
            (Tail::Polynomial { exponent: a }, Tail::Polynomial { exponent: b }) => a >= b,
        }
    }

    /// Whether `∫ num²/den` converges in the tails.
    pub fn square_ratio_integrable(num: Tail, den: Tail) -> bool {
        match (num, den) {
            (Tail::Gaussian { variance: vn, .. }, Tail::Gaussian { variance: vd, .. }) => 2.0 * vd > vn,
            (Tail::Gaussian { .. }, Tail::Polynomial { .. }) => true,
            (Tail::Polynomial { .. }, Tail::Gaussian { .. }) => false,
            (Tail::Polynomial { exponent: a }, Tail::Polynomial { exponent: b }) => 2.0 * a - b > 1.0,
        }
    }

    /// Whether `p log(p/q)` is integrable in the tails (p = num, q = den).
    pub fn kl_integrable(num: Tail, den: Tail) -> bool {
        match (num, den) {
            (Tail::Gaussian { .. }, _) => true,
            (Tail::Polynomial { .. }, Tail::Gaussian { .. }) => false,
            (Tail::Polynomial { exponent: a }, Tail::Polynomial { .. }) => a > 1.0,
        }
    }
}

/// A normalized one-dimensional density.
pub trait Density1d: Send + Sync {
    fn ln_pdf(&self, x: f64) -> f64;

    fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Centre and spread used to place quadrature grids.
    fn location(&self) -> f64;
    fn spread(&self) -> f64;

    fn tail_class(&self) -> Tail;

    /// `(lo, hi)` such that each tail beyond carries at most `mass`.
    fn truncation(&self, mass: f64) -> (f64, f64);
}

/// A 1-D family with closed-form (or accurately computable) CDF and moments.
pub trait Univariate: Density1d {
    fn cdf(&self, x: f64) -> f64;

    /// `F^{-1}(u)`.
    fn quantile(&self, u: f64) -> f64;

    /// `F^{-1}(1 - q)`, accurate for tiny `q`.
    fn upper_quantile(&self, q: f64) -> f64;

    fn mean(&self) -> Option<f64>;
    fn variance(&self) -> Option<f64>;

    /// Mean absolute deviation about the mean.
    fn mad(&self) -> Option<f64>;

    /// Supremum of the density.
    fn density_cap(&self) -> f64;
}

/// Source of i.i.d. draws.
pub trait Sampler: Send + Sync {
    fn dim(&self) -> usize;
    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]);
}

/// Conditionally independent likelihood terms with an isotropic Gaussian prior.
pub trait DatumModel: Send + Sync {
    fn dim(&self) -> usize;
    fn n_data(&self) -> usize;
    fn datum_log_likelihood(&self, j: usize, theta: &[f64]) -> f64;
    /// Writes `∇L_j(θ)` into `out`.
    fn datum_grad(&self, j: usize, theta: &[f64], out: &mut [f64]);
    fn datum_hess(&self, j: usize, theta: &[f64]) -> Option<DMatrix<f64>>;
    /// Lower bound on the curvature of `-L_j`.
    fn datum_curvature(&self, _j: usize) -> f64 {
        0.0
    }
    /// Precision of the zero-mean isotropic Gaussian prior.
    fn prior_precision(&self) -> f64;
}

/// The weighted posterior `exp{Σ_j w_j L_j(θ)} π₀(θ)`.
pub struct WeightedPosterior<'a> {
    model: &'a dyn DatumModel,
    weights: Vec<f64>,
}

impl<'a> WeightedPosterior<'a> {
    pub fn new(model: &'a dyn DatumModel, weights: Vec<f64>) -> crate::Result<Self> {
        if weights.len() != model.n_data() {
            return Err(crate::Error::DimensionMismatch {
                expected: model.n_data(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(crate::error::invalid("weights must be finite and nonnegative"));
        }
        Ok(Self { model, weights })
    }

    pub fn full(model: &'a dyn DatumModel) -> Self {
        Self {
            model,
            weights: vec![1.0; model.n_data()],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl DiffLogDensity for WeightedPosterior<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        let prior = -0.5 * self.model.prior_precision() * theta.iter().map(|t| t * t).sum::<f64>();
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(j, w)| w * self.model.datum_log_likelihood(j, theta))
            .sum::<f64>()
            + prior
    }

    fn grad_log_density(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.model.dim();
        let tau = self.model.prior_precision();
        let mut g: Vec<f64> = theta.iter().map(|t| -tau * t).collect();
        let mut buf = vec![0.0; d];
        for (j, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                self.model.datum_grad(j, theta, &mut buf);
                for (gi, bi) in g.iter_mut().zip(&buf) {
                    *gi += w * bi;
                }
            }
        }
        g
    }

    fn hess_log_density(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let d = self.model.dim();
        let mut h = DMatrix::<f64>::identity(d, d) * -self.model.prior_precision();
        for (j, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                h += self.model.datum_hess(j, theta)? * w;
            }
        }
        Some(h)
    }

    fn strong_convexity(&self) -> Option<f64> {
        let data: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * self.model.datum_curvature(j))
            .sum();
        Some(self.model.prior_precision() + data)
    }
}

/// Closed-form measures accepted as targets, approximations or reference measures.
#[derive(Debug, Clone)]
pub enum Measure {
    Gaussian(GaussianMeasure),
    StudentT(StudentTMeasure),
}

impl Measure {
    pub fn as_gaussian(&self) -> Option<&GaussianMeasure> {
        match self {
            Measure::Gaussian(g) => Some(g),
            _ => None,
        }
    }

    pub fn measure_dim(&self) -> usize {
        match self {
            Measure::Gaussian(g) => g.dim(),
            Measure::StudentT(_) => 1,
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            Measure::Gaussian(g) => g.descriptor(),
            Measure::StudentT(t) => t.descriptor(),
        }
    }

    pub fn as_univariate(&self) -> crate::Result<&dyn Univariate> {
        if self.measure_dim() != 1 {
            return Err(crate::Error::DimensionMismatch {
                expected: 1,
                got: self.measure_dim(),
            });
        }
        Ok(match self {
            Measure::Gaussian(g) => g,
            Measure::StudentT(t) => t,
        })
    }

    pub fn as_density(&self) -> &dyn DiffLogDensity {
        match self {
            Measure::Gaussian(g) => g,
            Measure::StudentT(t) => t,
        }
    }
}

impl Sampler for Measure {
    fn dim(&self) -> usize {
        self.measure_dim()
    }

    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        match self {
            Measure::Gaussian(g) => g.sample_into(rng, out),
            Measure::StudentT(t) => t.sample_into(rng, out),
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> crate::Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(crate::Error::DimensionMismatch { expected, got })
    }
}
