use nalgebra::{DMatrix, DVector};

use super::{check_dim, DiffLogDensity, Tail};
use crate::error::{invalid, Result};

/// Gaussian with a bounded-third-derivative quartic bump on each coordinate:
///
/// `U(θ) = Σ_i ½a(θ_i - m)² + (b/4)·g(θ_i - c)`, with `g(u) = u⁴/(1+u²)`.
///
/// `g` behaves like `u⁴` near the origin and like `u²` far out, so the potential
/// stays `a`-strongly convex while `g'''` remains bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticGaussian {
    dim: usize,
    curvature: f64,
    center: f64,
    quartic: f64,
    shift: f64,
}

fn g(u: f64) -> f64 {
    let u2 = u * u;
    u2 * u2 / (1.0 + u2)
}

fn g1(u: f64) -> f64 {
    let s = 1.0 + u * u;
    2.0 * u - 2.0 * u / (s * s)
}

fn g2(u: f64) -> f64 {
    let s = 1.0 + u * u;
    2.0 + (6.0 * u * u - 2.0) / (s * s * s)
}

fn g3(u: f64) -> f64 {
    let s = 1.0 + u * u;
    24.0 * u * (1.0 - u * u) / (s * s * s * s)
}

/// `sup_u |g'''(u)|`, attained at `u² = 1 ± 2/√5`.
pub fn quartic_third_derivative_sup() -> f64 {
    let r = 2.0 / 5f64.sqrt();
    [1.0 - r, 1.0 + r]
        .iter()
        .map(|u2| g3(u2.sqrt()).abs())
        .fold(0.0, f64::max)
}

impl QuarticGaussian {
    pub fn new(dim: usize, curvature: f64, center: f64, quartic: f64, shift: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(invalid(format!("curvature must be positive, got {curvature}")));
        }
        if !(quartic >= 0.0 && quartic.is_finite()) || !center.is_finite() || !shift.is_finite() {
            return Err(invalid("quartic weight must be nonnegative and all parameters finite"));
        }
        Ok(Self {
            dim,
            curvature,
            center,
            quartic,
            shift,
        })
    }

    /// Potential gradient of one coordinate.
    fn coord_grad(&self, t: f64) -> f64 {
        self.curvature * (t - self.center) + 0.25 * self.quartic * g1(t - self.shift)
    }

    pub fn potential(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.dim, theta.len())?;
        Ok(-self.log_density(theta))
    }

    /// Hessian of the potential at a point, as a diagonal.
    pub fn potential_hess_diag(&self, theta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.dim,
            theta
                .iter()
                .map(|t| self.curvature + 0.25 * self.quartic * g2(t - self.shift)),
        )
    }
}

impl DiffLogDensity for QuarticGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        -theta
            .iter()
            .map(|t| {
                let u = t - self.center;
                0.5 * self.curvature * u * u + 0.25 * self.quartic * g(t - self.shift)
            })
            .sum::<f64>()
    }

    fn grad_log_density(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| -self.coord_grad(*t)).collect()
    }

    fn hess_log_density(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_diagonal(&-self.potential_hess_diag(theta)))
    }

    /// `g'' ≥ 0`, so the quadratic part alone certifies the constant.
    fn strong_convexity(&self) -> Option<f64> {
        Some(self.curvature)
    }

    /// Each `∇²∂_j log p` is diagonal with one nonzero entry `(b/4)·g'''`.
    fn third_derivative_bound(&self) -> Option<f64> {
        Some((self.dim as f64).sqrt() * 0.25 * self.quartic * quartic_third_derivative_sup())
    }

    fn tail(&self) -> Option<Tail> {
        // g(u) = u² - 1 + 1/(1+u²), so the potential is an exact quadratic plus a bounded term.
        let k = self.curvature + 0.5 * self.quartic;
        (self.dim == 1).then_some(Tail::Gaussian {
            variance: 1.0 / k,
            mean: Some((self.curvature * self.center + 0.5 * self.quartic * self.shift) / k),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_are_consistent() {
        for i in -40..=40 {
            let u = i as f64 * 0.137;
            let h = 1e-5 * (1.0 + u.abs());
            assert!(((g(u + h) - g(u - h)) / (2.0 * h) - g1(u)).abs() < 1e-7);
            assert!(((g1(u + h) - g1(u - h)) / (2.0 * h) - g2(u)).abs() < 1e-7);
            assert!(((g2(u + h) - g2(u - h)) / (2.0 * h) - g3(u)).abs() < 1e-7);
            assert!(g2(u) >= 0.0);
        }
    }

    #[test]
    fn third_derivative_sup_dominates_a_fine_scan() {
        let sup = quartic_third_derivative_sup();
        let scan = (0..200_000)
            .map(|i| g3(-10.0 + i as f64 * 1e-4).abs())
            .fold(0.0, f64::max);
        assert!(scan <= sup + 1e-12);
        assert!(sup - scan < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(QuarticGaussian::new(0, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(QuarticGaussian::new(1, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(QuarticGaussian::new(1, 1.0, 0.0, -1.0, 0.0).is_err());
        let q = QuarticGaussian::new(2, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert!(q.potential(&[0.0]).is_err());
    }
}
