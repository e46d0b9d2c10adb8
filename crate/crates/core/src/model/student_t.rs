use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use super::{normal_quantile, Density1d, DiffLogDensity, Sampler, Tail, Univariate};
use crate::error::{invalid, Result};

/// Location-scale Student-t distribution with `dof` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTMeasure {
    dof: f64,
    location: f64,
    scale: f64,
}

impl StudentTMeasure {
    pub fn new(dof: f64, location: f64, scale: f64) -> Result<Self> {
        if !(dof > 0.0 && dof.is_finite()) {
            return Err(invalid(format!("degrees of freedom must be positive, got {dof}")));
        }
        if !(scale > 0.0 && scale.is_finite()) || !location.is_finite() {
            return Err(invalid("Student-t location must be finite and scale positive"));
        }
        Ok(Self { dof, location, scale })
    }

    pub fn standard(dof: f64) -> Result<Self> {
        Self::new(dof, 0.0, 1.0)
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `h/(h-2)·scale²`; only defined for `h > 2`.
    pub fn checked_variance(&self) -> Result<f64> {
        if self.dof > 2.0 {
            Ok(self.dof / (self.dof - 2.0) * self.scale * self.scale)
        } else {
            Err(invalid(format!(
                "variance of a t distribution requires dof > 2, got {}",
                self.dof
            )))
        }
    }

    /// Derivative of the potential `-log p`; for the standard case `(h+1)θ/(h+θ²)`.
    pub fn potential_grad(&self, theta: f64) -> f64 {
        let u = theta - self.location;
        (self.dof + 1.0) * u / (self.dof * self.scale * self.scale + u * u)
    }

    fn log_norm(&self) -> f64 {
        let h = self.dof;
        ln_gamma(0.5 * (h + 1.0)) - ln_gamma(0.5 * h) - 0.5 * (h * PI).ln() - self.scale.ln()
    }

    /// Lower-tail probability of the standardized variable at `z <= 0`.
    fn std_lower_tail(&self, z: f64) -> f64 {
        let h = self.dof;
        let z2 = z * z;
        if z2 < h {
            0.5 - 0.5 * beta_reg(0.5, 0.5 * h, z2 / (h + z2))
        } else {
            0.5 * beta_reg(0.5 * h, 0.5, h / (h + z2))
        }
    }

    fn std_pdf(&self, z: f64) -> f64 {
        let h = self.dof;
        (ln_gamma(0.5 * (h + 1.0)) - ln_gamma(0.5 * h) - 0.5 * (h * PI).ln()
            - 0.5 * (h + 1.0) * (z * z / h).ln_1p())
        .exp()
    }

    /// Solves `P(Z <= z) = u` for `u < 1/2` in the variable `t = ln(-z)`.
    fn std_lower_quantile(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u < 0.5);
        let target = u.ln();
        let g = |t: f64| self.std_lower_tail(-t.exp()).ln();
        let start = (-normal_quantile(u)).max(1e-6).ln();
        let (mut lo, mut hi) = (start, start);
        let mut step = 1.0;
        while g(lo) < target {
            lo -= step;
            step *= 2.0;
            if lo < -700.0 {
                break;
            }
        }
        step = 1.0;
        while g(hi) > target {
            hi += step;
            step *= 2.0;
            if hi > 700.0 {
                break;
            }
        }
        let mut t = start.clamp(lo, hi);
        for _ in 0..200 {
            let z = -t.exp();
            let tail = self.std_lower_tail(z);
            let val = tail.ln() - target;
            if val > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            // d ln G / dt = pdf(z)·z / G
            let slope = self.std_pdf(z) * z / tail;
            let mut next = t - val / slope;
            if !next.is_finite() || next <= lo || next >= hi {
                next = 0.5 * (lo + hi);
            }
            let done = (next - t).abs() <= 1e-15 * t.abs().max(1.0) || (hi - lo) <= 1e-15 * hi.abs().max(1.0);
            t = next;
            if done {
                break;
            }
        }
        -t.exp()
    }

    pub fn descriptor(&self) -> String {
        format!(
            "student_t(dof={}, location={}, scale={})",
            self.dof, self.location, self.scale
        )
    }
}

impl DiffLogDensity for StudentTMeasure {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, theta: &[f64]) -> f64 {
        self.ln_pdf(theta[0])
    }

    fn grad_log_density(&self, theta: &[f64]) -> Vec<f64> {
        vec![-self.potential_grad(theta[0])]
    }

    fn hess_log_density(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let u = theta[0] - self.location;
        let hs2 = self.dof * self.scale * self.scale;
        let v = -(self.dof + 1.0) * (hs2 - u * u) / ((hs2 + u * u) * (hs2 + u * u));
        Some(DMatrix::from_element(1, 1, v))
    }

    fn tail(&self) -> Option<Tail> {
        Some(self.tail_class())
    }
}

impl Sampler for StudentTMeasure {
    fn dim(&self) -> usize {
        1
    }

    fn sample_into(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = rng.sample(StandardNormal);
        let chi = ChiSquared::new(self.dof).expect("dof validated at construction");
        let v: f64 = chi.sample(rng);
        out[0] = self.location + self.scale * z / (v / self.dof).sqrt();
    }
}

impl Density1d for StudentTMeasure {
    fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        self.log_norm() - 0.5 * (self.dof + 1.0) * (z * z / self.dof).ln_1p()
    }

    fn location(&self) -> f64 {
        self.location
    }

    fn spread(&self) -> f64 {
        self.scale
    }

    fn tail_class(&self) -> Tail {
        Tail::Polynomial {
            exponent: self.dof + 1.0,
        }
    }

    fn truncation(&self, mass: f64) -> (f64, f64) {
        (self.quantile(mass), self.upper_quantile(mass))
    }
}

impl Univariate for StudentTMeasure {
    fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if z <= 0.0 {
            self.std_lower_tail(z)
        } else {
            1.0 - self.std_lower_tail(-z)
        }
    }

    fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        if u == 0.5 {
            return self.location;
        }
        if u > 0.5 {
            return self.upper_quantile(1.0 - u);
        }
        self.location + self.scale * self.std_lower_quantile(u)
    }

    fn upper_quantile(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return f64::INFINITY;
        }
        if q >= 1.0 {
            return f64::NEG_INFINITY;
        }
        if q == 0.5 {
            return self.location;
        }
        if q > 0.5 {
            return self.quantile(1.0 - q);
        }
        self.location - self.scale * self.std_lower_quantile(q)
    }

    fn mean(&self) -> Option<f64> {
        (self.dof > 1.0).then_some(self.location)
    }

    fn variance(&self) -> Option<f64> {
        self.checked_variance().ok()
    }

    fn mad(&self) -> Option<f64> {
        let h = self.dof;
        (h > 1.0).then(|| {
            let lg = ln_gamma(0.5 * (h + 1.0)) - ln_gamma(0.5 * h);
            2.0 * self.scale * h.sqrt() * lg.exp() / (PI.sqrt() * (h - 1.0))
        })
    }

    fn density_cap(&self) -> f64 {
        self.log_norm().exp()
    }
}
