//! KL, χ², Hellinger and total-variation divergences, the guarantees KL
//! offers for means and interval probabilities, and a Gaussian pair whose
//! small KL hides a large mean error.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::model::{check_dim, Density1d, GaussianMeasure, Tail};
use crate::quadrature::RealLine;

const QUAD_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    Kl,
    Chi2,
    HellingerSq,
    Tv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Quadrature,
}

/// A divergence value, or the record that it is infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Divergence {
    Finite {
        kind: DivergenceKind,
        value: f64,
        method: Method,
    },
    Infinite {
        kind: DivergenceKind,
        reason: String,
    },
}

impl Divergence {
    pub fn value(&self) -> f64 {
        match self {
            Divergence::Finite { value, .. } => *value,
            Divergence::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Divergence::Infinite { .. })
    }

    pub fn method(&self) -> Option<Method> {
        match self {
            Divergence::Finite { method, .. } => Some(*method),
            Divergence::Infinite { .. } => None,
        }
    }

    fn finite(kind: DivergenceKind, value: f64, method: Method) -> Self {
        let value = value.max(0.0);
        let value = match kind {
            DivergenceKind::Tv => value.min(1.0),
            DivergenceKind::HellingerSq => value.min(2.0),
            _ => value,
        };
        Divergence::Finite { kind, value, method }
    }
}

/// `KL(η̂ ‖ η)` for Gaussians of any (equal) dimension.
pub fn kl_gaussian(eta_hat: &GaussianMeasure, eta: &GaussianMeasure) -> Result<f64> {
    check_dim(eta.dim(), eta_hat.dim())?;
    let d = eta.dim() as f64;
    let p = eta.precision();
    let trace = (p * eta_hat.cov()).trace();
    let diff = eta_hat.mean() - eta.mean();
    let quad = (diff.transpose() * p * &diff)[(0, 0)];
    Ok((0.5 * (trace - d + eta.log_det_cov() - eta_hat.log_det_cov() + quad)).max(0.0))
}

/// A Gaussian pair `η̂ = N(0, σ̂²)`, `η = N(gap, e^{2δ}σ̂²)` with `KL(η̂‖η) = δ`
/// whose mean gap is `σ̂(e^{2δ}-1)^{1/2}`.
#[derive(Debug, Clone)]
pub struct KLPathologyA {
    pub delta: f64,
    pub sigma_hat: f64,
    pub eta_hat: GaussianMeasure,
    pub eta: GaussianMeasure,
}

impl KLPathologyA {
    pub fn mean_gap(&self) -> f64 {
        (self.eta.mean()[0] - self.eta_hat.mean()[0]).abs()
    }
}

pub fn construct_kl_pathology_a(delta: f64, sigma_hat: f64) -> Result<KLPathologyA> {
    if !(delta > 0.0 && delta.is_finite()) || !(sigma_hat > 0.0 && sigma_hat.is_finite()) {
        return Err(invalid("delta and sigma_hat must be positive and finite"));
    }
    let var_hat = sigma_hat * sigma_hat;
    let gap = (var_hat * (2.0 * delta).exp_m1()).sqrt();
    let var = (2.0 * delta).exp() * var_hat;
    Ok(KLPathologyA {
        delta,
        sigma_hat,
        eta_hat: GaussianMeasure::univariate(0.0, var_hat)?,
        eta: GaussianMeasure::univariate(gap, var)?,
    })
}

/// Bound on `|μ̂ - μ|` implied by `KL ≤ δ`: `{(σ̂² + σ²)δ/(1-δ)}^{1/2}`.
pub fn kl_mean_error_bound(delta: f64, var_hat: f64, var: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(invalid(format!("KL must be nonnegative, got {delta}")));
    }
    if delta >= 1.0 {
        return Err(Error::VacuousBound(format!(
            "KL = {delta} is at least 1, the mean guarantee is vacuous"
        )));
    }
    Ok(((var_hat + var) * delta / (1.0 - delta)).sqrt())
}

/// Interval-probability error implied by `KL ≤ δ` (Pinsker), clamped to 1.
pub fn kl_interval_error_bound(delta: f64) -> f64 {
    (0.5 * delta.max(0.0)).sqrt().min(1.0)
}

/// Upper bound on `KL(N(0,1) ‖ T_h)`:
/// `log[Γ(h/2)h^{1/2}/Γ((h+1)/2)] - ½log(2e) + ½(h+1)log(1+1/h)`.
pub fn kl_gaussian_t_upper(h: f64) -> Result<f64> {
    if !(h >= 2.0 && h.is_finite()) {
        return Err(invalid(format!("degrees of freedom must be at least 2, got {h}")));
    }
    Ok(ln_gamma(0.5 * h) + 0.5 * h.ln() - ln_gamma(0.5 * (h + 1.0))
        - 0.5 * (2.0f64.ln() + 1.0)
        + 0.5 * (h + 1.0) * (1.0 / h).ln_1p())
}

fn grid_for(p: &dyn Density1d, q: &dyn Density1d) -> RealLine {
    RealLine::new(p.location(), p.spread().min(q.spread()))
}

fn quad_error(kind: DivergenceKind, e: Error) -> Result<Divergence> {
    match e {
        Error::Quadrature(reason) => Ok(Divergence::Infinite { kind, reason }),
        other => Err(other),
    }
}

/// `KL(p‖q) = ∫ p log(p/q)` by quadrature.
pub fn kl_numeric_1d(p: &dyn Density1d, q: &dyn Density1d) -> Result<Divergence> {
    let kind = DivergenceKind::Kl;
    if !Tail::kl_integrable(p.tail_class(), q.tail_class()) {
        return Ok(Divergence::Infinite {
            kind,
            reason: "p log(p/q) is not integrable in the tails".into(),
        });
    }
    let f = |x: f64| {
        let lp = p.ln_pdf(x);
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        lp.exp() * (lp - q.ln_pdf(x))
    };
    match grid_for(p, q).integrate(f, QUAD_TOL) {
        Ok(v) => Ok(Divergence::finite(kind, v, Method::Quadrature)),
        Err(e) => quad_error(kind, e),
    }
}

/// `χ²(ξ‖ν) = ∫ (ξ-ν)²/ν` by quadrature.
pub fn chi2_numeric_1d(xi: &dyn Density1d, nu: &dyn Density1d) -> Result<Divergence> {
    let kind = DivergenceKind::Chi2;
    if !Tail::square_ratio_integrable(xi.tail_class(), nu.tail_class()) {
        return Ok(Divergence::Infinite {
            kind,
            reason: "ξ²/ν is not integrable in the tails".into(),
        });
    }
    let f = |x: f64| {
        let (lx, ln) = (xi.ln_pdf(x), nu.ln_pdf(x));
        if lx == f64::NEG_INFINITY && ln == f64::NEG_INFINITY {
            return 0.0;
        }
        let r = (lx - ln).exp_m1();
        if r == 0.0 {
            0.0
        } else {
            (ln + 2.0 * r.abs().ln()).exp()
        }
    };
    let line = RealLine::new(xi.location(), xi.spread().min(nu.spread()));
    match line.integrate(f, QUAD_TOL) {
        Ok(v) => Ok(Divergence::finite(kind, v, Method::Quadrature)),
        Err(e) => quad_error(kind, e),
    }
}

/// Closed-form `χ²(ξ‖ν)` for Gaussians; infinite unless `2Σ_ξ⁻¹ - Σ_ν⁻¹ ≻ 0`.
pub fn chi2_gaussian(xi: &GaussianMeasure, nu: &GaussianMeasure) -> Result<Divergence> {
    check_dim(nu.dim(), xi.dim())?;
    let kind = DivergenceKind::Chi2;
    let a = xi.precision();
    let b = nu.precision();
    let p = a * 2.0 - b;
    let Some(chol) = nalgebra::Cholesky::new(p.clone()) else {
        return Ok(Divergence::Infinite {
            kind,
            reason: "reference covariance is too narrow: 2Σ_ξ⁻¹ - Σ_ν⁻¹ is not positive definite".into(),
        });
    };
    let log_det_p = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let (ma, mb) = (xi.mean(), nu.mean());
    let rhs = a * ma * 2.0 - b * mb;
    let m = chol.solve(&rhs);
    let quad = 0.5 * m.dot(&rhs) - ma.dot(&(a * ma)) + 0.5 * mb.dot(&(b * mb));
    let log_int = 0.5 * nu.log_det_cov() - xi.log_det_cov() - 0.5 * log_det_p + quad;
    Ok(Divergence::finite(kind, log_int.exp_m1(), Method::ClosedForm))
}

/// `½∫|p - q|` by quadrature.
pub fn tv_numeric_1d(p: &dyn Density1d, q: &dyn Density1d) -> Result<Divergence> {
    let kind = DivergenceKind::Tv;
    let f = |x: f64| 0.5 * (p.pdf(x) - q.pdf(x)).abs();
    match grid_for(p, q).integrate(f, 1e-10) {
        Ok(v) => Ok(Divergence::finite(kind, v, Method::Quadrature)),
        Err(e) => quad_error(kind, e),
    }
}

/// `∫(√p - √q)²` by quadrature.
pub fn hellinger_numeric_1d(p: &dyn Density1d, q: &dyn Density1d) -> Result<Divergence> {
    let kind = DivergenceKind::HellingerSq;
    let f = |x: f64| {
        let d = (0.5 * p.ln_pdf(x)).exp() - (0.5 * q.ln_pdf(x)).exp();
        d * d
    };
    match grid_for(p, q).integrate(f, QUAD_TOL) {
        Ok(v) => Ok(Divergence::finite(kind, v, Method::Quadrature)),
        Err(e) => quad_error(kind, e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normal_cdf, StudentTMeasure};
    use proptest::prelude::*;

    fn n(m: f64, v: f64) -> GaussianMeasure {
        GaussianMeasure::univariate(m, v).unwrap()
    }

    #[test]
    fn kl_gaussian_examples() {
        assert_eq!(kl_gaussian(&n(0.3, 2.0), &n(0.3, 2.0)).unwrap(), 0.0);
        assert!((kl_gaussian(&n(0.0, 1.0), &n(1.0, 1.0)).unwrap() - 0.5).abs() < 1e-15);
        // 0.5{σ̂²/σ² - 1 + log(σ²/σ̂²) + (μ̂-μ)²/σ²}
        let v = kl_gaussian(&n(0.5, 2.0), &n(-1.0, 3.0)).unwrap();
        let e = 0.5 * (2.0 / 3.0 - 1.0 + 1.5f64.ln() + 2.25 / 3.0);
        assert!((v - e).abs() < 1e-14);
    }

    #[test]
    fn pathology_construction() {
        for &delta in &[0.1, 1.0, 5.0] {
            let p = construct_kl_pathology_a(delta, 1.3).unwrap();
            assert!((kl_gaussian(&p.eta_hat, &p.eta).unwrap() - delta).abs() < 1e-9);
            let gap2 = p.mean_gap().powi(2);
            assert!((gap2 - 1.69 * (2.0 * delta).exp_m1()).abs() <= 1e-12 * gap2);
            let ratio = p.eta_hat.cov()[(0, 0)] / p.eta.cov()[(0, 0)];
            assert!((ratio - (-2.0 * delta).exp()).abs() < 1e-14);
        }
        let p = construct_kl_pathology_a(5.0, 1.0).unwrap();
        assert!(p.mean_gap() > 148.0);
        let p = construct_kl_pathology_a(0.5, 2.0).unwrap();
        assert!((kl_gaussian(&p.eta_hat, &p.eta).unwrap() - 0.5).abs() < 1e-12);
        let p = construct_kl_pathology_a(1e-12, 1.0).unwrap();
        assert!(p.mean_gap() < 1e-5 && (p.eta.sd() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn kl_guarantees() {
        assert_eq!(kl_mean_error_bound(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!((kl_mean_error_bound(0.5, 1.0, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(kl_mean_error_bound(1.0, 1.0, 1.0), Err(Error::VacuousBound(_))));
        assert_eq!(kl_interval_error_bound(0.0), 0.0);
        assert!((kl_interval_error_bound(0.5) - 0.5).abs() < 1e-15);
        assert_eq!(kl_interval_error_bound(2.0), 1.0);
        let p = construct_kl_pathology_a(0.5, 1.0).unwrap();
        let b = kl_mean_error_bound(0.5, 1.0, p.eta.cov()[(0, 0)]).unwrap();
        assert!(p.mean_gap() <= b);
    }

    #[test]
    fn gaussian_t_bound() {
        // The formula evaluated as written; it dominates the quadrature KL.
        let v2 = kl_gaussian_t_upper(2.0).unwrap();
        assert!((v2 - 0.228_980).abs() < 1e-5);
        let std = n(0.0, 1.0);
        for &h in &[2.0, 3.0, 5.0, 10.0] {
            let t = StudentTMeasure::standard(h).unwrap();
            let kl = kl_numeric_1d(&std, &t).unwrap().value();
            assert!(kl_gaussian_t_upper(h).unwrap() >= kl, "h={h}");
        }
        let mut prev = kl_gaussian_t_upper(3.0).unwrap();
        for i in 1..200 {
            let v = kl_gaussian_t_upper(3.0 + i as f64 * 0.5).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(kl_gaussian_t_upper(1e7).unwrap() < 1e-6);
        assert!(kl_gaussian_t_upper(1.5).is_err());
    }

    #[test]
    fn kl_quadrature_matches_closed_form() {
        let (a, b) = (n(0.2, 0.7), n(-0.4, 1.9));
        assert!(kl_numeric_1d(&a, &a).unwrap().value().abs() < 1e-8);
        let q = kl_numeric_1d(&a, &b).unwrap().value();
        assert!((q - kl_gaussian(&a, &b).unwrap()).abs() < 1e-6);
        let t2 = StudentTMeasure::standard(2.0).unwrap();
        let v = kl_numeric_1d(&n(0.0, 1.0), &t2).unwrap();
        assert!(v.value() > 0.0 && v.value().is_finite());
        // a t target cannot be approximated by a Gaussian in KL(t‖N)
        assert!(kl_numeric_1d(&t2, &n(0.0, 1.0)).unwrap().is_infinite());
    }

    #[test]
    fn near_divergent_t_variance() {
        let std = n(0.0, 1.0);
        for &h in &[2.01, 2.5, 3.0] {
            let t = StudentTMeasure::standard(h).unwrap();
            assert!(kl_numeric_1d(&std, &t).unwrap().value().is_finite());
        }
        let t = StudentTMeasure::standard(2.01).unwrap();
        assert!(t.checked_variance().unwrap() > 100.0);
    }

    #[test]
    fn chi2_closed_form_and_quadrature() {
        let (xi, nu) = (n(0.0, 1.0), n(0.0, 2.0));
        let c = chi2_gaussian(&xi, &nu).unwrap();
        assert_eq!(c.method(), Some(Method::ClosedForm));
        assert!((c.value() - (2.0 / 3f64.sqrt() - 1.0)).abs() < 1e-14);
        let q = chi2_numeric_1d(&xi, &nu).unwrap();
        assert!((c.value() - q.value()).abs() < 1e-6);
        assert_eq!(chi2_gaussian(&xi, &xi).unwrap().value(), 0.0);
        assert!(chi2_gaussian(&nu, &xi).unwrap().is_infinite());
        assert!(chi2_numeric_1d(&nu, &xi).unwrap().is_infinite());
        // shifted pair
        let (xi, nu) = (n(0.3, 1.2), n(-0.5, 2.0));
        let c = chi2_gaussian(&xi, &nu).unwrap().value();
        let q = chi2_numeric_1d(&xi, &nu).unwrap().value();
        assert!((c - q).abs() < 1e-6, "{c} vs {q}");
    }

    #[test]
    fn tv_and_hellinger() {
        let (a, b) = (n(0.0, 1.0), n(3.0, 1.0));
        let tv = tv_numeric_1d(&a, &b).unwrap().value();
        assert!((tv - (2.0 * normal_cdf(1.5) - 1.0)).abs() < 1e-4);
        assert!(tv_numeric_1d(&a, &a).unwrap().value() < 1e-12);
        assert!(hellinger_numeric_1d(&a, &a).unwrap().value() < 1e-12);
        // Gaussian Hellinger closed form with equal variances: 2(1 - e^{-Δ²/8})
        let h = hellinger_numeric_1d(&a, &b).unwrap().value();
        assert!((h - 2.0 * (1.0 - (-9.0f64 / 8.0).exp())).abs() < 1e-8);
        assert!(tv <= 2.0 * h.sqrt());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn hellinger_below_kl(m1 in -2.0f64..2.0, m2 in -2.0f64..2.0, v1 in 0.2f64..4.0, v2 in 0.2f64..4.0) {
            let (a, b) = (n(m1, v1), n(m2, v2));
            let h = hellinger_numeric_1d(&a, &b).unwrap().value();
            let kl = kl_gaussian(&a, &b).unwrap();
            prop_assert!(h <= kl + 1e-9);
            let tv = tv_numeric_1d(&a, &b).unwrap().value();
            prop_assert!(tv <= 2.0 * h.sqrt() + 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn kl_guarantees_hold(m1 in -1.0f64..1.0, m2 in -1.0f64..1.0, v1 in 0.3f64..3.0, v2 in 0.3f64..3.0) {
            let (hat, eta) = (n(m1, v1), n(m2, v2));
            let delta = kl_gaussian(&hat, &eta).unwrap();
            prop_assume!(delta < 1.0);
            let bound = kl_mean_error_bound(delta, v1, v2).unwrap();
            prop_assert!((m1 - m2).abs() <= bound + 1e-12);
            let tv = tv_numeric_1d(&hat, &eta).unwrap().value();
            prop_assert!(tv <= kl_interval_error_bound(delta) + 1e-9);
        }
    }
}
