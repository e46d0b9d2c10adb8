//! Wasserstein, total-variation and summary-statistic certificates assembled
//! from convexity evidence, comparability factors and Fisher estimates.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fisher::{check_p, ComparabilityFactor, FisherEstimate};
use crate::model::{check_dim, GaussianMeasure};

/// Default multiple of the Monte Carlo standard error added to Fisher values.
pub const DEFAULT_SLACK_K: f64 = 3.0;

/// `(√2 + √6)/2`, the standard-deviation constant.
pub fn std_constant() -> f64 {
    0.5 * (2f64.sqrt() + 6f64.sqrt())
}

/// Evidence that the approximation's potential is strongly convex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum ConvexityCertificate {
    /// `∇²Û ⪰ αI` everywhere.
    GlobalStrong { alpha: f64 },
    /// `∇²Û ⪰ KI` outside the ball of radius `R`; the transport constant
    /// `alpha` exists but has no formula and is asserted by the user.
    TailStrong { k: f64, r: f64, alpha: f64 },
}

impl ConvexityCertificate {
    pub fn global(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self::GlobalStrong { alpha })
    }

    pub fn tail(k: f64, r: f64, alpha: f64) -> Result<Self> {
        if !(k > 0.0) || !(r >= 0.0) || !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("tail convexity needs K > 0, R >= 0 and alpha > 0"));
        }
        Ok(Self::TailStrong { k, r, alpha })
    }

    pub fn alpha(&self) -> f64 {
        match *self {
            Self::GlobalStrong { alpha } | Self::TailStrong { alpha, .. } => alpha,
        }
    }

    pub fn is_conditional(&self) -> bool {
        matches!(self, Self::TailStrong { .. })
    }
}

/// Which bound produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// `W_p ≤ α⁻¹F_{p,η}` for a globally strongly convex approximation.
    FisherDirect,
    /// The same bound under tail-only convexity with a user-asserted `α`.
    FisherTailConditional,
    /// `W_p ≤ α⁻¹B_pF_{2,ν}` for a general reference measure.
    FisherReference,
    LaplaceNonasymptotic,
    LaplaceAsymptotic,
    Coreset,
}

pub const ASSUME_ALPHA_USER: &str = "alpha_user_asserted";
pub const ASSUME_INTEGRABILITY: &str = "integrability_proviso_unchecked";
pub const ASSUME_PROJECTION: &str = "projection_estimate";
pub const ASSUME_CONCENTRATION_USER: &str = "concentration_user_asserted";
pub const ASSUME_CONCENTRATION_MEASURED: &str = "concentration_measured_by_quadrature";
pub const ASSUME_M_USER: &str = "third_derivative_bound_user_supplied";
pub const ASSUME_B_USER: &str = "comparability_factor_user_supplied";

/// A `W_p` bound together with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WassersteinCertificate {
    pub theorem: Theorem,
    pub p: u8,
    pub bound: f64,
    pub alpha: f64,
    pub b_factor: f64,
    /// Absent for certificates that do not consume a Fisher estimate.
    pub fisher_value: Option<f64>,
    pub fisher_stderr: Option<f64>,
    pub slack_k: f64,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub assumptions: Vec<String>,
}

pub(crate) fn check_slack_k(k: f64) -> Result<()> {
    if k >= 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("slack multiplier must be nonnegative, got {k}")))
    }
}

fn mc_fields(fe: &FisherEstimate) -> (Option<usize>, Option<u64>) {
    if fe.n_samples > 0 {
        (Some(fe.n_samples), Some(fe.seed))
    } else {
        (None, None)
    }
}

/// `W_p ≤ (F_{p,η} + k·se)/α` with `ν = η`.
pub fn wasserstein_from_fisher(
    cert: &ConvexityCertificate,
    fe: &FisherEstimate,
    p: u8,
    k: f64,
) -> Result<WassersteinCertificate> {
    check_p(p)?;
    check_slack_k(k)?;
    if !fe.nu_is_target {
        return Err(invalid(
            "the direct bound needs a Fisher estimate under the target; use the reference-measure bound",
        ));
    }
    if fe.p != p {
        return Err(invalid(format!("Fisher estimate has p = {}, certificate asks for p = {p}", fe.p)));
    }
    let mut assumptions = Vec::new();
    let theorem = if cert.is_conditional() {
        assumptions.push(ASSUME_ALPHA_USER.to_string());
        if p == 1 {
            assumptions.push(ASSUME_INTEGRABILITY.to_string());
        }
        Theorem::FisherTailConditional
    } else {
        Theorem::FisherDirect
    };
    let (n_samples, seed) = mc_fields(fe);
    Ok(WassersteinCertificate {
        theorem,
        p,
        bound: fe.upper(k) / cert.alpha(),
        alpha: cert.alpha(),
        b_factor: 1.0,
        fisher_value: Some(fe.value),
        fisher_stderr: Some(fe.std_error),
        slack_k: k,
        n_samples,
        seed,
        assumptions,
    })
}

/// `W_p ≤ α⁻¹·B_p·(F_{2,ν} + k·se)` for any reference measure `ν`.
pub fn wasserstein_from_fisher_reference(
    cert: &ConvexityCertificate,
    b: &ComparabilityFactor,
    fe: &FisherEstimate,
    p: u8,
    k: f64,
) -> Result<WassersteinCertificate> {
    check_p(p)?;
    check_slack_k(k)?;
    if fe.p != 2 {
        return Err(invalid("the reference-measure bound consumes F_{2,ν}"));
    }
    if b.p != p {
        return Err(invalid(format!("comparability factor is for p = {}, not {p}", b.p)));
    }
    if !b.is_finite() {
        return Err(Error::NoCertificate(format!(
            "comparability factor B_{p} is infinite for reference {}",
            fe.nu_descriptor
        )));
    }
    let mut assumptions = Vec::new();
    if cert.is_conditional() {
        assumptions.push(ASSUME_ALPHA_USER.to_string());
    }
    if b.provenance == crate::fisher::Provenance::UserSupplied {
        assumptions.push(ASSUME_B_USER.to_string());
    }
    let (n_samples, seed) = mc_fields(fe);
    Ok(WassersteinCertificate {
        theorem: Theorem::FisherReference,
        p,
        bound: b.value * fe.upper(k) / cert.alpha(),
        alpha: cert.alpha(),
        b_factor: b.value,
        fisher_value: Some(fe.value),
        fisher_stderr: Some(fe.std_error),
        slack_k: k,
        n_samples,
        seed,
        assumptions,
    })
}

/// Errors in summary statistics implied by Wasserstein bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryErrorReport {
    /// `W₁` bound actually used (`min(eps1, eps2)` when both are given).
    pub eps1: f64,
    pub eps2: Option<f64>,
    pub mean_bound: f64,
    pub mad_bound: f64,
    pub std_bound: Option<f64>,
    pub cov_opnorm_bound: Option<f64>,
    /// The simpler `3mε + 5.25ε²` form, which dominates `cov_opnorm_bound`.
    pub cov_opnorm_bound_simple: Option<f64>,
    pub density_cap: Option<f64>,
    pub interval_bound_density: Option<f64>,
    pub interval_bound_tv: Option<f64>,
    /// Which interval route is tighter: `"density"` or `"tv"`.
    pub interval_best: Option<String>,
}

impl SummaryErrorReport {
    /// Adds a total-variation interval bound and records the tighter route.
    pub fn with_tv_bound(mut self, tv: f64) -> Self {
        self.interval_bound_tv = Some(tv.clamp(0.0, 1.0));
        self.interval_best = best_interval(self.interval_bound_density, self.interval_bound_tv);
        self
    }

    pub fn interval_bound(&self) -> Option<f64> {
        match (self.interval_bound_density, self.interval_bound_tv) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

fn best_interval(density: Option<f64>, tv: Option<f64>) -> Option<String> {
    match (density, tv) {
        (Some(a), Some(b)) => Some(if a <= b { "density" } else { "tv" }.to_string()),
        (Some(_), None) => Some("density".into()),
        (None, Some(_)) => Some("tv".into()),
        (None, None) => None,
    }
}

/// Summary-statistic errors from `W₁ ≤ eps1` and optionally `W₂ ≤ eps2`.
///
/// `sigma_norm_min` is `min(‖Σ_η‖, ‖Σ_η̂‖)` in spectral norm; passing only the
/// approximation's norm is valid and merely looser. `density_cap` bounds the
/// target density and enables the interval bound `2(2cε₁)^{1/2}`.
pub fn moment_error_report(
    eps1: f64,
    eps2: Option<f64>,
    sigma_norm_min: Option<f64>,
    density_cap: Option<f64>,
) -> Result<SummaryErrorReport> {
    if !(eps1 >= 0.0) || eps2.is_some_and(|e| !(e >= 0.0)) {
        return Err(invalid("Wasserstein bounds must be nonnegative"));
    }
    let eps1 = match eps2 {
        Some(e2) => eps1.min(e2),
        None => eps1,
    };
    let root_norm = sigma_norm_min.map(f64::sqrt);
    let cov = |e: f64, m: f64| 2f64.powf(1.5) * m * e + (1.0 + 3.0 * 2f64.sqrt()) * e * e;
    let interval_bound_density = density_cap.map(|c| (2.0 * (2.0 * c * eps1).sqrt()).min(1.0));
    Ok(SummaryErrorReport {
        eps1,
        eps2,
        mean_bound: eps1,
        mad_bound: 2.0 * eps1,
        std_bound: eps2.map(|e| std_constant() * e),
        cov_opnorm_bound: eps2.zip(root_norm).map(|(e, m)| cov(e, m)),
        cov_opnorm_bound_simple: eps2.zip(root_norm).map(|(e, m)| 3.0 * m * e + 5.25 * e * e),
        density_cap,
        interval_bound_density,
        interval_bound_tv: None,
        interval_best: best_interval(interval_bound_density, None),
    })
}

/// `d_TV ≤ (2α)^{-1/2}·‖dη/dν‖_∞^{1/2}·(F_{2,ν} + k·se)`, clamped to 1.
pub fn tv_from_fisher(cert: &ConvexityCertificate, sup_ratio: f64, fe: &FisherEstimate, k: f64) -> Result<f64> {
    check_slack_k(k)?;
    if fe.p != 2 {
        return Err(invalid("the total-variation bound consumes F_{2,ν}"));
    }
    if !(sup_ratio >= 0.0 && sup_ratio.is_finite()) {
        return Err(Error::NoCertificate("density ratio is unbounded".into()));
    }
    Ok(((sup_ratio / (2.0 * cert.alpha())).sqrt() * fe.upper(k)).min(1.0))
}

/// `W₂` between 1-D Gaussians: `((μ-μ̂)² + (σ-σ̂)²)^{1/2}`.
pub fn gaussian_w2_closed_form(eta: &GaussianMeasure, eta_hat: &GaussianMeasure) -> Result<f64> {
    check_dim(1, eta.dim())?;
    check_dim(1, eta_hat.dim())?;
    Ok((eta.mean()[0] - eta_hat.mean()[0]).hypot(eta.sd() - eta_hat.sd()))
}

/// Squared-`W₂` bound for 1-D Gaussians with `ν = N(μ_η + ε, ρσ_η²)`:
/// `C{r²(r²+1)ε² + (1-r²)(ε-Δμ)² + r²Δμ² + ρ(r+1)²Δσ²}` with
/// `C = ρ^{1/2}exp[ε²/{2(ρ-1)σ_η²}]`, `r = σ̂/σ_η`, `Δμ = μ̂ - μ_η`, `Δσ = σ̂ - σ_η`.
pub fn gaussian_reference_bound(sigma_eta: f64, sigma_hat: f64, delta_mu: f64, eps: f64, rho: f64) -> Result<f64> {
    if !(rho > 1.0) {
        return Err(invalid(format!("rho must exceed 1, got {rho}")));
    }
    if !(sigma_eta > 0.0 && sigma_hat > 0.0) {
        return Err(invalid("standard deviations must be positive"));
    }
    let r = sigma_hat / sigma_eta;
    let r2 = r * r;
    let ds = sigma_hat - sigma_eta;
    let c = rho.sqrt() * (eps * eps / (2.0 * (rho - 1.0) * sigma_eta * sigma_eta)).exp();
    let bracket = r2 * (r2 + 1.0) * eps * eps
        + (1.0 - r2) * (eps - delta_mu).powi(2)
        + r2 * delta_mu * delta_mu
        + rho * (r + 1.0).powi(2) * ds * ds;
    Ok(c * bracket)
}

/// The `ν = η` case of [`gaussian_reference_bound`]: `Δμ² + (1+r)²Δσ²`.
pub fn gaussian_nu_equal_bound(sigma_eta: f64, sigma_hat: f64, delta_mu: f64) -> Result<f64> {
    if !(sigma_eta > 0.0 && sigma_hat > 0.0) {
        return Err(invalid("standard deviations must be positive"));
    }
    let r = sigma_hat / sigma_eta;
    Ok(delta_mu * delta_mu + (1.0 + r).powi(2) * (sigma_hat - sigma_eta).powi(2))
}

/// Squared-`W₂` bound between `T_h` and `N(0,1)`: `10/(h² + h - 6)`.
pub fn t_reference_bound(h: f64) -> Result<f64> {
    if !(h > 2.0) {
        return Err(invalid(format!("need more than 2 degrees of freedom, got {h}")));
    }
    Ok(10.0 / (h * h + h - 6.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{fisher_distance_gaussian_closed, fisher_distance_gaussian_nu_target, comparability_gaussian};
    use proptest::prelude::*;

    fn n(m: f64, v: f64) -> GaussianMeasure {
        GaussianMeasure::univariate(m, v).unwrap()
    }

    fn exact(value: f64, p: u8) -> FisherEstimate {
        FisherEstimate::exact(p, value, "target", true)
    }

    #[test]
    fn direct_bound_examples() {
        let g = ConvexityCertificate::global(1.0).unwrap();
        assert_eq!(wasserstein_from_fisher(&g, &exact(0.0, 1), 1, 3.0).unwrap().bound, 0.0);
        // N(0,1) vs N(1,1): F = 1 and W₁ = 1, so the bound is tight.
        let c = wasserstein_from_fisher(&g, &exact(1.0, 1), 1, 3.0).unwrap();
        assert_eq!(c.bound, 1.0);
        assert_eq!(c.theorem, Theorem::FisherDirect);
        // N(0,1) vs N(0,4): α = 1/4, F = 3/4, bound 3 against W₂ = 1.
        let f = fisher_distance_gaussian_nu_target(&n(0.0, 1.0), &n(0.0, 4.0)).unwrap();
        let c = wasserstein_from_fisher(&ConvexityCertificate::global(0.25).unwrap(), &exact(f, 2), 2, 3.0).unwrap();
        assert!((c.bound - 3.0).abs() < 1e-15);
        assert!(wasserstein_from_fisher(&g, &exact(1.0, 2), 1, 3.0).is_err());
        assert!(wasserstein_from_fisher(&g, &exact(1.0, 3), 3, 3.0).is_err());
    }

    #[test]
    fn slack_is_folded_in() {
        let g = ConvexityCertificate::global(2.0).unwrap();
        let mut fe = exact(1.0, 2);
        fe.std_error = 0.1;
        fe.n_samples = 1000;
        fe.seed = 4;
        let c = wasserstein_from_fisher(&g, &fe, 2, 3.0).unwrap();
        assert!((c.bound - 0.65).abs() < 1e-15);
        assert_eq!((c.n_samples, c.seed), (Some(1000), Some(4)));
    }

    #[test]
    fn tail_regime_is_flagged() {
        let t = ConvexityCertificate::tail(1.0, 2.0, 0.5).unwrap();
        let c = wasserstein_from_fisher(&t, &exact(1.0, 1), 1, 0.0).unwrap();
        assert_eq!(c.theorem, Theorem::FisherTailConditional);
        assert!(c.assumptions.iter().any(|a| a == ASSUME_ALPHA_USER));
        assert!(c.assumptions.iter().any(|a| a == ASSUME_INTEGRABILITY));
        let c = wasserstein_from_fisher(&t, &exact(1.0, 2), 2, 0.0).unwrap();
        assert!(!c.assumptions.iter().any(|a| a == ASSUME_INTEGRABILITY));
    }

    #[test]
    fn reference_bound_reduces_to_direct() {
        let g = ConvexityCertificate::global(0.5).unwrap();
        let fe = exact(0.8, 2);
        let one = ComparabilityFactor::unit(2).unwrap();
        let a = wasserstein_from_fisher_reference(&g, &one, &fe, 2, 3.0).unwrap();
        let b = wasserstein_from_fisher(&g, &fe, 2, 3.0).unwrap();
        assert_eq!(a.bound, b.bound);
        let inf = ComparabilityFactor::user_supplied(2, f64::INFINITY).unwrap();
        assert!(matches!(
            wasserstein_from_fisher_reference(&g, &inf, &fe, 2, 3.0),
            Err(Error::NoCertificate(_))
        ));
    }

    #[test]
    fn reference_bound_against_closed_form_curve() {
        // σ_η = 1, Δμ = -1, ε = 1, ρ = 2, r = 1.
        let (eta, hat) = (n(0.0, 1.0), n(-1.0, 1.0));
        let (eps, rho) = (1.0, 2.0);
        let f = fisher_distance_gaussian_closed(&eta, &hat, eps, rho).unwrap();
        let b = comparability_gaussian(2, &eta, &n(eps, rho)).unwrap();
        let alpha = ConvexityCertificate::global(1.0).unwrap();
        let w = wasserstein_from_fisher_reference(&alpha, &b, &exact(f, 2).not_target(), 2, 0.0).unwrap();
        let curve = gaussian_reference_bound(1.0, 1.0, -1.0, eps, rho).unwrap();
        let c = rho.sqrt() * (eps * eps / (2.0 * (rho - 1.0))).exp();
        // the curve equals the exact bound plus 2r²ε²C
        assert!((w.bound.powi(2) + 2.0 * eps * eps * c - curve).abs() < 1e-12);
        assert!(w.bound.powi(2) <= curve);
    }

    #[test]
    fn moment_report_examples() {
        let r = moment_error_report(0.0, Some(0.0), Some(1.0), Some(0.4)).unwrap();
        assert_eq!(r.mean_bound, 0.0);
        assert_eq!(r.mad_bound, 0.0);
        assert_eq!(r.std_bound, Some(0.0));
        assert_eq!(r.cov_opnorm_bound, Some(0.0));
        assert_eq!(r.interval_bound_density, Some(0.0));
        let r = moment_error_report(5.0, Some(1.0), Some(1.0), None).unwrap();
        let cov = r.cov_opnorm_bound.unwrap();
        assert!((cov - (2f64.powf(1.5) + 1.0 + 3.0 * 2f64.sqrt())).abs() < 1e-12);
        assert!((cov - 8.071).abs() < 1e-3);
        assert!(r.cov_opnorm_bound_simple.unwrap() == 8.25 && cov < 8.25);
        assert_eq!(r.eps1, 1.0);
        assert!(r.std_bound.unwrap() <= 2.0);
        let r = moment_error_report(0.02, None, None, Some(0.4)).unwrap();
        assert!((r.interval_bound_density.unwrap() - 0.253).abs() < 1e-3);
        assert!(r.std_bound.is_none() && r.cov_opnorm_bound.is_none());
        let r = moment_error_report(0.02, None, None, Some(0.4)).unwrap().with_tv_bound(0.1);
        assert_eq!(r.interval_best.as_deref(), Some("tv"));
        assert_eq!(r.interval_bound(), Some(0.1));
        assert_eq!(moment_error_report(10.0, None, None, Some(1.0)).unwrap().interval_bound_density, Some(1.0));
    }

    #[test]
    fn tv_bound_examples() {
        let g = ConvexityCertificate::global(1.0).unwrap();
        assert_eq!(tv_from_fisher(&g, 1.0, &exact(0.0, 2), 3.0).unwrap(), 0.0);
        let v = tv_from_fisher(&g, 1.0, &exact(0.2, 2), 0.0).unwrap();
        assert!((v - 0.2 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(tv_from_fisher(&g, 1.0, &exact(1e6, 2), 0.0).unwrap(), 1.0);
        assert!(tv_from_fisher(&g, f64::INFINITY, &exact(0.2, 2), 0.0).is_err());
    }

    #[test]
    fn closed_forms() {
        assert_eq!(gaussian_w2_closed_form(&n(0.0, 1.0), &n(0.0, 1.0)).unwrap(), 0.0);
        assert_eq!(gaussian_w2_closed_form(&n(0.0, 1.0), &n(1.0, 1.0)).unwrap(), 1.0);
        assert!((gaussian_w2_closed_form(&n(0.0, 1.0), &n(3.0, 25.0)).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(t_reference_bound(3.0).unwrap(), 5.0 / 3.0);
        assert!(t_reference_bound(1e8).unwrap() < 1e-15);
        assert!(t_reference_bound(2.0).is_err());
        assert!(gaussian_reference_bound(1.0, 1.0, 0.0, 0.0, 1.0).is_err());
        // ν = η with equal scales: tight
        assert!((gaussian_nu_equal_bound(1.0, 1.0, 0.7).unwrap() - 0.49).abs() < 1e-15);
        assert_eq!(gaussian_nu_equal_bound(1.0, 1.0, -1.0).unwrap(), 1.0);
        // ε = 0, ρ → 1 recovers the ν = η form
        let a = gaussian_reference_bound(1.3, 0.8, 0.4, 0.0, 1.0 + 1e-12).unwrap();
        let b = gaussian_nu_equal_bound(1.3, 0.8, 0.4).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn t_target_direct_bound() {
        use crate::fisher::fisher_distance_quadrature_1d;
        use crate::model::StudentTMeasure;
        let std_normal = n(0.0, 1.0);
        let one = ConvexityCertificate::global(1.0).unwrap();
        for h in [3.0, 5.0, 10.0] {
            let t = StudentTMeasure::standard(h).unwrap();
            let f = fisher_distance_quadrature_1d(&t, &std_normal, &t, 2).unwrap();
            let c = wasserstein_from_fisher(&one, &exact(f, 2), 2, 0.0).unwrap();
            let closed = t_reference_bound(h).unwrap();
            assert!((c.bound.powi(2) - closed).abs() < 1e-9 * closed, "h={h}: {} vs {closed}", c.bound.powi(2));
        }
    }

    #[test]
    fn std_bound_covers_t_variance_gap() {
        let mut h = 2.5;
        while h <= 100.0 {
            let bound = std_constant() * t_reference_bound(h).unwrap().sqrt();
            assert!(bound >= ((h / (h - 2.0)).sqrt() - 1.0).abs(), "h={h}");
            h += 0.05;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn direct_certificate_dominates_w2(m1 in -3.0f64..3.0, m2 in -3.0f64..3.0, v1 in 0.1f64..5.0, v2 in 0.1f64..5.0) {
            let (eta, hat) = (n(m1, v1), n(m2, v2));
            let f = fisher_distance_gaussian_nu_target(&eta, &hat).unwrap();
            let alpha = ConvexityCertificate::global(1.0 / v2).unwrap();
            let c = wasserstein_from_fisher(&alpha, &exact(f, 2), 2, 0.0).unwrap();
            let w2 = gaussian_w2_closed_form(&eta, &hat).unwrap();
            prop_assert!(c.bound >= w2 * (1.0 - 1e-12));
        }

        #[test]
        fn monotone_in_fisher_and_alpha(f in 0.0f64..10.0, df in 0.0f64..5.0, a in 0.1f64..10.0, da in 0.0f64..5.0) {
            let lo = ConvexityCertificate::global(a).unwrap();
            let hi = ConvexityCertificate::global(a + da).unwrap();
            let b1 = wasserstein_from_fisher(&lo, &exact(f, 2), 2, 3.0).unwrap().bound;
            let b2 = wasserstein_from_fisher(&lo, &exact(f + df, 2), 2, 3.0).unwrap().bound;
            let b3 = wasserstein_from_fisher(&hi, &exact(f, 2), 2, 3.0).unwrap().bound;
            prop_assert!(b2 >= b1);
            prop_assert!(b3 <= b1);
        }
    }

    trait NotTarget {
        fn not_target(self) -> Self;
    }
    impl NotTarget for FisherEstimate {
        fn not_target(mut self) -> Self {
            self.nu_is_target = false;
            self
        }
    }
}
