//! The `(p,ν)`-Fisher distance `F = (∫‖∇U - ∇Û‖^p dν)^{1/p}` and the factors
//! that convert a reference-measure Fisher distance into a Wasserstein bound.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::divergences::{chi2_gaussian, chi2_numeric_1d, Divergence};
use crate::error::{invalid, Error, Result};
use crate::model::{check_dim, Density1d, DiffLogDensity, GaussianMeasure, Measure, Sampler, Tail};
use crate::quadrature::RealLine;

/// Minimum number of draws accepted by the Monte Carlo estimator.
pub const MIN_SAMPLES: usize = 100;

/// A sampling distribution `ν` for the Fisher distance.
#[derive(Debug, Clone)]
pub struct ReferenceMeasure {
    measure: Measure,
    descriptor: String,
    is_target: bool,
}

impl ReferenceMeasure {
    pub fn new(measure: Measure) -> Self {
        let descriptor = measure.descriptor();
        Self {
            measure,
            descriptor,
            is_target: false,
        }
    }

    /// Marks `ν` as the target itself, so no comparability factor is needed.
    pub fn target(measure: Measure) -> Self {
        let descriptor = format!("target:{}", measure.descriptor());
        Self {
            measure,
            descriptor,
            is_target: true,
        }
    }

    pub fn with_descriptor(mut self, descriptor: impl Into<String>) -> Self {
        self.descriptor = descriptor.into();
        self
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn is_target(&self) -> bool {
        self.is_target
    }

    pub fn dim(&self) -> usize {
        self.measure.measure_dim()
    }

    /// Draw `index` of the stream for `seed`. Depends only on `(seed, index)`.
    pub fn draw(&self, seed: u64, index: u64, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.measure.sample_into(&mut rng, out);
    }

    pub fn draws(&self, seed: u64, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut x = vec![0.0; d];
                self.draw(seed, i, &mut x);
                x
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherEstimate {
    pub p: u8,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub nu_descriptor: String,
    pub nu_is_target: bool,
}

impl FisherEstimate {
    /// `value + k·std_error`.
    pub fn upper(&self, k: f64) -> f64 {
        self.value + k * self.std_error
    }

    /// An exactly known value (no Monte Carlo error).
    pub fn exact(p: u8, value: f64, nu_descriptor: impl Into<String>, nu_is_target: bool) -> Self {
        Self {
            p,
            value,
            std_error: 0.0,
            n_samples: 0,
            seed: 0,
            nu_descriptor: nu_descriptor.into(),
            nu_is_target,
        }
    }
}

pub(crate) fn check_p(p: u8) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(invalid(format!("p must be 1 or 2, got {p}")))
    }
}

fn score_gap_norm(target: &dyn DiffLogDensity, approx: &dyn DiffLogDensity, theta: &[f64]) -> f64 {
    let a = target.grad_log_density(theta);
    let b = approx.grad_log_density(theta);
    a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Monte Carlo `(p,ν)`-Fisher distance between `target` and `approx`.
///
/// Per-draw statistics are computed in parallel and summed in index order, so
/// the result is bit-identical for any thread count.
pub fn fisher_distance_mc(
    target: &dyn DiffLogDensity,
    approx: &dyn DiffLogDensity,
    nu: &ReferenceMeasure,
    p: u8,
    n: usize,
    seed: u64,
) -> Result<FisherEstimate> {
    check_p(p)?;
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let d = nu.dim();
    check_dim(target.dim(), d)?;
    check_dim(approx.dim(), d)?;

    let stats: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; d],
            |x, i| {
                nu.draw(seed, i, x);
                let g = score_gap_norm(target, approx, x);
                if p == 1 {
                    g
                } else {
                    g * g
                }
            },
        )
        .collect();

    if let Some(index) = stats.iter().position(|s| !s.is_finite()) {
        let mut point = vec![0.0; d];
        nu.draw(seed, index as u64, &mut point);
        return Err(Error::NonFiniteGradient { index, point });
    }

    let nf = n as f64;
    let mean = stats.iter().sum::<f64>() / nf;
    let var = stats.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (nf - 1.0);
    let se_mean = (var / nf).sqrt();
    let (value, std_error) = if p == 1 {
        (mean, se_mean)
    } else if mean > 0.0 {
        // delta method for the square root of the mean
        (mean.sqrt(), se_mean / (2.0 * mean.sqrt()))
    } else {
        (0.0, 0.0)
    };
    Ok(FisherEstimate {
        p,
        value,
        std_error,
        n_samples: n,
        seed,
        nu_descriptor: nu.descriptor().to_string(),
        nu_is_target: nu.is_target(),
    })
}

/// `(p,ν)`-Fisher distance of 1-D densities by quadrature against a normalized `ν`.
pub fn fisher_distance_quadrature_1d(
    target: &dyn DiffLogDensity,
    approx: &dyn DiffLogDensity,
    nu: &dyn Density1d,
    p: u8,
) -> Result<f64> {
    check_p(p)?;
    check_dim(1, target.dim())?;
    check_dim(1, approx.dim())?;
    let f = |x: f64| {
        let ln = nu.ln_pdf(x);
        if ln == f64::NEG_INFINITY {
            return 0.0;
        }
        let g = (target.grad_log_density(&[x])[0] - approx.grad_log_density(&[x])[0]).abs();
        if g == 0.0 {
            0.0
        } else {
            (ln + p as f64 * g.ln()).exp()
        }
    };
    let v = RealLine::new(nu.location(), nu.spread()).integrate(f, 1e-11)?;
    Ok(v.max(0.0).powf(1.0 / p as f64))
}

/// Closed-form `F_{2,ν}` between 1-D Gaussians `η = N(μ, σ²)` and
/// `η̂ = N(μ̂, σ̂²)` for `ν = N(μ + ε, ρσ²)`.
///
/// With `a = 1/σ² - 1/σ̂²` the score gap is affine, `aθ + b`, and
/// `F² = (aε + (μ̂-μ)/σ̂²)² + ρσ²a²`. Multiplying by `σ̂⁴` gives
/// `((r²-1)ε + Δμ)² + ρ(r+1)²Δσ²` with `r = σ̂/σ`; this returns `F`, not `F²`,
/// which the Monte Carlo estimator confirms.
pub fn fisher_distance_gaussian_closed(
    eta: &GaussianMeasure,
    eta_hat: &GaussianMeasure,
    eps: f64,
    rho: f64,
) -> Result<f64> {
    check_dim(1, eta.dim())?;
    check_dim(1, eta_hat.dim())?;
    if !(rho > 1.0) {
        return Err(invalid(format!("rho must exceed 1, got {rho}")));
    }
    Ok(gaussian_fisher_affine(eta, eta_hat, eps, rho))
}

fn gaussian_fisher_affine(eta: &GaussianMeasure, eta_hat: &GaussianMeasure, eps: f64, rho: f64) -> f64 {
    let (var, var_hat) = (eta.cov()[(0, 0)], eta_hat.cov()[(0, 0)]);
    let a = 1.0 / var - 1.0 / var_hat;
    let shift = a * eps + (eta_hat.mean()[0] - eta.mean()[0]) / var_hat;
    (shift * shift + rho * var * a * a).sqrt()
}

/// `F_{2,η}` between 1-D Gaussians with `ν = η`.
pub fn fisher_distance_gaussian_nu_target(eta: &GaussianMeasure, eta_hat: &GaussianMeasure) -> Result<f64> {
    check_dim(1, eta.dim())?;
    check_dim(1, eta_hat.dim())?;
    Ok(gaussian_fisher_affine(eta, eta_hat, 0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Chi2Based,
    SupRatioBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    UserSupplied,
}

/// `B₁ = (1 + χ²(η‖ν))^{1/2}` or `B₂ = ‖dη/dν‖_∞^{1/2}`; infinite when the
/// divergence or the ratio is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparabilityFactor {
    pub p: u8,
    pub value: f64,
    pub kind: FactorKind,
    pub provenance: Provenance,
}

impl ComparabilityFactor {
    fn kind_for(p: u8) -> FactorKind {
        if p == 1 {
            FactorKind::Chi2Based
        } else {
            FactorKind::SupRatioBased
        }
    }

    /// `ν = η`.
    pub fn unit(p: u8) -> Result<Self> {
        check_p(p)?;
        Ok(Self {
            p,
            value: 1.0,
            kind: Self::kind_for(p),
            provenance: Provenance::ClosedForm,
        })
    }

    pub fn user_supplied(p: u8, value: f64) -> Result<Self> {
        check_p(p)?;
        if !(value >= 0.0) {
            return Err(invalid(format!("comparability factor must be nonnegative, got {value}")));
        }
        Ok(Self {
            p,
            value,
            kind: Self::kind_for(p),
            provenance: Provenance::UserSupplied,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    fn from_chi2(div: &Divergence) -> Self {
        Self {
            p: 1,
            value: (1.0 + div.value()).sqrt(),
            kind: FactorKind::Chi2Based,
            provenance: match div.method() {
                Some(crate::divergences::Method::ClosedForm) => Provenance::ClosedForm,
                _ => Provenance::Quadrature,
            },
        }
    }
}

/// `log sup_x η(x)/ν(x)` for Gaussians, or `None` when unbounded.
pub fn gaussian_log_sup_ratio(eta: &GaussianMeasure, nu: &GaussianMeasure) -> Result<Option<f64>> {
    check_dim(nu.dim(), eta.dim())?;
    let a = eta.precision();
    let b = nu.precision();
    let (ma, mb) = (eta.mean(), nu.mean());
    let same_cov = (a - b).iter().all(|v| v.abs() <= 1e-14 * a.amax().max(1.0));
    if same_cov {
        let same_mean = (ma - mb).iter().all(|v| v.abs() <= 1e-14 * ma.amax().max(1.0));
        return Ok(same_mean.then_some(0.0));
    }
    let diff = a - b;
    let Some(chol) = nalgebra::Cholesky::new(diff) else {
        return Ok(None);
    };
    let lin = a * ma - b * mb;
    let m = chol.solve(&lin);
    let log = 0.5 * (nu.log_det_cov() - eta.log_det_cov()) + 0.5 * m.dot(&lin) - 0.5 * ma.dot(&(a * ma))
        + 0.5 * mb.dot(&(b * mb));
    Ok(Some(log))
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `sup_x num(x)/den(x)` for 1-D densities: a 4096-point grid over both
/// densities' `1e-10` quantile ranges, golden-section refinement at the best
/// node, far-tail probes, and an analytic tail comparison.
pub fn sup_ratio_1d(num: &dyn Density1d, den: &dyn Density1d) -> Result<Option<f64>> {
    if !Tail::ratio_bounded(num.tail_class(), den.tail_class()) {
        return Ok(None);
    }
    let lr = |x: f64| num.ln_pdf(x) - den.ln_pdf(x);
    let (a0, a1) = num.truncation(1e-10);
    let (b0, b1) = den.truncation(1e-10);
    let (lo, hi) = (a0.min(b0), a1.max(b1));
    let c = den.location();
    let s = den.spread().min(num.spread());
    let (t0, t1) = (((lo - c) / s).asinh(), ((hi - c) / s).asinh());
    const NODES: usize = 4096;
    let xs: Vec<f64> = (0..NODES)
        .map(|i| c + s * (t0 + (t1 - t0) * i as f64 / (NODES - 1) as f64).sinh())
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| lr(x)).collect();
    if vals.iter().any(|v| v.is_nan()) {
        return Err(Error::Quadrature("density ratio is undefined on the grid".into()));
    }
    let (imax, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let left = xs[imax.saturating_sub(1)];
    let right = xs[(imax + 1).min(NODES - 1)];
    let (_, mut best) = golden_max(lr, left, right);
    best = best.max(vals[imax]);
    for k in 0..=30 {
        let r = s * 10f64.powi(k);
        for x in [c - r, c + r] {
            let v = lr(x);
            if v.is_finite() {
                best = best.max(v);
            }
        }
    }
    Ok(Some(best.exp()))
}

/// Closed-form factor for Gaussian `η` and `ν`.
pub fn comparability_gaussian(p: u8, eta: &GaussianMeasure, nu: &GaussianMeasure) -> Result<ComparabilityFactor> {
    check_p(p)?;
    if p == 1 {
        return Ok(ComparabilityFactor::from_chi2(&chi2_gaussian(eta, nu)?));
    }
    let value = gaussian_log_sup_ratio(eta, nu)?.map_or(f64::INFINITY, |l| (0.5 * l).exp());
    Ok(ComparabilityFactor {
        p,
        value,
        kind: FactorKind::SupRatioBased,
        provenance: Provenance::ClosedForm,
    })
}

/// Quadrature (`p = 1`) or grid (`p = 2`) factor for normalized 1-D densities.
pub fn comparability_1d(p: u8, eta: &dyn Density1d, nu: &dyn Density1d) -> Result<ComparabilityFactor> {
    check_p(p)?;
    if p == 1 {
        return Ok(ComparabilityFactor::from_chi2(&chi2_numeric_1d(eta, nu)?));
    }
    let value = sup_ratio_1d(eta, nu)?.map_or(f64::INFINITY, f64::sqrt);
    Ok(ComparabilityFactor {
        p,
        value,
        kind: FactorKind::SupRatioBased,
        provenance: Provenance::Quadrature,
    })
}

/// Dispatches to the closed form for Gaussian pairs and to 1-D numerics otherwise.
pub fn comparability_factor(p: u8, eta: &Measure, nu: &Measure) -> Result<ComparabilityFactor> {
    match (eta, nu) {
        (Measure::Gaussian(a), Measure::Gaussian(b)) => comparability_gaussian(p, a, b),
        _ => {
            let (a, b) = (eta.as_univariate()?, nu.as_univariate()?);
            comparability_1d(p, a, b)
        }
    }
}

/// A 1-D log density normalized by quadrature, usable wherever a normalized
/// density is needed (comparability factors for non-closed-form targets).
pub struct NormalizedDensity1d<'a> {
    inner: &'a dyn DiffLogDensity,
    log_norm: f64,
    mode: f64,
    spread: f64,
    tail: Tail,
}

impl<'a> NormalizedDensity1d<'a> {
    pub fn new(inner: &'a dyn DiffLogDensity, mode: f64) -> Result<Self> {
        check_dim(1, inner.dim())?;
        let tail = inner
            .tail()
            .ok_or_else(|| Error::Unsupported("density does not declare its tail behaviour".into()))?;
        let spread = match inner.hess_log_density(&[mode]) {
            Some(h) if h[(0, 0)] < 0.0 => 1.0 / (-h[(0, 0)]).sqrt(),
            _ => 1.0,
        };
        let top = inner.log_density(&[mode]);
        let z = RealLine::new(mode, spread).integrate(|x| (inner.log_density(&[x]) - top).exp(), 1e-12)?;
        Ok(Self {
            inner,
            log_norm: top + z.ln(),
            mode,
            spread,
            tail,
        })
    }
}

impl Density1d for NormalizedDensity1d<'_> {
    fn ln_pdf(&self, x: f64) -> f64 {
        self.inner.log_density(&[x]) - self.log_norm
    }

    fn location(&self) -> f64 {
        self.mode
    }

    fn spread(&self) -> f64 {
        self.spread
    }

    fn tail_class(&self) -> Tail {
        self.tail
    }

    /// A conservative box of 40 curvature widths around the mode.
    fn truncation(&self, _mass: f64) -> (f64, f64) {
        (self.mode - 40.0 * self.spread, self.mode + 40.0 * self.spread)
    }
}
