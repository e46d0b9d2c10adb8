//! Laplace approximation and its Wasserstein certificates.
//!
//! Sign convention: `H*` is the Hessian of `log π` at the mode, so it is
//! negative definite. The approximation is `N(θ*, (-H*)⁻¹)` and `λ` holds the
//! eigenvalues of `(-H*)⁻¹`, all positive.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::certificates::{
    Theorem, WassersteinCertificate, ASSUME_CONCENTRATION_MEASURED, ASSUME_CONCENTRATION_USER, ASSUME_M_USER,
};
use crate::error::{invalid, Error, Result};
use crate::fisher::check_p;
use crate::model::{check_dim, DiffLogDensity, GaussianMeasure};
use crate::quadrature::RealLine;

pub const DEFAULT_MAP_TOL: f64 = 1e-10;
pub const MAX_NEWTON_ITERATIONS: usize = 200;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton ascent on `log π` from `init`, stopping at `‖∇ log π‖ ≤ tol`.
pub fn find_map(model: &dyn DiffLogDensity, init: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_dim(model.dim(), init.len())?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let mut theta = init.to_vec();
    let mut f = model.log_density(&theta);
    let mut g = model.grad_log_density(&theta);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let gn = norm(&g);
        if !gn.is_finite() {
            return Err(Error::NonFiniteGradient {
                index: 0,
                point: theta,
            });
        }
        if gn <= tol {
            return Ok(theta);
        }
        let h = model
            .hess_log_density(&theta)
            .ok_or_else(|| Error::Unsupported("the Newton solver needs a Hessian".into()))?;
        let chol = Cholesky::new(-h).ok_or_else(|| Error::NotNegativeDefinite { point: theta.clone() })?;
        let step = chol.solve(&DVector::from_column_slice(&g));

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let fc = model.log_density(&cand);
            let gc = model.grad_log_density(&cand);
            // Near the optimum the objective change drops below rounding, so
            // there a smaller gradient also counts as progress.
            let within_rounding = fc >= f - 1e-12 * (1.0 + f.abs());
            if fc.is_finite() && (fc > f || (within_rounding && norm(&gc) < gn)) {
                theta = cand;
                f = fc;
                g = gc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let grad_norm = norm(&g);
    if grad_norm <= tol {
        return Ok(theta);
    }
    Err(Error::NotConverged {
        iterations: MAX_NEWTON_ITERATIONS,
        grad_norm,
    })
}

/// `N(θ*, (-H*)⁻¹)` together with the pieces the certificate needs.
#[derive(Debug, Clone)]
pub struct LaplaceApproximation {
    pub theta_star: Vec<f64>,
    pub h_star: DMatrix<f64>,
    /// Eigenvalues of `(-H*)⁻¹`, ascending.
    pub lambda: Vec<f64>,
    pub gaussian: GaussianMeasure,
}

pub fn laplace_fit(model: &dyn DiffLogDensity, init: Option<&[f64]>) -> Result<LaplaceApproximation> {
    let zero = vec![0.0; model.dim()];
    let theta_star = find_map(model, init.unwrap_or(&zero), DEFAULT_MAP_TOL)?;
    let h = model
        .hess_log_density(&theta_star)
        .ok_or_else(|| Error::Unsupported("the Laplace approximation needs a Hessian".into()))?;
    let h_star = (&h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(-h_star.clone());
    if eig.eigenvalues.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::NotNegativeDefinite { point: theta_star });
    }
    let inv = eig.eigenvalues.map(|v| 1.0 / v);
    let cov = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let mut lambda: Vec<f64> = inv.iter().copied().collect();
    lambda.sort_by(f64::total_cmp);
    let gaussian = GaussianMeasure::new(theta_star.clone(), cov)?;
    Ok(LaplaceApproximation {
        theta_star,
        h_star,
        lambda,
        gaussian,
    })
}

/// Norm moments of `X ~ N(0, diag(λ))` and the constants built from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpLambda {
    pub l1: f64,
    pub l2: f64,
    /// `E‖X‖² = ‖λ‖₁`.
    pub second_moment: f64,
    /// `E‖X‖⁴ = ‖λ‖₁² + 2‖λ‖₂²`.
    pub fourth_moment: f64,
}

impl LpLambda {
    pub fn get(&self, p: u8) -> Result<f64> {
        match p {
            1 => Ok(self.l1),
            2 => Ok(self.l2),
            _ => Err(invalid(format!("p must be 1 or 2, got {p}"))),
        }
    }
}

pub fn lp_lambda(lambda: &[f64]) -> Result<LpLambda> {
    if lambda.is_empty() || lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(invalid("eigenvalues must be positive and finite"));
    }
    let l1: f64 = lambda.iter().sum();
    let sq: f64 = lambda.iter().map(|l| l * l).sum();
    let fourth = l1 * l1 + 2.0 * sq;
    Ok(LpLambda {
        l1,
        l2: fourth.sqrt(),
        second_moment: l1,
        fourth_moment: fourth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundProvenance {
    Analytic,
    UserSupplied,
    MeasuredByQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThirdDerivativeBound {
    pub value: f64,
    pub provenance: BoundProvenance,
}

/// The family's analytic `M`, unless the caller overrides it.
pub fn third_derivative_bound(model: &dyn DiffLogDensity, user: Option<f64>) -> Result<ThirdDerivativeBound> {
    if let Some(value) = user {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(invalid(format!("third-derivative bound must be nonnegative, got {value}")));
        }
        return Ok(ThirdDerivativeBound {
            value,
            provenance: BoundProvenance::UserSupplied,
        });
    }
    model
        .third_derivative_bound()
        .map(|value| ThirdDerivativeBound {
            value,
            provenance: BoundProvenance::Analytic,
        })
        .ok_or_else(|| Error::Unsupported("no analytic third-derivative bound for this family; supply M".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceCertificateInputs {
    pub alpha: f64,
    pub m: ThirdDerivativeBound,
    pub lp: LpLambda,
}

impl LaplaceCertificateInputs {
    pub fn from_fit(model: &dyn DiffLogDensity, fit: &LaplaceApproximation, user_m: Option<f64>) -> Result<Self> {
        let alpha = model
            .strong_convexity()
            .ok_or_else(|| Error::NoCertificate("no strong-convexity constant for this family".into()))?;
        Ok(Self {
            alpha,
            m: third_derivative_bound(model, user_m)?,
            lp: lp_lambda(&fit.lambda)?,
        })
    }
}

/// `W_p(π̂_Laplace, π) ≤ α⁻¹·L_p(λ)·M`.
pub fn laplace_error_bound(inputs: &LaplaceCertificateInputs, p: u8) -> Result<WassersteinCertificate> {
    let lp = inputs.lp.get(p)?;
    if !(inputs.alpha > 0.0) {
        return Err(invalid("alpha must be positive"));
    }
    let mut assumptions = Vec::new();
    if inputs.m.provenance == BoundProvenance::UserSupplied {
        assumptions.push(ASSUME_M_USER.to_string());
    }
    Ok(WassersteinCertificate {
        theorem: Theorem::LaplaceNonasymptotic,
        p,
        bound: lp * inputs.m.value / inputs.alpha,
        alpha: inputs.alpha,
        b_factor: 1.0,
        fisher_value: None,
        fisher_stderr: None,
        slack_k: 0.0,
        n_samples: None,
        seed: None,
        assumptions,
    })
}

/// The constant `L_p` with `(∫‖θ - θ*‖^{2p} dπ_n)^{1/p} ≤ L_p/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Concentration {
    pub value: f64,
    pub provenance: BoundProvenance,
}

impl Concentration {
    pub fn user_supplied(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(invalid("concentration constant must be nonnegative"));
        }
        Ok(Self {
            value,
            provenance: BoundProvenance::UserSupplied,
        })
    }
}

/// Measures `L_p = n·(E|θ - θ*|^{2p})^{1/p}` for a 1-D posterior by quadrature.
pub fn measure_concentration_1d(
    model: &dyn DiffLogDensity,
    fit: &LaplaceApproximation,
    n: usize,
    p: u8,
) -> Result<Concentration> {
    check_dim(1, model.dim())?;
    check_p(p)?;
    let c = fit.theta_star[0];
    let top = model.log_density(&[c]);
    let grid = RealLine::new(c, fit.lambda[0].sqrt());
    let dens = |x: f64| (model.log_density(&[x]) - top).exp();
    let z = grid.integrate(dens, 1e-12)?;
    let moment = grid.integrate(|x| dens(x) * (x - c).abs().powi(2 * p as i32), 1e-12)? / z;
    Ok(Concentration {
        value: n as f64 * moment.powf(1.0 / p as f64),
        provenance: BoundProvenance::MeasuredByQuadrature,
    })
}

/// `W_p(π̂_Laplace, π_n) ≤ L_p·M/(α·n)` in the large-`n` regime, where `α` and
/// `M` are per-observation constants.
pub fn laplace_asymptotic_bound(
    alpha: f64,
    m: f64,
    lp: &Concentration,
    n: usize,
    p: u8,
) -> Result<WassersteinCertificate> {
    check_p(p)?;
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    if !(alpha > 0.0) || !(m >= 0.0) {
        return Err(invalid("need alpha > 0 and M >= 0"));
    }
    let flag = match lp.provenance {
        BoundProvenance::MeasuredByQuadrature => ASSUME_CONCENTRATION_MEASURED,
        _ => ASSUME_CONCENTRATION_USER,
    };
    Ok(WassersteinCertificate {
        theorem: Theorem::LaplaceAsymptotic,
        p,
        bound: lp.value * m / (alpha * n as f64),
        alpha,
        b_factor: 1.0,
        fisher_value: None,
        fisher_stderr: None,
        slack_k: 0.0,
        n_samples: None,
        seed: None,
        assumptions: vec![flag.to_string()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_dataset, LogisticRegressionPosterior, QuarticGaussian};
    use crate::oracle::{wasserstein_1d, QuadraturePosterior1d, QuantileGrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn gaussian_target_is_reproduced() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = GaussianMeasure::new(vec![1.0, -2.0], cov.clone()).unwrap();
        let fit = laplace_fit(&g, Some(&[50.0, 30.0])).unwrap();
        assert!((fit.theta_star[0] - 1.0).abs() < 1e-12 && (fit.theta_star[1] + 2.0).abs() < 1e-12);
        assert!((fit.gaussian.cov() - cov).abs().max() < 1e-12);
        let inputs = LaplaceCertificateInputs::from_fit(&g, &fit, None).unwrap();
        for p in [1, 2] {
            assert_eq!(laplace_error_bound(&inputs, p).unwrap().bound, 0.0);
        }
    }

    #[test]
    fn quadratic_converges_in_one_step() {
        // a single Newton step lands exactly, so any iteration cap of 1 suffices
        let g = GaussianMeasure::univariate(3.0, 0.5).unwrap();
        let h = g.hess_log_density(&[0.0]).unwrap();
        let step = -g.grad_log_density(&[0.0])[0] / h[(0, 0)];
        assert!((step - 3.0).abs() < 1e-12);
        assert!((find_map(&g, &[0.0], 1e-10).unwrap()[0] - 3.0).abs() < 1e-12);
    }

    fn bisect_grad(model: &dyn DiffLogDensity) -> f64 {
        let (mut lo, mut hi) = (-50.0, 50.0);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if model.grad_log_density(&[mid])[0] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn logistic_map_matches_bisection() {
        let m = LogisticRegressionPosterior::synthetic(10, &[1.0], 1.0, 3).unwrap();
        let t = find_map(&m, &[0.0], 1e-10).unwrap();
        assert!(m.grad_log_density(&t)[0].abs() <= 1e-10);
        assert!((t[0] - bisect_grad(&m)).abs() < 1e-12);
    }

    #[test]
    fn map_is_init_invariant() {
        let m = LogisticRegressionPosterior::synthetic(50, &[1.0, -0.5, 0.3], 1.0, 8).unwrap();
        let a = find_map(&m, &[0.0; 3], 1e-10).unwrap();
        let far = [1e3 / 3f64.sqrt(), -1e3 / 3f64.sqrt(), 1e3 / 3f64.sqrt()];
        let b = find_map(&m, &far, 1e-10).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-8));
        let fit = laplace_fit(&m, None).unwrap();
        assert!(fit.lambda.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn quartic_covariance_is_inverse_curvature() {
        let q = QuarticGaussian::new(2, 1.0, 0.5, 2.0, -0.3).unwrap();
        let fit = laplace_fit(&q, None).unwrap();
        let curv = q.potential_hess_diag(&fit.theta_star);
        for i in 0..2 {
            assert!((fit.gaussian.cov()[(i, i)] - 1.0 / curv[i]).abs() < 1e-8);
        }
        assert!(fit.gaussian.cov()[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn non_concave_target_is_reported() {
        struct Saddle;
        impl DiffLogDensity for Saddle {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, t: &[f64]) -> f64 {
                0.5 * t[0] * t[0]
            }
            fn grad_log_density(&self, t: &[f64]) -> Vec<f64> {
                vec![t[0]]
            }
            fn hess_log_density(&self, _: &[f64]) -> Option<DMatrix<f64>> {
                Some(DMatrix::from_element(1, 1, 1.0))
            }
        }
        assert!(matches!(find_map(&Saddle, &[1.0], 1e-10), Err(Error::NotNegativeDefinite { .. })));
    }

    #[test]
    fn lp_lambda_examples() {
        let a = lp_lambda(&[1.0]).unwrap();
        assert_eq!((a.l1, a.fourth_moment), (1.0, 3.0));
        assert!((a.l2 - 3f64.sqrt()).abs() < 1e-15);
        let b = lp_lambda(&[1.0, 1.0]).unwrap();
        assert_eq!(b.l1, 2.0);
        assert!((b.l2 - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let c = lp_lambda(&[2.0, 3.0]).unwrap();
        assert_eq!((c.second_moment, c.fourth_moment), (5.0, 51.0));
        assert!(lp_lambda(&[1.0, -1.0]).is_err());
    }

    fn mc_norm_moments(lambda: &[f64], n: usize, seed: u64) -> [(f64, f64); 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s2, mut s2sq, mut s4, mut s4sq) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let r2: f64 = lambda
                .iter()
                .map(|l| {
                    let z: f64 = rng.sample(StandardNormal);
                    l * z * z
                })
                .sum();
            s2 += r2;
            s2sq += r2 * r2;
            s4 += r2 * r2;
            s4sq += r2.powi(4);
        }
        let nf = n as f64;
        let stat = |s: f64, sq: f64| {
            let m = s / nf;
            (m, ((sq / nf - m * m) / nf).sqrt())
        };
        [stat(s2, s2sq), stat(s4, s4sq)]
    }

    #[test]
    fn gaussian_norm_moments_match_monte_carlo() {
        let c = lp_lambda(&[2.0, 3.0]).unwrap();
        let [(m2, se2), (m4, se4)] = mc_norm_moments(&[2.0, 3.0], 1_000_000, 1);
        assert!((m2 - c.second_moment).abs() <= 3.0 * se2);
        assert!((m4 - c.fourth_moment).abs() <= 3.0 * se4);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut misses = 0;
        for trial in 0..20 {
            let d = rng.random_range(1..5);
            let lambda: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..3.0)).collect();
            let c = lp_lambda(&lambda).unwrap();
            let [(m2, se2), (m4, se4)] = mc_norm_moments(&lambda, 1_000_000, 1000 + trial);
            misses += usize::from((m2 - c.second_moment).abs() > 3.0 * se2);
            misses += usize::from((m4 - c.fourth_moment).abs() > 3.0 * se4);
        }
        // 40 checks at the 3-sigma level: more than two misses would be a 1-in-1000 event
        assert!(misses <= 2, "{misses} misses");
    }

    /// `Σ_j ‖∂_j ∇² log π(θ)‖₂²` from central differences of the Hessian.
    fn fd_third_derivative_sq(model: &dyn DiffLogDensity, theta: &[f64]) -> f64 {
        let d = theta.len();
        let mut total = 0.0;
        let mut y = theta.to_vec();
        for j in 0..d {
            let h = 1e-4 * (1.0 + theta[j].abs());
            y[j] = theta[j] + h;
            let hp = model.hess_log_density(&y).unwrap();
            y[j] = theta[j] - h;
            let hm = model.hess_log_density(&y).unwrap();
            y[j] = theta[j];
            let t = (hp - hm) / (2.0 * h);
            let norm = SymmetricEigen::new(t).eigenvalues.amax();
            total += norm * norm;
        }
        total
    }

    fn sweep_m(model: &dyn DiffLogDensity, spread: f64, seed: u64) {
        let m = third_derivative_bound(model, None).unwrap().value;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = model.dim();
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let theta: Vec<f64> = (0..d).map(|_| rng.random_range(-spread..spread)).collect();
            worst = worst.max(fd_third_derivative_sq(model, &theta).sqrt());
        }
        assert!(worst <= m * (1.0 + 1e-6), "sampled {worst} exceeds M = {m}");
    }

    #[test]
    fn third_derivative_bounds_survive_finite_differences() {
        let single = LogisticRegressionPosterior::new(DMatrix::from_element(1, 1, 1.0), vec![1.0], 1.0).unwrap();
        let m = third_derivative_bound(&single, None).unwrap();
        assert_eq!(m.provenance, BoundProvenance::Analytic);
        assert!((m.value - crate::model::LOGISTIC_THIRD_DERIVATIVE_SUP).abs() < 1e-15);
        sweep_m(&single, 6.0, 1);
        sweep_m(&LogisticRegressionPosterior::synthetic(15, &[0.5, -1.0], 1.0, 2).unwrap(), 4.0, 2);
        sweep_m(&QuarticGaussian::new(1, 1.0, 0.0, 3.0, 0.4).unwrap(), 4.0, 3);
        sweep_m(&QuarticGaussian::new(3, 1.0, 0.0, 3.0, 0.4).unwrap(), 4.0, 4);
        let g = GaussianMeasure::univariate(0.0, 1.0).unwrap();
        assert_eq!(third_derivative_bound(&g, None).unwrap().value, 0.0);
        let user = third_derivative_bound(&g, Some(7.5)).unwrap();
        assert_eq!((user.value, user.provenance), (7.5, BoundProvenance::UserSupplied));
        assert!(third_derivative_bound(&g, Some(-1.0)).is_err());
    }

    #[test]
    fn certificate_formula() {
        let inputs = LaplaceCertificateInputs {
            alpha: 1.0,
            m: ThirdDerivativeBound {
                value: 0.1,
                provenance: BoundProvenance::UserSupplied,
            },
            lp: lp_lambda(&[1.0]).unwrap(),
        };
        let c1 = laplace_error_bound(&inputs, 1).unwrap();
        assert!((c1.bound - 0.1).abs() < 1e-15);
        assert_eq!(c1.theorem, Theorem::LaplaceNonasymptotic);
        assert_eq!(c1.assumptions, vec![ASSUME_M_USER.to_string()]);
        assert!((laplace_error_bound(&inputs, 2).unwrap().bound - 0.1 * 3f64.sqrt()).abs() < 1e-15);
        assert!(laplace_error_bound(&inputs, 3).is_err());
    }

    fn assert_sound_1d(model: &dyn DiffLogDensity) {
        let fit = laplace_fit(model, None).unwrap();
        let inputs = LaplaceCertificateInputs::from_fit(model, &fit, None).unwrap();
        let bound = laplace_error_bound(&inputs, 1).unwrap().bound;
        let post = QuadraturePosterior1d::new(model).unwrap();
        let w1 = wasserstein_1d(1, &fit.gaussian, &post, &QuantileGrid::default()).unwrap();
        assert!(bound >= w1, "bound {bound} < W1 {w1}");
    }

    #[test]
    fn nonasymptotic_bound_is_sound_at_desk_scale() {
        let (x, y) = parse_dataset(include_str!("../data/logistic_1d_n20.csv")).unwrap();
        assert_sound_1d(&LogisticRegressionPosterior::new(x, y, 1.0).unwrap());
        assert_sound_1d(&LogisticRegressionPosterior::synthetic(100, &[1.0], 1.0, 5).unwrap());
        assert_sound_1d(&QuarticGaussian::new(1, 1.0, 0.0, 2.0, 0.5).unwrap());
    }

    #[test]
    fn asymptotic_examples() {
        let lp = Concentration::user_supplied(3.0).unwrap();
        assert_eq!(laplace_asymptotic_bound(1.0, 0.0, &lp, 100, 1).unwrap().bound, 0.0);
        let c = laplace_asymptotic_bound(1.0, 2.0, &lp, 100, 1).unwrap();
        assert!((c.bound - 0.06).abs() < 1e-15);
        assert_eq!(c.assumptions, vec![ASSUME_CONCENTRATION_USER.to_string()]);
        assert!(laplace_asymptotic_bound(1.0, 2.0, &lp, 0, 1).is_err());
    }

    #[test]
    fn asymptotic_bound_decays_like_one_over_n() {
        let mut bounds = Vec::new();
        for n in [50usize, 100, 200] {
            let model = LogisticRegressionPosterior::synthetic(n, &[1.0], 1.0, 21).unwrap();
            let fit = laplace_fit(&model, None).unwrap();
            let lp = measure_concentration_1d(&model, &fit, n, 1).unwrap();
            let alpha = 1.0 / (fit.lambda[0] * n as f64);
            let m = model.third_derivative_bound().unwrap() / n as f64;
            let c = laplace_asymptotic_bound(alpha, m, &lp, n, 1).unwrap();
            assert_eq!(c.assumptions, vec![ASSUME_CONCENTRATION_MEASURED.to_string()]);
            bounds.push(c.bound * n as f64);
        }
        // n·bound stays roughly constant
        for w in bounds.windows(2) {
            assert!(w[1] / w[0] > 0.5 && w[1] / w[0] < 2.0, "{bounds:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn lp_invariant_under_rotation(l in prop::collection::vec(0.1f64..5.0, 3), angles in prop::array::uniform3(0.0f64..std::f64::consts::TAU)) {
            let rot = |i: usize, j: usize, a: f64| {
                let mut r = DMatrix::<f64>::identity(3, 3);
                r[(i, i)] = a.cos();
                r[(j, j)] = a.cos();
                r[(i, j)] = -a.sin();
                r[(j, i)] = a.sin();
                r
            };
            let q = rot(0, 1, angles[0]) * rot(1, 2, angles[1]) * rot(0, 2, angles[2]);
            let h = -(&q * DMatrix::from_diagonal(&DVector::from_iterator(3, l.iter().map(|v| 1.0 / v))) * q.transpose());
            let eig = SymmetricEigen::new(-h);
            let lam: Vec<f64> = eig.eigenvalues.iter().map(|v| 1.0 / v).collect();
            let a = lp_lambda(&l).unwrap();
            let b = lp_lambda(&lam).unwrap();
            prop_assert!((a.l1 - b.l1).abs() < 1e-10 * a.l1);
            prop_assert!((a.l2 - b.l2).abs() < 1e-10 * a.l2);
        }
    }
}
