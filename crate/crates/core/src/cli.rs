//! Command-line front end: JSON model specs in, certificates and CSVs out.
//!
//! Exit codes: 0 on success, 1 for an invalid spec or unreadable input,
//! 2 when a certificate cannot be issued (a `no_certificate` JSON document is
//! still written to stdout).

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

use crate::certificates::{
    moment_error_report, tv_from_fisher, wasserstein_from_fisher, wasserstein_from_fisher_reference,
    ConvexityCertificate, SummaryErrorReport, WassersteinCertificate, ASSUME_ALPHA_USER, DEFAULT_SLACK_K,
};
use crate::coreset::{build_coreset_fw, coreset_certificate, gradient_feature_matrix, DEFAULT_PROJECTION_SIZE};
use crate::error::Error;
use crate::figures::{fig1_rows, fig2_rows, write_csv};
use crate::fisher::{
    comparability_1d, comparability_factor, fisher_distance_mc, ComparabilityFactor, FisherEstimate,
    NormalizedDensity1d, ReferenceMeasure,
};
use crate::laplace::{
    laplace_error_bound, laplace_fit, lp_lambda, third_derivative_bound, LaplaceApproximation,
    LaplaceCertificateInputs,
};
use crate::model::{
    load_dataset, load_observations, DatumModel, DiffLogDensity, GaussianLocationModel, GaussianMeasure,
    LogisticRegressionPosterior, Measure, QuarticGaussian, StudentTMeasure, WeightedPosterior,
};
use crate::oracle::{gaussian_w2_bures, wasserstein_1d, QuantileGrid};

#[derive(Debug, Parser)]
#[command(name = "fisherbound", version, about = "Certified Wasserstein and TV error bounds for posterior approximations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify W_p, TV and summary-statistic errors of an approximation.
    Certify {
        #[arg(long)]
        spec: PathBuf,
        /// Also write the JSON document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit and certify a Laplace approximation.
    Laplace {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and certify a Frank–Wolfe coreset.
    Coreset {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        k: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the comparison curves as CSV.
    Figures {
        #[arg(long, value_enum)]
        which: Figure,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig2,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("no certificate: {0}")]
    NoCertificate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) => 1,
            CliError::NoCertificate(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::Parse { .. }
            | Error::EmptyDataset
            | Error::TooFewSamples { .. }
            | Error::Io { .. } => CliError::Spec(e.to_string()),
            _ => CliError::NoCertificate(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT,
    Logistic,
    QuarticGaussian,
    GaussianLocation,
}

/// The only keyword accepted where a measure is expected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKeyword {
    Target,
    LaplaceOfTarget,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    StudentT {
        dof: f64,
        #[serde(default)]
        location: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MeasureRef {
    Keyword(MeasureKeyword),
    Explicit(MeasureSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub p: u8,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_slack")]
    pub slack_k: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexitySpec {
    GlobalStrong { alpha: f64 },
    TailStrong { k: f64, r: f64, alpha: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub params: Value,
    /// Resolved relative to the directory holding the model spec file.
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    #[serde(default)]
    pub approx: Option<MeasureRef>,
    pub nu: MeasureRef,
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub convexity: Option<ConvexitySpec>,
    #[serde(default)]
    pub third_derivative_bound: Option<f64>,
    #[serde(default)]
    pub b_factor: Option<f64>,
    #[serde(default)]
    pub projection_draws: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn default_slack() -> f64 {
    DEFAULT_SLACK_K
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianParams {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudentTParams {
    dof: f64,
    #[serde(default)]
    location: f64,
    #[serde(default = "one")]
    scale: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticSpec {
    n: usize,
    theta_true: Vec<f64>,
    seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogisticParams {
    prior_precision: f64,
    #[serde(default)]
    synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuarticParams {
    dim: usize,
    curvature: f64,
    center: f64,
    quartic: f64,
    shift: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LocationParams {
    noise_variance: f64,
    prior_precision: f64,
    #[serde(default)]
    synthetic: Option<SyntheticSpec>,
}

/// Reads a spec and returns it with the directory relative paths resolve against.
pub fn load_spec(path: &Path) -> CliResult<(ModelSpec, PathBuf)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
    let spec = parse_spec(&text)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((spec, base))
}

pub fn parse_spec(text: &str) -> CliResult<ModelSpec> {
    serde_json::from_str(text).map_err(|e| CliError::Spec(e.to_string()))
}

fn params<T: serde::de::DeserializeOwned>(spec: &ModelSpec) -> CliResult<T> {
    serde_json::from_value(spec.params.clone()).map_err(|e| CliError::Spec(format!("params: {e}")))
}

fn matrix(rows: &[Vec<f64>]) -> CliResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Spec("cov must be a square matrix".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn build_measure(m: &MeasureSpec) -> CliResult<Measure> {
    Ok(match m {
        MeasureSpec::Gaussian { mean, cov } => Measure::Gaussian(GaussianMeasure::new(mean.clone(), matrix(cov)?)?),
        MeasureSpec::StudentT { dof, location, scale } => {
            Measure::StudentT(StudentTMeasure::new(*dof, *location, *scale)?)
        }
    })
}

/// A resolved target posterior.
pub enum Target {
    Closed(Measure),
    Logistic(LogisticRegressionPosterior),
    Quartic(QuarticGaussian),
    /// The location model together with its closed-form posterior.
    Location(GaussianLocationModel, Measure),
}

impl Target {
    pub fn density(&self) -> &dyn DiffLogDensity {
        match self {
            Target::Closed(m) | Target::Location(_, m) => m.as_density(),
            Target::Logistic(l) => l,
            Target::Quartic(q) => q,
        }
    }

    pub fn closed_form(&self) -> Option<&Measure> {
        match self {
            Target::Closed(m) | Target::Location(_, m) => Some(m),
            _ => None,
        }
    }

    pub fn datum_model(&self) -> Option<&dyn DatumModel> {
        match self {
            Target::Logistic(l) => Some(l),
            Target::Location(g, _) => Some(g),
            _ => None,
        }
    }
}

pub fn build_target(spec: &ModelSpec, base: &Path) -> CliResult<Target> {
    let data_path = spec.data_path.as_ref().map(|p| base.join(p));
    Ok(match spec.family {
        Family::Gaussian => {
            let p: GaussianParams = params(spec)?;
            Target::Closed(Measure::Gaussian(GaussianMeasure::new(p.mean, matrix(&p.cov)?)?))
        }
        Family::StudentT => {
            let p: StudentTParams = params(spec)?;
            Target::Closed(Measure::StudentT(StudentTMeasure::new(p.dof, p.location, p.scale)?))
        }
        Family::QuarticGaussian => {
            let p: QuarticParams = params(spec)?;
            Target::Quartic(QuarticGaussian::new(p.dim, p.curvature, p.center, p.quartic, p.shift)?)
        }
        Family::Logistic => {
            let p: LogisticParams = params(spec)?;
            let model = match (data_path, p.synthetic) {
                (Some(path), None) => {
                    let (x, y) = load_dataset(path)?;
                    LogisticRegressionPosterior::new(x, y, p.prior_precision)?
                }
                (None, Some(s)) => LogisticRegressionPosterior::synthetic(s.n, &s.theta_true, p.prior_precision, s.seed)?,
                _ => return Err(CliError::Spec("logistic needs exactly one of data_path or params.synthetic".into())),
            };
            Target::Logistic(model)
        }
        Family::GaussianLocation => {
            let p: LocationParams = params(spec)?;
            let model = match (data_path, p.synthetic) {
                (Some(path), None) => {
                    GaussianLocationModel::new(load_observations(path)?, p.noise_variance, p.prior_precision)?
                }
                (None, Some(s)) => {
                    GaussianLocationModel::synthetic(s.n, &s.theta_true, p.noise_variance, p.prior_precision, s.seed)?
                }
                _ => {
                    return Err(CliError::Spec(
                        "gaussian_location needs exactly one of data_path or params.synthetic".into(),
                    ))
                }
            };
            let post = model.posterior(&vec![1.0; model.n_data()])?;
            Target::Location(model, Measure::Gaussian(post))
        }
    })
}

fn check_estimator(e: &EstimatorSpec) -> CliResult<()> {
    if e.p != 1 && e.p != 2 {
        return Err(CliError::Spec(format!("estimator.p must be 1 or 2, got {}", e.p)));
    }
    if !(e.slack_k >= 0.0 && e.slack_k.is_finite()) {
        return Err(CliError::Spec("estimator.slack_k must be nonnegative".into()));
    }
    Ok(())
}

fn convexity(spec: &ModelSpec, fallback: Option<f64>) -> CliResult<ConvexityCertificate> {
    Ok(match &spec.convexity {
        Some(ConvexitySpec::GlobalStrong { alpha }) => ConvexityCertificate::global(*alpha)?,
        Some(ConvexitySpec::TailStrong { k, r, alpha }) => ConvexityCertificate::tail(*k, *r, *alpha)?,
        None => match fallback {
            Some(a) => ConvexityCertificate::global(a)?,
            None => {
                return Err(CliError::NoCertificate(
                    "no strong-convexity constant is derivable for this family; supply convexity".into(),
                ))
            }
        },
    })
}

fn other_p(p: u8) -> u8 {
    3 - p
}

/// Lazily computed Laplace fit of the target, shared by every consumer.
struct Fit<'a> {
    target: &'a Target,
    fit: Option<LaplaceApproximation>,
}

impl<'a> Fit<'a> {
    fn new(target: &'a Target) -> Self {
        Self { target, fit: None }
    }

    fn get(&mut self) -> CliResult<&LaplaceApproximation> {
        if self.fit.is_none() {
            self.fit = Some(laplace_fit(self.target.density(), None)?);
        }
        Ok(self.fit.as_ref().expect("just set"))
    }
}

fn resolve_measure(r: &MeasureRef, target: &Target, fit: &mut Fit) -> CliResult<(Measure, bool)> {
    Ok(match r {
        MeasureRef::Keyword(MeasureKeyword::Target) => match target.closed_form() {
            Some(m) => (m.clone(), true),
            None => return Err(CliError::Spec("\"target\" needs a closed-form target family".into())),
        },
        MeasureRef::Keyword(MeasureKeyword::LaplaceOfTarget) => (Measure::Gaussian(fit.get()?.gaussian.clone()), false),
        MeasureRef::Explicit(m) => (build_measure(m)?, false),
    })
}

/// `B_p` for a reference measure that is not the target.
fn comparability(
    spec: &ModelSpec,
    p: u8,
    target: &Target,
    nu: &Measure,
    fit: &mut Fit,
) -> CliResult<Option<ComparabilityFactor>> {
    if let Some(b) = spec.b_factor {
        // a user factor is stated for the requested p only
        return Ok(if p == spec.estimator.p {
            Some(ComparabilityFactor::user_supplied(p, b)?)
        } else {
            None
        });
    }
    if let Some(eta) = target.closed_form() {
        return Ok(Some(comparability_factor(p, eta, nu)?));
    }
    if target.density().dim() == 1 {
        let mode = fit.get()?.theta_star[0];
        let eta = NormalizedDensity1d::new(target.density(), mode)?;
        return Ok(Some(comparability_1d(p, &eta, nu.as_univariate()?)?));
    }
    Ok(None)
}

#[derive(Debug, Serialize)]
struct Check {
    kind: &'static str,
    w1: Option<f64>,
    w2: f64,
}

#[derive(Debug, Serialize)]
struct CertifyOutput {
    status: &'static str,
    family: Family,
    target: String,
    approximation: String,
    nu: String,
    certificate: WassersteinCertificate,
    companion_certificate: Option<WassersteinCertificate>,
    comparability: Vec<ComparabilityFactor>,
    tv_bound: Option<f64>,
    summary_errors: SummaryErrorReport,
    check: Option<Check>,
}

fn describe_target(target: &Target, spec: &ModelSpec) -> String {
    match target.closed_form() {
        Some(m) if spec.family != Family::GaussianLocation => m.descriptor(),
        _ => format!("{}(d={})", family_name(spec.family), target.density().dim()),
    }
}

fn family_name(f: Family) -> String {
    serde_json::to_value(f)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn exact_check(target: &Target, approx: &Measure) -> CliResult<Option<Check>> {
    let Some(eta) = target.closed_form() else {
        return Ok(None);
    };
    if let (Some(a), Some(b)) = (eta.as_gaussian(), approx.as_gaussian()) {
        return Ok(Some(Check {
            kind: "closed_form_bures",
            w1: None,
            w2: gaussian_w2_bures(a, b)?,
        }));
    }
    if eta.measure_dim() == 1 && approx.measure_dim() == 1 {
        let (f, g) = (eta.as_univariate()?, approx.as_univariate()?);
        let grid = QuantileGrid::default();
        let w1 = wasserstein_1d(1, f, g, &grid)?;
        let w2 = wasserstein_1d(2, f, g, &grid)?;
        return Ok(Some(Check {
            kind: "quantile_oracle",
            w1: Some(w1),
            w2,
        }));
    }
    Ok(None)
}

/// Runs the certify pipeline and returns the JSON document.
pub fn cmd_certify(spec: &ModelSpec, base: &Path) -> CliResult<String> {
    check_estimator(&spec.estimator)?;
    let est = &spec.estimator;
    let target = build_target(spec, base)?;
    let mut fit = Fit::new(&target);
    let (approx, _) = resolve_measure(
        spec.approx.as_ref().unwrap_or(&MeasureRef::Keyword(MeasureKeyword::LaplaceOfTarget)),
        &target,
        &mut fit,
    )?;
    let (nu_measure, nu_is_target) = resolve_measure(&spec.nu, &target, &mut fit)?;
    if nu_measure.measure_dim() != target.density().dim() || approx.measure_dim() != target.density().dim() {
        return Err(CliError::Spec("approximation and reference measure must match the target dimension".into()));
    }
    let cert = convexity(spec, approx.as_density().strong_convexity())?;
    let nu_descriptor = match &spec.nu {
        MeasureRef::Keyword(MeasureKeyword::LaplaceOfTarget) => format!("laplace_of_target:{}", nu_measure.descriptor()),
        _ => nu_measure.descriptor(),
    };
    let nu = if nu_is_target {
        ReferenceMeasure::target(nu_measure.clone())
    } else {
        ReferenceMeasure::new(nu_measure.clone()).with_descriptor(nu_descriptor)
    };
    let fisher = |p: u8| fisher_distance_mc(target.density(), approx.as_density(), &nu, p, est.n_samples, est.seed);
    let k = est.slack_k;

    let mut certs: [Option<WassersteinCertificate>; 2] = [None, None];
    let mut factors = Vec::new();
    let fe2: FisherEstimate;
    let sup_ratio: Option<f64>;
    if nu_is_target {
        let fe1 = fisher(1)?;
        fe2 = fisher(2)?;
        for (slot, fe) in certs.iter_mut().zip([&fe1, &fe2]) {
            *slot = Some(wasserstein_from_fisher(&cert, fe, fe.p, k)?);
        }
        sup_ratio = Some(1.0);
    } else {
        fe2 = fisher(2)?;
        let mut b2 = None;
        for p in [est.p, other_p(est.p)] {
            let b = match comparability(spec, p, &target, &nu_measure, &mut fit) {
                Err(_) if p != est.p => None,
                b => b?,
            };
            let Some(b) = b else {
                if p == est.p {
                    return Err(CliError::NoCertificate(format!(
                        "no comparability factor B_{p} is available for this target; supply b_factor"
                    )));
                }
                continue;
            };
            if p == 2 {
                b2 = Some(b.value);
            }
            let c = wasserstein_from_fisher_reference(&cert, &b, &fe2, p, k);
            factors.push(b);
            match c {
                Ok(c) => certs[(p - 1) as usize] = Some(c),
                Err(e) if p == est.p => return Err(e.into()),
                Err(_) => {}
            }
        }
        sup_ratio = b2.filter(|b| b.is_finite()).map(|b| b * b);
    }

    let w1 = certs[0].as_ref().map(|c| c.bound);
    let w2 = certs[1].as_ref().map(|c| c.bound);
    let eps1 = w1.or(w2).expect("the requested certificate exists");
    let mut sigma_norm = approx.as_gaussian().map(GaussianMeasure::cov_spectral_norm);
    if let Some(g) = target.closed_form().and_then(Measure::as_gaussian) {
        let s = g.cov_spectral_norm();
        sigma_norm = Some(sigma_norm.map_or(s, |a| a.min(s)));
    }
    let density_cap = match target.closed_form() {
        Some(m) if m.measure_dim() == 1 => Some(m.as_univariate()?.density_cap()),
        _ => None,
    };
    let mut summary = moment_error_report(eps1, w2, sigma_norm, density_cap)?;
    let tv_bound = match sup_ratio {
        Some(s) => Some(tv_from_fisher(&cert, s, &fe2, k)?),
        None => None,
    };
    if let Some(tv) = tv_bound {
        summary = summary.with_tv_bound(tv);
    }
    let requested = est.p as usize - 1;
    let certificate = certs[requested].take().expect("the requested certificate exists");
    let out = CertifyOutput {
        status: "ok",
        family: spec.family,
        target: describe_target(&target, spec),
        approximation: approx.descriptor(),
        nu: nu.descriptor().to_string(),
        certificate,
        companion_certificate: certs[1 - requested].take(),
        comparability: factors,
        tv_bound,
        summary_errors: summary,
        check: exact_check(&target, &approx)?,
    };
    to_json(&out)
}

#[derive(Debug, Serialize)]
struct LaplaceOutput {
    status: &'static str,
    family: Family,
    theta_star: Vec<f64>,
    lambda: Vec<f64>,
    inputs: LaplaceCertificateInputs,
    certificate: WassersteinCertificate,
}

#[derive(Debug, Serialize)]
struct LaplaceRow {
    index: usize,
    theta_star: f64,
    lambda: f64,
}

/// Fits the Laplace approximation, writes `laplace_fit.csv` and
/// `laplace_certificate.json` into `out`, and returns the JSON document.
pub fn cmd_laplace(spec: &ModelSpec, base: &Path, out: &Path) -> CliResult<String> {
    check_estimator(&spec.estimator)?;
    let target = build_target(spec, base)?;
    let model = target.density();
    let fit = laplace_fit(model, None)?;
    let inputs = match &spec.convexity {
        None => LaplaceCertificateInputs::from_fit(model, &fit, spec.third_derivative_bound)?,
        Some(_) => LaplaceCertificateInputs {
            alpha: convexity(spec, None)?.alpha(),
            m: third_derivative_bound(model, spec.third_derivative_bound)?,
            lp: lp_lambda(&fit.lambda)?,
        },
    };
    let mut certificate = laplace_error_bound(&inputs, spec.estimator.p)?;
    if spec.convexity.is_some() {
        certificate.assumptions.push(ASSUME_ALPHA_USER.to_string());
    }
    create_dir(out)?;
    let rows: Vec<LaplaceRow> = fit
        .theta_star
        .iter()
        .zip(&fit.lambda)
        .enumerate()
        .map(|(index, (&theta_star, &lambda))| LaplaceRow {
            index,
            theta_star,
            lambda,
        })
        .collect();
    write_csv(&rows, &out.join("laplace_fit.csv"))?;
    let doc = to_json(&LaplaceOutput {
        status: "ok",
        family: spec.family,
        theta_star: fit.theta_star.clone(),
        lambda: fit.lambda.clone(),
        inputs,
        certificate,
    })?;
    write_file(&out.join("laplace_certificate.json"), &doc)?;
    Ok(doc)
}

#[derive(Debug, Serialize)]
struct CoresetOutput {
    status: &'static str,
    family: Family,
    k: usize,
    support_size: usize,
    projection_draws: usize,
    objective: f64,
    certificate: WassersteinCertificate,
}

#[derive(Debug, Serialize)]
struct WeightRow {
    index: usize,
    weight: f64,
}

#[derive(Debug, Serialize)]
struct TraceRow {
    k: usize,
    objective: f64,
}

/// Builds a `K`-iteration coreset, writes `weights.csv`, `trace.csv` and
/// `coreset_certificate.json` into `out`, and returns the JSON document.
///
/// The certificate uses a fresh Fisher estimate at `seed + 1`, independent of
/// the projection draws.
pub fn cmd_coreset(spec: &ModelSpec, base: &Path, k_iter: usize, out: &Path) -> CliResult<String> {
    check_estimator(&spec.estimator)?;
    let est = &spec.estimator;
    let target = build_target(spec, base)?;
    let model = target
        .datum_model()
        .ok_or_else(|| CliError::Spec("coreset needs a per-datum family (logistic or gaussian_location)".into()))?;
    let mut fit = Fit::new(&target);
    let (nu_measure, nu_is_target) = resolve_measure(&spec.nu, &target, &mut fit)?;
    let nu = if nu_is_target {
        ReferenceMeasure::target(nu_measure.clone())
    } else {
        ReferenceMeasure::new(nu_measure.clone())
    };
    let s = spec.projection_draws.unwrap_or(DEFAULT_PROJECTION_SIZE);
    let fs = gradient_feature_matrix(model, &nu, s, est.seed)?;
    let result = build_coreset_fw(&fs, k_iter)?;

    create_dir(out)?;
    let weights: Vec<WeightRow> = result
        .weights
        .iter()
        .enumerate()
        .map(|(index, &weight)| WeightRow { index, weight })
        .collect();
    write_csv(&weights, &out.join("weights.csv"))?;
    let trace: Vec<TraceRow> = result
        .objective_trace
        .iter()
        .enumerate()
        .map(|(i, &objective)| TraceRow { k: i + 1, objective })
        .collect();
    write_csv(&trace, &out.join("trace.csv"))?;

    let coreset = WeightedPosterior::new(model, result.weights.clone())?;
    let cert = convexity(spec, coreset.strong_convexity())?;
    let b = if nu_is_target {
        Some(ComparabilityFactor::unit(est.p)?)
    } else {
        comparability(spec, est.p, &target, &nu_measure, &mut fit)?
    };
    let b = b.ok_or_else(|| {
        CliError::NoCertificate(format!("no comparability factor B_{} is available; supply b_factor", est.p))
    })?;
    let check = fisher_distance_mc(target.density(), &coreset, &nu, 2, est.n_samples, est.seed.wrapping_add(1))?;
    let objective = *result.objective_trace.last().expect("trace is nonempty");
    let certificate = coreset_certificate(&cert, &b, objective, Some(&check), est.slack_k)?;
    let doc = to_json(&CoresetOutput {
        status: "ok",
        family: spec.family,
        k: k_iter,
        support_size: result.support_size,
        projection_draws: s,
        objective,
        certificate,
    })?;
    write_file(&out.join("coreset_certificate.json"), &doc)?;
    Ok(doc)
}

pub fn cmd_figures(which: Figure, out: &Path) -> CliResult<()> {
    match which {
        Figure::Fig1 => write_csv(&fig1_rows()?, out)?,
        Figure::Fig2 => write_csv(&fig2_rows()?, out)?,
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::NoCertificate(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
    .into()
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// The document printed on the certified-failure path.
pub fn no_certificate_json(command: &str, reason: &str) -> String {
    let doc = serde_json::json!({ "status": "no_certificate", "command": command, "reason": reason });
    let mut s = serde_json::to_string_pretty(&doc).expect("a JSON literal serializes");
    s.push('\n');
    s
}

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let (name, result) = match &cli.command {
        Command::Certify { spec, out } => (
            "certify",
            load_spec(spec).and_then(|(s, base)| {
                let doc = cmd_certify(&s, &base)?;
                if let Some(out) = out {
                    write_file(out, &doc)?;
                }
                Ok(Some(doc))
            }),
        ),
        Command::Laplace { spec, out } => (
            "laplace",
            load_spec(spec).and_then(|(s, base)| cmd_laplace(&s, &base, out).map(Some)),
        ),
        Command::Coreset { spec, k, out } => (
            "coreset",
            load_spec(spec).and_then(|(s, base)| cmd_coreset(&s, &base, *k, out).map(Some)),
        ),
        Command::Figures { which, out } => ("figures", cmd_figures(*which, out).map(|_| None)),
    };
    match result {
        Ok(doc) => {
            if let Some(doc) = doc {
                print!("{doc}");
            }
            0
        }
        Err(e @ CliError::NoCertificate(_)) => {
            let reason = match &e {
                CliError::NoCertificate(r) => r.clone(),
                CliError::Spec(r) => r.clone(),
            };
            print!("{}", no_certificate_json(name, &reason));
            eprintln!("{name}: {e}");
            e.exit_code()
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            e.exit_code()
        }
    }
}
