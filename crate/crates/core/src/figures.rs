//! Curves comparing certified bounds with exact errors, written as CSV.

use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

use crate::certificates::{
    gaussian_nu_equal_bound, gaussian_reference_bound, gaussian_w2_closed_form, std_constant, t_reference_bound,
    wasserstein_from_fisher_reference, ConvexityCertificate,
};
use crate::error::{Error, Result};
use crate::fisher::{comparability_1d, fisher_distance_quadrature_1d, FisherEstimate};
use crate::model::{GaussianMeasure, StudentTMeasure};

/// `Δμ = μ̂ - μ` for the Gaussian comparison.
pub const FIG1_DELTA_MU: f64 = -1.0;
pub const FIG1_EPS: f64 = 1.0;
pub const FIG1_RHOS: [f64; 3] = [2.0, 4.0, 8.0];
pub const FIG1_POINTS: usize = 200;
/// Degrees of freedom of the heavy-tailed reference measure.
pub const FIG2_NU_DOF: f64 = 2.5;
pub const FIG2_POINTS: usize = 100;

/// `W₂` values (not squares) for `η = N(0,1)`, `η̂ = N(Δμ, r²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig1Row {
    pub r: f64,
    pub true_w2: f64,
    pub bound_nu_eq_eta: f64,
    pub bound_rho2: f64,
    pub bound_rho4: f64,
    pub bound_rho8: f64,
}

/// Standard-deviation error of `N(0,1)` as an approximation of `T_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig2Row {
    pub h: f64,
    pub true_std_err: f64,
    pub bound_nu_eta: f64,
    pub bound_nu_t25: f64,
}

/// 200 geometrically spaced ratios on `[0.25, 4]`, half on each side of 1,
/// so that `r = 1` is a grid point.
pub fn fig1_grid() -> Vec<f64> {
    let half = FIG1_POINTS / 2;
    let lower = (0..half).map(|i| 0.25 * 4f64.powf(i as f64 / (half - 1) as f64));
    let upper = (1..=half).map(|j| 4f64.powf(j as f64 / half as f64));
    lower.chain(upper).collect()
}

pub fn fig1_row(r: f64) -> Result<Fig1Row> {
    let eta = GaussianMeasure::univariate(0.0, 1.0)?;
    let hat = GaussianMeasure::univariate(FIG1_DELTA_MU, r * r)?;
    let rho = |k: usize| gaussian_reference_bound(1.0, r, FIG1_DELTA_MU, FIG1_EPS, FIG1_RHOS[k]).map(f64::sqrt);
    Ok(Fig1Row {
        r,
        true_w2: gaussian_w2_closed_form(&eta, &hat)?,
        bound_nu_eq_eta: gaussian_nu_equal_bound(1.0, r, FIG1_DELTA_MU)?.sqrt(),
        bound_rho2: rho(0)?,
        bound_rho4: rho(1)?,
        bound_rho8: rho(2)?,
    })
}

pub fn fig1_rows() -> Result<Vec<Fig1Row>> {
    fig1_grid().into_iter().map(fig1_row).collect()
}

/// 100 geometrically spaced degrees of freedom on `[2.6, 50]`.
pub fn fig2_grid() -> Vec<f64> {
    let ratio = 50.0f64 / 2.6;
    (0..FIG2_POINTS)
        .map(|i| 2.6 * ratio.powf(i as f64 / (FIG2_POINTS - 1) as f64))
        .collect()
}

pub fn fig2_row(h: f64) -> Result<Fig2Row> {
    let target = StudentTMeasure::standard(h)?;
    let approx = GaussianMeasure::univariate(0.0, 1.0)?;
    let nu = StudentTMeasure::standard(FIG2_NU_DOF)?;
    let alpha = ConvexityCertificate::global(1.0)?;
    let f = fisher_distance_quadrature_1d(&target, &approx, &nu, 2)?;
    let b = comparability_1d(2, &target, &nu)?;
    let fe = FisherEstimate::exact(2, f, nu.descriptor(), false);
    let w2 = wasserstein_from_fisher_reference(&alpha, &b, &fe, 2, 0.0)?.bound;
    Ok(Fig2Row {
        h,
        true_std_err: ((h / (h - 2.0)).sqrt() - 1.0).abs(),
        bound_nu_eta: std_constant() * t_reference_bound(h)?.sqrt(),
        bound_nu_t25: std_constant() * w2,
    })
}

pub fn fig2_rows() -> Result<Vec<Fig2Row>> {
    fig2_grid().into_par_iter().map(fig2_row).collect()
}

pub fn write_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        source: e,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}
