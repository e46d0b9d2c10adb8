use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalProbability {
    pub coordinate: usize,
    pub a: f64,
    pub b: f64,
    pub probability: f64,
}

/// Sample versions of the usual posterior summaries.
#[derive(Debug, Clone)]
pub struct EmpiricalSummary {
    pub mean: Vec<f64>,
    /// Unbiased (`1/(N-1)`) sample covariance.
    pub covariance: DMatrix<f64>,
    pub std: Vec<f64>,
    /// Mean absolute deviation about the sample mean.
    pub mad: Vec<f64>,
    pub interval_probs: Vec<IntervalProbability>,
}

pub fn summarize(samples: &[Vec<f64>], intervals: &[(usize, f64, f64)]) -> Result<EmpiricalSummary> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = samples[0].len();
    for s in samples {
        crate::model::check_dim(d, s.len())?;
    }
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);

    let mut covariance = DMatrix::<f64>::zeros(d, d);
    let mut mad = vec![0.0; d];
    for s in samples {
        for i in 0..d {
            let di = s[i] - mean[i];
            mad[i] += di.abs();
            for j in 0..=i {
                covariance[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        mad[i] /= nf;
        for j in 0..=i {
            let v = covariance[(i, j)] / (nf - 1.0);
            covariance[(i, j)] = v;
            covariance[(j, i)] = v;
        }
    }
    let std = (0..d).map(|i| covariance[(i, i)].sqrt()).collect();

    let interval_probs = intervals
        .iter()
        .map(|&(coordinate, a, b)| {
            if coordinate >= d {
                return Err(Error::InvalidParameter(format!(
                    "interval coordinate {coordinate} out of range for dimension {d}"
                )));
            }
            let hits = samples
                .iter()
                .filter(|s| s[coordinate] >= a && s[coordinate] <= b)
                .count();
            Ok(IntervalProbability {
                coordinate,
                a,
                b,
                probability: hits as f64 / nf,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EmpiricalSummary {
        mean,
        covariance,
        std,
        mad,
        interval_probs,
    })
}
