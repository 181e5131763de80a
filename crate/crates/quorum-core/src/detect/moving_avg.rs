//! Residual against the mean of the preceding window (causal trend model).

use crate::error::DetectorError;
use crate::series::{TimeSeries, Timestamp};

use super::DetectorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct MovingAverageParams {
    pub window: usize,
}

pub fn fit(spec: &DetectorSpec, train: &TimeSeries) -> Result<MovingAverageParams, DetectorError> {
    let w = spec.hp.window;
    if train.len() < w + 1 {
        return Err(DetectorError::TooFewRows {
            required: w + 1,
            got: train.len(),
        });
    }
    Ok(MovingAverageParams { window: w })
}

pub fn score(
    params: &MovingAverageParams,
    series: &TimeSeries,
) -> Result<(Vec<Timestamp>, Vec<f64>, usize), DetectorError> {
    let w = params.window;
    let n = series.len();
    let m = series.width();
    if n < w + 1 {
        return Err(DetectorError::TooFewRows {
            required: w + 1,
            got: n,
        });
    }

    // Running per-channel sums over the trailing window.
    let mut sums = vec![0.0f64; m];
    for i in 0..w {
        for j in 0..m {
            sums[j] += series.values()[(i, j)];
        }
    }

    let mut scores = Vec::with_capacity(n - w);
    for i in w..n {
        let mut acc = 0.0;
        for j in 0..m {
            let pred = sums[j] / w as f64;
            acc += (series.values()[(i, j)] - pred).abs();
        }
        scores.push(acc / m as f64);
        for j in 0..m {
            sums[j] += series.values()[(i, j)] - series.values()[(i - w, j)];
        }
    }
    Ok((series.timestamps()[w..].to_vec(), scores, w))
}
