//! Residual against a per-phase seasonal profile learned on a uniform grid.

use ndarray::Array2;

use crate::error::DetectorError;
use crate::series::{TimeSeries, Timestamp};

use super::DetectorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalParams {
    pub period: usize,
    /// `period x m` mean profile.
    pub profile: Array2<f64>,
    pub origin_ms: i64,
    pub interval_ms: i64,
}

pub fn fit(spec: &DetectorSpec, train: &TimeSeries) -> Result<SeasonalParams, DetectorError> {
    let period = spec.hp.season_period;
    if train.len() < period {
        return Err(DetectorError::TooFewRows {
            required: period,
            got: train.len(),
        });
    }
    let interval_ms = train
        .uniform_interval_ms()
        .ok_or(DetectorError::OffGrid {
            offset: 0,
            interval: 0,
        })?;
    let origin_ms = train.timestamps()[0].millis();

    let m = train.width();
    let mut profile = Array2::zeros((period, m));
    let mut counts = vec![0u32; period];
    for i in 0..train.len() {
        let phase = i % period;
        counts[phase] += 1;
        for j in 0..m {
            profile[(phase, j)] += train.values()[(i, j)];
        }
    }
    for phase in 0..period {
        for j in 0..m {
            profile[(phase, j)] /= f64::from(counts[phase]);
        }
    }

    Ok(SeasonalParams {
        period,
        profile,
        origin_ms,
        interval_ms,
    })
}

pub fn score(
    params: &SeasonalParams,
    series: &TimeSeries,
) -> Result<(Vec<Timestamp>, Vec<f64>, usize), DetectorError> {
    let m = series.width();
    let mut scores = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        let delta = series.timestamps()[i].millis() - params.origin_ms;
        if delta.rem_euclid(params.interval_ms) != 0 {
            return Err(DetectorError::OffGrid {
                offset: delta,
                interval: params.interval_ms,
            });
        }
        let phase = delta
            .div_euclid(params.interval_ms)
            .rem_euclid(params.period as i64) as usize;
        let mut acc = 0.0;
        for j in 0..m {
            acc += (series.values()[(i, j)] - params.profile[(phase, j)]).abs();
        }
        scores.push(acc / m as f64);
    }
    Ok((series.timestamps().to_vec(), scores, 0))
}
