//! Leakage-safe z-score normalization.
//!
//! Statistics are fitted on the training split only and then applied to every
//! partition, so test and validation rows never influence the scaling.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::series::TimeSeries;

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub channels: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// True where the training channel was constant (std == 0).
    pub constant_channel: Vec<bool>,
}

/// Fits per-channel mean and population std (divide by N) on the training rows.
pub fn zscore_fit(train: &TimeSeries) -> Result<NormalizationStats, DataError> {
    if train.is_empty() {
        return Err(DataError::EmptySeries);
    }
    let n = train.len() as f64;
    let m = train.width();
    let mut mean = vec![0.0; m];
    let mut std = vec![0.0; m];
    for j in 0..m {
        let col = train.values().column(j);
        let mu = col.sum() / n;
        let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        mean[j] = mu;
        std[j] = var.sqrt();
    }
    let constant_channel = std.iter().map(|&s| s == 0.0).collect();
    Ok(NormalizationStats {
        channels: train.channels().to_vec(),
        mean,
        std,
        constant_channel,
    })
}

/// Maps each cell to `(x - mean) / std`; constant channels map to 0.
pub fn zscore_apply(
    series: &TimeSeries,
    stats: &NormalizationStats,
) -> Result<TimeSeries, DataError> {
    if series.channels() != stats.channels.as_slice() {
        return Err(DataError::ChannelMismatch {
            expected: stats.channels.clone(),
            got: series.channels().to_vec(),
        });
    }
    let mut values = Array2::zeros((series.len(), series.width()));
    for j in 0..series.width() {
        let (mu, sd) = (stats.mean[j], stats.std[j]);
        for i in 0..series.len() {
            values[(i, j)] = if stats.constant_channel[j] {
                0.0
            } else {
                (series.values()[(i, j)] - mu) / sd
            };
        }
    }
    TimeSeries::new(
        series.timestamps().to_vec(),
        series.channels().to_vec(),
        values,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Timestamp;
    use ndarray::array;

    fn column_series(vals: &[f64]) -> TimeSeries {
        let stamps = (0..vals.len() as i64)
            .map(|i| Timestamp::from_millis(i * 1000))
            .collect();
        let values = Array2::from_shape_vec((vals.len(), 1), vals.to_vec()).unwrap();
        TimeSeries::new(stamps, vec!["c0".into()], values).unwrap()
    }

    #[test]
    fn fit_uses_population_formula() {
        // mean 2, population variance ((1)^2 + 0 + 1^2)/3 = 2/3
        let stats = zscore_fit(&column_series(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(stats.mean[0], 2.0);
        assert!((stats.std[0] - 0.816496580927726).abs() < 1e-15);
        assert!(!stats.constant_channel[0]);
    }

    #[test]
    fn fit_flags_constant_channel() {
        let stats = zscore_fit(&column_series(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(stats.mean[0], 5.0);
        assert_eq!(stats.std[0], 0.0);
        assert!(stats.constant_channel[0]);
    }

    #[test]
    fn apply_standardizes_values() {
        let s = column_series(&[1.0, 2.0, 3.0]);
        let stats = zscore_fit(&s).unwrap();
        let z = zscore_apply(&s, &stats).unwrap();
        let expected = [-1.224744871391589, 0.0, 1.224744871391589];
        for (got, want) in z.values().column(0).iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn apply_maps_constant_channel_to_zero() {
        let s = column_series(&[5.0, 5.0, 5.0]);
        let stats = zscore_fit(&s).unwrap();
        let z = zscore_apply(&s, &stats).unwrap();
        assert!(z.values().column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn roundtrip_mean_zero_std_one() {
        let s = TimeSeries::new(
            (0..6)
                .map(|i| Timestamp::from_millis(i * 1000))
                .collect(),
            vec!["a".into(), "b".into()],
            array![
                [1.0, -3.0],
                [4.0, 0.5],
                [2.0, 9.0],
                [8.0, 2.5],
                [5.0, -1.0],
                [3.0, 4.0]
            ],
        )
        .unwrap();
        let stats = zscore_fit(&s).unwrap();
        let z = zscore_apply(&s, &stats).unwrap();
        let refit = zscore_fit(&z).unwrap();
        for j in 0..2 {
            assert!(refit.mean[j].abs() < 1e-9);
            assert!((refit.std[j] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn refitting_standardized_data_is_near_identity() {
        let s = column_series(&[-1.224744871391589, 0.0, 1.224744871391589]);
        let stats = zscore_fit(&s).unwrap();
        assert!(stats.mean[0].abs() < 1e-9);
        assert!((stats.std[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn apply_rejects_channel_mismatch() {
        let s = column_series(&[1.0, 2.0]);
        let mut stats = zscore_fit(&s).unwrap();
        stats.channels = vec!["other".into()];
        assert!(matches!(
            zscore_apply(&s, &stats),
            Err(DataError::ChannelMismatch { .. })
        ));
    }
}
