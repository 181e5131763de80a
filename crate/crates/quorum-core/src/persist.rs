//! Versioned on-disk format for fitted detectors.
//!
//! The file is self-describing JSON: format version, spec, learned parameters
//! as flat arrays with explicit shapes, training error statistics, loss
//! history, and the held-out MAE. Floating-point values survive the JSON
//! round-trip exactly, so a reloaded detector scores bitwise-identically.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::detect::{
    DetectorParams, DetectorSpec, FittedDetector, KnnParams, LinearAeParams, LossHistory,
    MovingAverageParams, PcaParams, SeasonalParams, TrainErrorStats,
};
use crate::error::DetectorError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct FlatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<&Array2<f64>> for FlatMatrix {
    fn from(a: &Array2<f64>) -> Self {
        FlatMatrix {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }
}

impl FlatMatrix {
    fn into_array(self, path: &Path) -> Result<Array2<f64>, DetectorError> {
        Array2::from_shape_vec((self.rows, self.cols), self.data).map_err(|e| {
            DetectorError::Persist {
                path: path.display().to_string(),
                reason: e.to_string(),
            }
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum ParamsFile {
    LinearAutoencoder {
        window: usize,
        encoder: FlatMatrix,
        encoder_bias: Vec<f64>,
        decoder: FlatMatrix,
        decoder_bias: Vec<f64>,
    },
    Pca {
        window: usize,
        mean: Vec<f64>,
        components: FlatMatrix,
    },
    Seasonal {
        period: usize,
        profile: FlatMatrix,
        origin_ms: i64,
        interval_ms: i64,
    },
    MovingAverage {
        window: usize,
    },
    Knn {
        window: usize,
        neighbors: usize,
        references: FlatMatrix,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectorFile {
    format_version: u32,
    spec: DetectorSpec,
    channels: Vec<String>,
    params: ParamsFile,
    train_error_stats: TrainErrorStats,
    loss_history: LossHistory,
    warmup: usize,
    mae: Option<f64>,
}

fn params_to_file(params: &DetectorParams) -> ParamsFile {
    match params {
        DetectorParams::LinearAutoencoder(p) => ParamsFile::LinearAutoencoder {
            window: p.window,
            encoder: (&p.encoder).into(),
            encoder_bias: p.encoder_bias.to_vec(),
            decoder: (&p.decoder).into(),
            decoder_bias: p.decoder_bias.to_vec(),
        },
        DetectorParams::Pca(p) => ParamsFile::Pca {
            window: p.window,
            mean: p.mean.to_vec(),
            components: (&p.components).into(),
        },
        DetectorParams::Seasonal(p) => ParamsFile::Seasonal {
            period: p.period,
            profile: (&p.profile).into(),
            origin_ms: p.origin_ms,
            interval_ms: p.interval_ms,
        },
        DetectorParams::MovingAverage(p) => ParamsFile::MovingAverage { window: p.window },
        DetectorParams::Knn(p) => ParamsFile::Knn {
            window: p.window,
            neighbors: p.neighbors,
            references: (&p.references).into(),
        },
    }
}

fn params_from_file(file: ParamsFile, path: &Path) -> Result<DetectorParams, DetectorError> {
    Ok(match file {
        ParamsFile::LinearAutoencoder {
            window,
            encoder,
            encoder_bias,
            decoder,
            decoder_bias,
        } => DetectorParams::LinearAutoencoder(LinearAeParams {
            window,
            encoder: encoder.into_array(path)?,
            encoder_bias: Array1::from_vec(encoder_bias),
            decoder: decoder.into_array(path)?,
            decoder_bias: Array1::from_vec(decoder_bias),
        }),
        ParamsFile::Pca {
            window,
            mean,
            components,
        } => DetectorParams::Pca(PcaParams {
            window,
            mean: Array1::from_vec(mean),
            components: components.into_array(path)?,
        }),
        ParamsFile::Seasonal {
            period,
            profile,
            origin_ms,
            interval_ms,
        } => DetectorParams::Seasonal(SeasonalParams {
            period,
            profile: profile.into_array(path)?,
            origin_ms,
            interval_ms,
        }),
        ParamsFile::MovingAverage { window } => {
            DetectorParams::MovingAverage(MovingAverageParams { window })
        }
        ParamsFile::Knn {
            window,
            neighbors,
            references,
        } => DetectorParams::Knn(KnnParams {
            window,
            neighbors,
            references: references.into_array(path)?,
        }),
    })
}

/// Saves a fitted detector to `path`.
pub fn save_detector(fitted: &FittedDetector, path: impl AsRef<Path>) -> Result<(), DetectorError> {
    let path = path.as_ref();
    let file = DetectorFile {
        format_version: FORMAT_VERSION,
        spec: fitted.spec.clone(),
        channels: fitted.channels.clone(),
        params: params_to_file(&fitted.params),
        train_error_stats: fitted.train_error_stats.clone(),
        loss_history: fitted.loss_history.clone(),
        warmup: fitted.warmup,
        mae: fitted.mae,
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| DetectorError::Persist {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, json).map_err(|e| DetectorError::Persist {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Loads a fitted detector saved by [`save_detector`].
pub fn load_detector(path: impl AsRef<Path>) -> Result<FittedDetector, DetectorError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| DetectorError::Persist {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let file: DetectorFile = serde_json::from_str(&raw).map_err(|e| DetectorError::Persist {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(DetectorError::VersionMismatch {
            found: file.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(FittedDetector {
        spec: file.spec,
        channels: file.channels,
        params: params_from_file(file.params, path)?,
        train_error_stats: file.train_error_stats,
        loss_history: file.loss_history,
        warmup: file.warmup,
        mae: file.mae,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{self, DetectorKind};
    use crate::synth::{sinusoid_panel, SynthConfig};
    use tempfile::tempdir;

    fn fitted() -> FittedDetector {
        let cfg = SynthConfig {
            rows: 256,
            ..SynthConfig::default()
        };
        let train = sinusoid_panel(&cfg);
        let spec = detect::DetectorSpec::new(DetectorKind::WindowLinearAutoencoder).with_seed(9);
        detect::fit(&spec, &train).unwrap()
    }

    #[test]
    fn roundtrip_scores_bitwise_identically() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("det.json");
        let cfg = SynthConfig {
            rows: 256,
            ..SynthConfig::default()
        };
        let series = sinusoid_panel(&cfg);

        let original = fitted();
        save_detector(&original, &path).unwrap();
        let reloaded = load_detector(&path).unwrap();
        assert_eq!(original, reloaded);

        let a = detect::score(&original, &series).unwrap();
        let b = detect::score(&reloaded, &series).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_file_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("det.json");
        std::fs::write(&path, "{ not json").unwrap();
        assert!(matches!(
            load_detector(&path),
            Err(DetectorError::Persist { .. })
        ));
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("det.json");
        save_detector(&fitted(), &path).unwrap();
        let raw = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        std::fs::write(&path, raw).unwrap();
        match load_detector(&path) {
            Err(DetectorError::VersionMismatch { found, expected }) => {
                assert_eq!((found, expected), (99, FORMAT_VERSION));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

