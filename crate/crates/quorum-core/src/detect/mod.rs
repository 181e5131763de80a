//! The base-detector contract and the five reconstruction-style detectors.
//!
//! Every detector fits on a normalized training series, scores any aligned
//! series with a per-instant reconstruction error (mean absolute error across
//! channels, attached to the last timestamp of the window that produced it),
//! and binarizes scores against a threshold derived from its own training
//! error distribution. The panel is deliberately heterogeneous so that the
//! detectors fail in different ways; the fusion layer feeds on that diversity.

mod knn;
mod linear_ae;
mod moving_avg;
mod pca;
mod seasonal;
mod train;
mod window;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DetectorError;
use crate::series::{TimeSeries, Timestamp};

pub use knn::KnnParams;
pub use linear_ae::LinearAeParams;
pub use moving_avg::MovingAverageParams;
pub use pca::PcaParams;
pub use seasonal::SeasonalParams;
pub use train::LossHistory;

/// The five detector families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// Windowed linear encode/decode trained by mini-batch gradient descent.
    WindowLinearAutoencoder,
    /// Closed-form low-rank reconstruction of (windowed) rows.
    PcaReconstructor,
    /// Residual against a per-phase seasonal profile.
    SeasonalResidual,
    /// Residual against the mean of the preceding window.
    MovingAverageResidual,
    /// Mean distance to the nearest training windows.
    KnnDistance,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 5] = [
        DetectorKind::WindowLinearAutoencoder,
        DetectorKind::PcaReconstructor,
        DetectorKind::SeasonalResidual,
        DetectorKind::MovingAverageResidual,
        DetectorKind::KnnDistance,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            DetectorKind::WindowLinearAutoencoder => "window-linear-autoencoder",
            DetectorKind::PcaReconstructor => "pca-reconstructor",
            DetectorKind::SeasonalResidual => "seasonal-residual",
            DetectorKind::MovingAverageResidual => "moving-average-residual",
            DetectorKind::KnnDistance => "knn-distance",
        }
    }

    pub fn from_slug(s: &str) -> Option<DetectorKind> {
        DetectorKind::ALL.into_iter().find(|k| k.slug() == s)
    }
}

/// Named hyperparameters; each kind reads the fields it understands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    /// Window length in samples.
    pub window: usize,
    /// Latent / bottleneck size (components for the low-rank kinds).
    pub latent: usize,
    /// Neighbor count for the distance detector.
    pub neighbors: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stop patience in epochs.
    pub patience: usize,
    /// Seasonal cycle length in samples.
    pub season_period: usize,
    /// Cap on stored reference windows for the distance detector.
    pub max_reference_windows: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            window: 16,
            latent: 4,
            neighbors: 5,
            learning_rate: 0.01,
            batch_size: 32,
            max_epochs: 100,
            patience: 5,
            season_period: 24,
            max_reference_windows: 2048,
        }
    }
}

/// One base detector: kind, hyperparameters, and its private seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    /// Stable name used for vote-matrix columns and report files.
    pub name: String,
    pub hp: Hyperparameters,
    pub seed: u64,
}

impl DetectorSpec {
    /// Spec with the kind's default hyperparameters.
    pub fn new(kind: DetectorKind) -> Self {
        let mut hp = Hyperparameters::default();
        match kind {
            DetectorKind::WindowLinearAutoencoder => {}
            DetectorKind::PcaReconstructor => {
                hp.window = 1;
                hp.latent = 2;
            }
            DetectorKind::SeasonalResidual => {}
            DetectorKind::MovingAverageResidual => {
                hp.window = 8;
            }
            DetectorKind::KnnDistance => {
                hp.window = 8;
            }
        }
        DetectorSpec {
            kind,
            name: kind.slug().to_string(),
            hp,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Fans a single pipeline seed out to one seed per detector, stably.
pub fn derive_seed(pipeline_seed: u64, detector_name: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(pipeline_seed.to_le_bytes());
    hasher.update(detector_name.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Mean, population std, and the sorted empirical distribution of the
/// per-instance training reconstruction errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainErrorStats {
    pub mean: f64,
    pub std: f64,
    sorted_scores: Vec<f64>,
}

impl TrainErrorStats {
    pub fn from_scores(scores: &[f64]) -> Self {
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut sorted_scores = scores.to_vec();
        sorted_scores.sort_by(f64::total_cmp);
        TrainErrorStats {
            mean,
            std,
            sorted_scores,
        }
    }

    /// Empirical quantile of the training errors, `q` in (0, 1).
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.sorted_scores.len();
        let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.sorted_scores[idx]
    }
}

/// Rule turning reconstruction scores into binary labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThresholdRule {
    MeanPlusKSigma { k: f64 },
    Quantile { q: f64 },
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::MeanPlusKSigma { k: 3.0 }
    }
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<(), DetectorError> {
        match *self {
            ThresholdRule::MeanPlusKSigma { k } if k > 0.0 => Ok(()),
            ThresholdRule::MeanPlusKSigma { k } => Err(DetectorError::InvalidHyperparameter {
                name: "threshold_k",
                reason: format!("k must be positive, got {k}"),
            }),
            ThresholdRule::Quantile { q } if q > 0.0 && q < 1.0 => Ok(()),
            ThresholdRule::Quantile { q } => Err(DetectorError::InvalidHyperparameter {
                name: "threshold_quantile",
                reason: format!("quantile must lie in (0, 1), got {q}"),
            }),
        }
    }

    pub fn threshold(&self, stats: &TrainErrorStats) -> f64 {
        match *self {
            ThresholdRule::MeanPlusKSigma { k } => stats.mean + k * stats.std,
            ThresholdRule::Quantile { q } => stats.quantile(q),
        }
    }
}

/// Learned state, one variant per kind.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectorParams {
    LinearAutoencoder(linear_ae::LinearAeParams),
    Pca(pca::PcaParams),
    Seasonal(seasonal::SeasonalParams),
    MovingAverage(moving_avg::MovingAverageParams),
    Knn(knn::KnnParams),
}

/// A trained detector, immutable after fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedDetector {
    pub spec: DetectorSpec,
    pub channels: Vec<String>,
    pub params: DetectorParams,
    pub train_error_stats: TrainErrorStats,
    /// Per-epoch training/validation loss; empty for non-iterative kinds.
    pub loss_history: LossHistory,
    /// Leading rows consumed by windowing before the first score.
    pub warmup: usize,
    /// Held-out MAE, filled by [`evaluate_mae`].
    pub mae: Option<f64>,
}

/// Per-instant reconstruction error aligned to the scored series.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub timestamps: Vec<Timestamp>,
    pub scores: Vec<f64>,
    /// Rows of the input that produced no score.
    pub warmup: usize,
}

/// Binary verdicts, 1 = anomaly.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSeries {
    pub timestamps: Vec<Timestamp>,
    pub labels: Vec<u8>,
}

fn validate_spec(spec: &DetectorSpec, m: usize) -> Result<(), DetectorError> {
    let hp = &spec.hp;
    if hp.window == 0 {
        return Err(DetectorError::InvalidHyperparameter {
            name: "window",
            reason: "window length must be at least 1".into(),
        });
    }
    if hp.patience == 0 {
        return Err(DetectorError::InvalidHyperparameter {
            name: "patience",
            reason: "patience must be at least 1".into(),
        });
    }
    match spec.kind {
        DetectorKind::WindowLinearAutoencoder | DetectorKind::PcaReconstructor => {
            if hp.latent == 0 || hp.latent >= hp.window * m {
                return Err(DetectorError::InvalidHyperparameter {
                    name: "latent",
                    reason: format!(
                        "latent size must satisfy 1 <= latent < window * channels = {}",
                        hp.window * m
                    ),
                });
            }
        }
        DetectorKind::SeasonalResidual => {
            if hp.season_period == 0 {
                return Err(DetectorError::InvalidHyperparameter {
                    name: "season_period",
                    reason: "season period must be at least 1".into(),
                });
            }
        }
        DetectorKind::KnnDistance => {
            if hp.neighbors == 0 {
                return Err(DetectorError::InvalidHyperparameter {
                    name: "neighbors",
                    reason: "neighbor count must be at least 1".into(),
                });
            }
        }
        DetectorKind::MovingAverageResidual => {}
    }
    Ok(())
}

/// Fits one detector. Deterministic given `(spec.seed, train)`.
pub fn fit(spec: &DetectorSpec, train: &TimeSeries) -> Result<FittedDetector, DetectorError> {
    validate_spec(spec, train.width())?;
    let (params, loss_history) = match spec.kind {
        DetectorKind::WindowLinearAutoencoder => {
            let (p, h) = linear_ae::fit(spec, train)?;
            (DetectorParams::LinearAutoencoder(p), h)
        }
        DetectorKind::PcaReconstructor => (
            DetectorParams::Pca(pca::fit(spec, train)?),
            LossHistory::empty(),
        ),
        DetectorKind::SeasonalResidual => (
            DetectorParams::Seasonal(seasonal::fit(spec, train)?),
            LossHistory::empty(),
        ),
        DetectorKind::MovingAverageResidual => (
            DetectorParams::MovingAverage(moving_avg::fit(spec, train)?),
            LossHistory::empty(),
        ),
        DetectorKind::KnnDistance => (
            DetectorParams::Knn(knn::fit(spec, train)?),
            LossHistory::empty(),
        ),
    };

    let (timestamps, scores, warmup) = score_params(&params, train)?;
    debug_assert_eq!(timestamps.len(), scores.len());
    if scores.is_empty() {
        return Err(DetectorError::TooFewRows {
            required: warmup + 1,
            got: train.len(),
        });
    }
    Ok(FittedDetector {
        spec: spec.clone(),
        channels: train.channels().to_vec(),
        params,
        train_error_stats: TrainErrorStats::from_scores(&scores),
        loss_history,
        warmup,
        mae: None,
    })
}

fn score_params(
    params: &DetectorParams,
    series: &TimeSeries,
) -> Result<(Vec<Timestamp>, Vec<f64>, usize), DetectorError> {
    match params {
        DetectorParams::LinearAutoencoder(p) => linear_ae::score(p, series),
        DetectorParams::Pca(p) => pca::score(p, series),
        DetectorParams::Seasonal(p) => seasonal::score(p, series),
        DetectorParams::MovingAverage(p) => moving_avg::score(p, series),
        DetectorParams::Knn(p) => knn::score(p, series),
    }
}

/// Scores a series with a fitted detector. Pure: identical inputs produce
/// identical output.
pub fn score(fitted: &FittedDetector, series: &TimeSeries) -> Result<ScoreSeries, DetectorError> {
    if series.channels() != fitted.channels.as_slice() {
        return Err(DetectorError::Data(
            crate::error::DataError::ChannelMismatch {
                expected: fitted.channels.clone(),
                got: series.channels().to_vec(),
            },
        ));
    }
    let (timestamps, scores, warmup) = score_params(&fitted.params, series)?;
    Ok(ScoreSeries {
        timestamps,
        scores,
        warmup,
    })
}

/// Binarizes scores against the rule; the comparison is strict.
pub fn predict_labels(
    scores: &ScoreSeries,
    rule: &ThresholdRule,
    train_stats: &TrainErrorStats,
) -> LabelSeries {
    let thr = rule.threshold(train_stats);
    LabelSeries {
        timestamps: scores.timestamps.clone(),
        labels: scores
            .scores
            .iter()
            .map(|&s| u8::from(s > thr))
            .collect(),
    }
}

/// Mean reconstruction error over the held-out series; also stored into the
/// detector.
pub fn evaluate_mae(
    fitted: &mut FittedDetector,
    test: &TimeSeries,
) -> Result<f64, DetectorError> {
    let scored = score(fitted, test)?;
    if scored.scores.is_empty() {
        return Err(DetectorError::TooFewRows {
            required: fitted.warmup + 1,
            got: test.len(),
        });
    }
    let mae = scored.scores.iter().sum::<f64>() / scored.scores.len() as f64;
    fitted.mae = Some(mae);
    Ok(mae)
}

/// Inclusive bounds every swept hyperparameter must respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRanges {
    pub window: (usize, usize),
    pub latent: (usize, usize),
    pub neighbors: (usize, usize),
    pub batch_size: (usize, usize),
    pub learning_rate: (f64, f64),
    pub max_epochs: (usize, usize),
    pub patience: (usize, usize),
    pub season_period: (usize, usize),
}

impl Default for SweepRanges {
    fn default() -> Self {
        SweepRanges {
            window: (1, 1024),
            latent: (1, 1024),
            neighbors: (1, 256),
            batch_size: (16, 64),
            learning_rate: (1e-4, 1e-2),
            max_epochs: (50, 500),
            patience: (1, 10),
            season_period: (1, 100_000),
        }
    }
}

impl SweepRanges {
    pub fn validate(&self, spec: &DetectorSpec) -> Result<(), DetectorError> {
        fn check_usize(
            name: &'static str,
            value: usize,
            (lo, hi): (usize, usize),
        ) -> Result<(), DetectorError> {
            if value < lo || value > hi {
                return Err(DetectorError::OutsideSweepRange {
                    name,
                    value: value as f64,
                    low: lo as f64,
                    high: hi as f64,
                });
            }
            Ok(())
        }
        let hp = &spec.hp;
        check_usize("window", hp.window, self.window)?;
        check_usize("latent", hp.latent, self.latent)?;
        check_usize("neighbors", hp.neighbors, self.neighbors)?;
        check_usize("batch_size", hp.batch_size, self.batch_size)?;
        check_usize("max_epochs", hp.max_epochs, self.max_epochs)?;
        check_usize("patience", hp.patience, self.patience)?;
        check_usize("season_period", hp.season_period, self.season_period)?;
        let (lo, hi) = self.learning_rate;
        if hp.learning_rate < lo || hp.learning_rate > hi {
            return Err(DetectorError::OutsideSweepRange {
                name: "learning_rate",
                value: hp.learning_rate,
                low: lo,
                high: hi,
            });
        }
        Ok(())
    }
}

/// Picks the grid entry minimizing mean validation MAE over chronological
/// walk-forward folds; ties go to the earlier grid entry.
pub fn hyperparameter_sweep(
    grid: &[DetectorSpec],
    train: &TimeSeries,
    folds: usize,
) -> Result<DetectorSpec, DetectorError> {
    hyperparameter_sweep_with_ranges(grid, train, folds, &SweepRanges::default())
}

/// [`hyperparameter_sweep`] against explicit sweep ranges.
pub fn hyperparameter_sweep_with_ranges(
    grid: &[DetectorSpec],
    train: &TimeSeries,
    folds: usize,
    ranges: &SweepRanges,
) -> Result<DetectorSpec, DetectorError> {
    if grid.is_empty() {
        return Err(DetectorError::EmptyGrid);
    }
    if folds < 2 {
        return Err(DetectorError::TooFewFolds { folds });
    }
    for spec in grid {
        ranges.validate(spec)?;
    }

    // folds + 1 contiguous chunks; fold f fits on chunks[..f] and scores
    // chunk f, walking forward in time.
    let n = train.len();
    let bound = |i: usize| i * n / (folds + 1);

    let mut best: Option<(usize, f64)> = None;
    for (gi, spec) in grid.iter().enumerate() {
        let mut fold_maes = Vec::with_capacity(folds);
        for f in 1..=folds {
            let fit_hi = bound(f);
            let val_hi = bound(f + 1);
            if fit_hi == 0 || val_hi <= fit_hi {
                return Err(DetectorError::TooFewRows {
                    required: folds + 1,
                    got: n,
                });
            }
            let fit_part = train.slice_rows(0, fit_hi)?;
            let val_part = train.slice_rows(fit_hi, val_hi)?;
            let mut fitted = fit(spec, &fit_part)?;
            fold_maes.push(evaluate_mae(&mut fitted, &val_part)?);
        }
        let mean_mae = fold_maes.iter().sum::<f64>() / fold_maes.len() as f64;
        let better = match best {
            None => true,
            Some((_, best_mae)) => mean_mae < best_mae,
        };
        if better {
            best = Some((gi, mean_mae));
        }
    }
    let (gi, _) = best.expect("grid is non-empty");
    Ok(grid[gi].clone())
}

#[cfg(test)]
mod tests;
