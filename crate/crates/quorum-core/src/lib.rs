//! Ensemble time-series anomaly detection.
//!
//! A panel of heterogeneous reconstruction-style detectors is trained on
//! multichannel sensor data; each detector turns its reconstruction error
//! into binary verdicts, and the verdicts are combined in two stages:
//! consensus over all models, then majority / weighted / rank voting over
//! the disputed candidates. The fused count `N = N_a + N_b` and the matching
//! anomaly set come out with per-method provenance.
//!
//! Modules:
//! - [`series`], [`normalize`]: ingestion, resampling, chronological splits,
//!   leakage-safe z-scoring.
//! - [`detect`]: the detector contract and the five built-in detectors.
//! - [`fusion`]: the voting rules and dual fusion.
//! - [`pipeline`], [`report`], [`config`]: end-to-end orchestration.
//! - [`fixture`], [`persist`]: external vote/MAE tables and detector files.
//! - [`synth`]: seeded generators for tests and benchmarks.

pub mod config;
pub mod detect;
pub mod error;
pub mod fixture;
pub mod fusion;
pub mod normalize;
pub mod persist;
pub mod pipeline;
pub mod report;
pub mod series;
pub mod synth;

pub use config::{MaeSource, PipelineConfig};
pub use detect::{
    DetectorKind, DetectorSpec, FittedDetector, Hyperparameters, LabelSeries, ScoreSeries,
    ThresholdRule,
};
pub use error::{DataError, DetectorError, FusionError};
pub use fusion::{FusionResult, ModelVerdict, ModelWeights, VoteMatrix, VotingMethod};
pub use normalize::NormalizationStats;
pub use pipeline::{AnomalyReport, PipelineError};
pub use series::{SplitSpec, TimeSeries, Timestamp};
