//! End-to-end orchestration: ingest, preprocess, fit the panel, score,
//! threshold, fuse, and assemble the anomaly report.
//!
//! Runs are deterministic: the pipeline seed fans out to per-detector seeds
//! by stable hashing of the detector name, panel members are confined to
//! their own task while fitting, and the assembled report depends only on
//! `(config, input)`.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{MaeSource, PipelineConfig};
use crate::detect::{
    self, DetectorSpec, FittedDetector, LabelSeries, LossHistory, ThresholdRule,
};
use crate::error::{DataError, DetectorError, FusionError};
use crate::fixture;
use crate::fusion::{dual_fusion, FusionResult, ModelVerdict};
use crate::normalize::{zscore_apply, zscore_fit, NormalizationStats};
use crate::series::{load_csv, resample, split, Aggregator, TimeSeries};

/// Pipeline failure: either a bad configuration or a named stage aborting.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: StageSource,
    },
}

#[derive(Debug, Error)]
pub enum StageSource {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// Process exit code: 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Stage { source, .. } => match source {
                StageSource::Data(_) => 2,
                StageSource::Detector(e) => match e {
                    DetectorError::TooFewRows { .. }
                    | DetectorError::OffGrid { .. }
                    | DetectorError::Data(_) => 2,
                    DetectorError::InvalidHyperparameter { .. }
                    | DetectorError::OutsideSweepRange { .. }
                    | DetectorError::EmptyGrid
                    | DetectorError::TooFewFolds { .. } => 1,
                    _ => 3,
                },
                StageSource::Fusion(_) => 2,
                StageSource::Io(_) | StageSource::Json(_) => 3,
            },
        }
    }
}

fn stage<T, E: Into<StageSource>>(
    name: &'static str,
    result: Result<T, E>,
) -> Result<T, PipelineError> {
    result.map_err(|e| PipelineError::Stage {
        stage: name,
        source: e.into(),
    })
}

/// Row counts of each pipeline partition, absent in fixture mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub resampled_rows: usize,
    pub channels: Vec<String>,
    pub resample_interval_ms: i64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub validation_rows: usize,
    pub scored_rows: usize,
}

/// One detector's contribution to the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub name: String,
    pub kind: String,
    pub mae: f64,
    /// Score threshold that produced the labels; absent in fixture mode.
    pub threshold: Option<f64>,
    pub warmup: usize,
    pub flagged: usize,
    pub loss_history: LossHistory,
}

/// The machine-readable outcome of a run. Serialization is deterministic:
/// identical (config, input, seed) produce byte-identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub config_fingerprint: String,
    pub seed: u64,
    pub data: Option<DataSummary>,
    pub detectors: Vec<DetectorReport>,
    pub fusion: FusionResult,
}

impl AnomalyReport {
    /// Internal consistency: the dual-fusion identity and set/count agreement.
    pub fn validate(&self) -> Result<(), String> {
        let f = &self.fusion;
        if f.n != f.n_a + f.n_b {
            return Err(format!("N = {} but N_a + N_b = {}", f.n, f.n_a + f.n_b));
        }
        if f.n_a != f.consensus.set.len() || f.n_a != f.consensus.count {
            return Err("consensus count disagrees with its set".to_string());
        }
        for (name, outcome) in [
            ("majority", &f.majority),
            ("weighted", &f.weighted),
            ("rank", &f.rank),
        ] {
            if outcome.count != outcome.set.len() {
                return Err(format!("{name} count disagrees with its set"));
            }
        }
        if f.final_set.len() != f.n {
            return Err(format!(
                "final set has {} instants but N = {}",
                f.final_set.len(),
                f.n
            ));
        }
        Ok(())
    }
}

/// Fingerprint of the effective configuration (sha-256 of its canonical JSON).
pub fn config_fingerprint(config: &PipelineConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn validate_config(config: &PipelineConfig) -> Result<(), PipelineError> {
    if config.panel.is_empty() {
        return Err(PipelineError::Config(
            "detector panel must not be empty".to_string(),
        ));
    }
    config
        .threshold
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for spec in &config.panel {
        if !seen.insert(spec.name.clone()) {
            return Err(PipelineError::Config(format!(
                "duplicate detector name '{}'",
                spec.name
            )));
        }
    }
    if config.fixture_votes.is_some() && config.fixture_mae.is_none() {
        return Err(PipelineError::Config(
            "fixture votes require a fixture mae file".to_string(),
        ));
    }
    if config.mae_source == MaeSource::FixtureFile && config.fixture_mae.is_none() {
        return Err(PipelineError::Config(
            "mae_source = fixture-file requires fixture_mae".to_string(),
        ));
    }
    if config.fixture_votes.is_none() && config.input.is_none() {
        return Err(PipelineError::Config(
            "an input CSV is required unless fixture votes are given".to_string(),
        ));
    }
    Ok(())
}

/// Runs the pipeline described by `config` and returns the report.
///
/// With `fixture_votes` set, detector fitting is bypassed entirely and the
/// externally supplied verdicts and MAE values feed the fusion directly.
pub fn run(config: &PipelineConfig) -> Result<AnomalyReport, PipelineError> {
    validate_config(config)?;
    if config.fixture_votes.is_some() {
        run_fixture(config)
    } else {
        run_full(config)
    }
}

fn run_fixture(config: &PipelineConfig) -> Result<AnomalyReport, PipelineError> {
    let votes_path = config.fixture_votes.as_ref().expect("checked by caller");
    let mae_path = config.fixture_mae.as_ref().expect("checked by caller");
    let table = stage("fixture", fixture::load_vote_table(votes_path))?;
    let mae_entries = stage("fixture", fixture::load_mae_table(mae_path))?;
    let mae = stage("fixture", fixture::align_mae(&table.model_names, &mae_entries))?;

    let verdicts: Vec<ModelVerdict> = table
        .model_names
        .iter()
        .zip(&table.labels)
        .zip(&mae)
        .map(|((name, labels), &mae)| ModelVerdict {
            name: name.clone(),
            labels: labels.clone(),
            mae,
        })
        .collect();
    let fusion = stage("fuse", dual_fusion(&verdicts))?;

    let detectors = verdicts
        .iter()
        .map(|v| DetectorReport {
            name: v.name.clone(),
            kind: "external".to_string(),
            mae: v.mae,
            threshold: None,
            warmup: 0,
            flagged: v.labels.labels.iter().map(|&l| l as usize).sum(),
            loss_history: LossHistory::empty(),
        })
        .collect();

    Ok(AnomalyReport {
        config_fingerprint: config_fingerprint(config),
        seed: config.seed,
        data: None,
        detectors,
        fusion,
    })
}

struct PanelMember {
    fitted: FittedDetector,
    labels: LabelSeries,
    flagged: usize,
    threshold: f64,
}

fn run_full(config: &PipelineConfig) -> Result<AnomalyReport, PipelineError> {
    let input = config.input.as_ref().expect("checked by caller");
    let raw = stage("load", load_csv(input, &config.timestamp_column))?;
    let uniform = stage(
        "resample",
        resample(&raw, config.resample_interval_ms, Aggregator::Mean),
    )?;
    let parts = stage("split", split(&uniform, &config.split))?;

    let stats = stage("normalize", zscore_fit(&parts.train))?;
    let train = stage("normalize", zscore_apply(&parts.train, &stats))?;
    let test = stage("normalize", zscore_apply(&parts.test, &stats))?;
    let validation = match &parts.validation {
        Some(v) => Some(stage("normalize", zscore_apply(v, &stats))?),
        None => None,
    };
    // The scored target is the held-out validation range when one was given,
    // otherwise the test split.
    let target = validation.as_ref().unwrap_or(&test);

    let specs: Vec<DetectorSpec> = config
        .panel
        .iter()
        .map(|spec| {
            let mut spec = spec.clone();
            spec.seed = detect::derive_seed(config.seed, &spec.name);
            spec
        })
        .collect();

    let fit_one = |spec: &DetectorSpec| -> Result<PanelMember, DetectorError> {
        let mut fitted = detect::fit(spec, &train)?;
        detect::evaluate_mae(&mut fitted, &test)?;
        let scored = detect::score(&fitted, target)?;
        let threshold = config.threshold.threshold(&fitted.train_error_stats);
        let labels = detect::predict_labels(&scored, &config.threshold, &fitted.train_error_stats);
        let flagged = labels.labels.iter().map(|&l| l as usize).sum();
        Ok(PanelMember {
            fitted,
            labels,
            flagged,
            threshold,
        })
    };

    let members: Vec<PanelMember> = if config.parallel_fit {
        stage(
            "fit",
            specs
                .par_iter()
                .map(fit_one)
                .collect::<Result<Vec<_>, _>>(),
        )?
    } else {
        stage(
            "fit",
            specs.iter().map(fit_one).collect::<Result<Vec<_>, _>>(),
        )?
    };

    // Detectors consume different warmups; fuse on the common suffix grid.
    let max_warmup = members.iter().map(|m| m.fitted.warmup).max().unwrap_or(0);
    let common_len = target.len().saturating_sub(max_warmup);
    let aligned: Vec<LabelSeries> = members
        .iter()
        .map(|m| {
            let len = m.labels.labels.len();
            LabelSeries {
                timestamps: m.labels.timestamps[len - common_len..].to_vec(),
                labels: m.labels.labels[len - common_len..].to_vec(),
            }
        })
        .collect();

    let mae: Vec<f64> = match config.mae_source {
        MaeSource::Test => members
            .iter()
            .map(|m| m.fitted.mae.expect("evaluate_mae ran"))
            .collect(),
        MaeSource::FixtureFile => {
            let mae_path = config.fixture_mae.as_ref().expect("checked by caller");
            let entries = stage("fixture", fixture::load_mae_table(mae_path))?;
            let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
            stage("fixture", fixture::align_mae(&names, &entries))?
        }
    };

    let verdicts: Vec<ModelVerdict> = specs
        .iter()
        .zip(&aligned)
        .zip(&mae)
        .map(|((spec, labels), &mae)| ModelVerdict {
            name: spec.name.clone(),
            labels: labels.clone(),
            mae,
        })
        .collect();
    let fusion = stage("fuse", dual_fusion(&verdicts))?;

    let detectors = members
        .iter()
        .zip(&mae)
        .map(|(m, &mae)| DetectorReport {
            name: m.fitted.spec.name.clone(),
            kind: m.fitted.spec.kind.slug().to_string(),
            mae,
            threshold: Some(m.threshold),
            warmup: m.fitted.warmup,
            flagged: m.flagged,
            loss_history: m.fitted.loss_history.clone(),
        })
        .collect();

    Ok(AnomalyReport {
        config_fingerprint: config_fingerprint(config),
        seed: config.seed,
        data: Some(DataSummary {
            resampled_rows: uniform.len(),
            channels: uniform.channels().to_vec(),
            resample_interval_ms: config.resample_interval_ms,
            train_rows: parts.train.len(),
            test_rows: parts.test.len(),
            validation_rows: parts.validation.as_ref().map_or(0, TimeSeries::len),
            scored_rows: common_len,
        }),
        detectors,
        fusion,
    })
}

/// Fits the panel and returns the fitted detectors together with the
/// normalization stats, for persistence workflows.
pub fn fit_panel(
    config: &PipelineConfig,
) -> Result<(Vec<FittedDetector>, NormalizationStats), PipelineError> {
    validate_config(config)?;
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| PipelineError::Config("an input CSV is required".to_string()))?;
    let raw = stage("load", load_csv(input, &config.timestamp_column))?;
    let uniform = stage(
        "resample",
        resample(&raw, config.resample_interval_ms, Aggregator::Mean),
    )?;
    let parts = stage("split", split(&uniform, &config.split))?;
    let stats = stage("normalize", zscore_fit(&parts.train))?;
    let train = stage("normalize", zscore_apply(&parts.train, &stats))?;
    let test = stage("normalize", zscore_apply(&parts.test, &stats))?;

    let fit_one = |spec: &DetectorSpec| -> Result<FittedDetector, DetectorError> {
        let mut spec = spec.clone();
        spec.seed = detect::derive_seed(config.seed, &spec.name);
        let mut fitted = detect::fit(&spec, &train)?;
        detect::evaluate_mae(&mut fitted, &test)?;
        Ok(fitted)
    };
    let fitted: Vec<FittedDetector> = if config.parallel_fit {
        stage(
            "fit",
            config
                .panel
                .par_iter()
                .map(fit_one)
                .collect::<Result<Vec<_>, _>>(),
        )?
    } else {
        stage(
            "fit",
            config
                .panel
                .iter()
                .map(fit_one)
                .collect::<Result<Vec<_>, _>>(),
        )?
    };
    Ok((fitted, stats))
}

/// Normalizes a raw series with saved stats and scores it with one detector.
pub fn score_series(
    detector: &FittedDetector,
    stats: &NormalizationStats,
    raw: &TimeSeries,
    resample_interval_ms: i64,
    threshold: &ThresholdRule,
) -> Result<(detect::ScoreSeries, LabelSeries), PipelineError> {
    let uniform = stage("resample", resample(raw, resample_interval_ms, Aggregator::Mean))?;
    let normalized = stage("normalize", zscore_apply(&uniform, stats))?;
    let scored = stage("score", detect::score(detector, &normalized))?;
    let labels = detect::predict_labels(&scored, threshold, &detector.train_error_stats);
    Ok((scored, labels))
}
