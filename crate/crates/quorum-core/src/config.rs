//! Pipeline configuration: a plain-text `key = value` file plus programmatic
//! overrides (command-line flags win over file values).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::{DetectorKind, DetectorSpec, ThresholdRule};
use crate::series::{SplitSpec, Timestamp};

/// Where the fusion weights' MAE values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaeSource {
    /// Evaluate each detector on the held-out test split.
    Test,
    /// Read per-model MAE values from `fixture_mae`.
    FixtureFile,
}

/// Everything one end-to-end run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub timestamp_column: String,
    pub resample_interval_ms: i64,
    pub split: SplitSpec,
    pub panel: Vec<DetectorSpec>,
    pub threshold: ThresholdRule,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub mae_source: MaeSource,
    /// Vote table replacing detector verdicts entirely (fixture mode).
    pub fixture_votes: Option<PathBuf>,
    pub fixture_mae: Option<PathBuf>,
    /// Fit the panel members concurrently. Results are identical either way.
    pub parallel_fit: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            timestamp_column: "timestamp".to_string(),
            resample_interval_ms: 1000,
            split: SplitSpec::default(),
            panel: DetectorKind::ALL.map(DetectorSpec::new).to_vec(),
            threshold: ThresholdRule::default(),
            seed: 42,
            out_dir: PathBuf::from("out"),
            mae_source: MaeSource::Test,
            fixture_votes: None,
            fixture_mae: None,
            parallel_fit: true,
        }
    }
}

/// Parses durations like `250ms`, `30s`, `5m`, `1h`, `1d` into milliseconds.
pub fn parse_duration_ms(raw: &str) -> Result<i64, String> {
    let raw = raw.trim();
    let split = raw
        .find(|c: char| !c.is_ascii_digit())
        .ok_or_else(|| format!("duration '{raw}' is missing a unit (ms, s, m, h, d)"))?;
    let (digits, unit) = raw.split_at(split);
    let value: i64 = digits
        .parse()
        .map_err(|_| format!("duration '{raw}' has no leading number"))?;
    let factor = match unit.trim() {
        "ms" => 1,
        "s" => 1000,
        "m" => 60_000,
        "h" => 3_600_000,
        "d" => 86_400_000,
        other => return Err(format!("unknown duration unit '{other}'")),
    };
    Ok(value * factor)
}

impl PipelineConfig {
    /// Parses a `key = value` file. Lines starting with `#` and blank lines
    /// are ignored. A key of the form `<param>.<detector-kind>` sets one
    /// panel member's hyperparameter; a bare `<param>` sets all of them.
    pub fn from_kv_file(path: impl AsRef<Path>) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path.as_ref())
            .map_err(|e| format!("cannot read config {}: {e}", path.as_ref().display()))?;
        let mut config = PipelineConfig::default();
        for (line_no, line) in raw.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'key = value'", line_no + 1))?;
            config
                .apply_kv(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", line_no + 1))?;
        }
        Ok(config)
    }

    /// Applies one key/value pair, as found in the config file.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("invalid value '{value}' for {key}"))
        }

        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "timestamp_column" => self.timestamp_column = value.to_string(),
            "resample_interval" => self.resample_interval_ms = parse_duration_ms(value)?,
            "train_fraction" => self.split.train_fraction = parse(key, value)?,
            "validation_start" => {
                let ts: Timestamp = parse(key, value)?;
                let end = self.split.validation_range.map(|(_, e)| e).unwrap_or(ts);
                self.split.validation_range = Some((ts, end.max(ts)));
            }
            "validation_end" => {
                let ts: Timestamp = parse(key, value)?;
                let start = self.split.validation_range.map(|(s, _)| s).unwrap_or(ts);
                self.split.validation_range = Some((start.min(ts), ts));
            }
            "panel" => {
                let mut panel = Vec::new();
                for slug in value.split(',') {
                    let slug = slug.trim();
                    let kind = DetectorKind::from_slug(slug)
                        .ok_or_else(|| format!("unknown detector kind '{slug}'"))?;
                    panel.push(DetectorSpec::new(kind));
                }
                if panel.is_empty() {
                    return Err("panel must name at least one detector".to_string());
                }
                self.panel = panel;
            }
            "threshold" => {
                self.threshold = match value {
                    "mean-plus-k-sigma" => {
                        let k = match self.threshold {
                            ThresholdRule::MeanPlusKSigma { k } => k,
                            _ => 3.0,
                        };
                        ThresholdRule::MeanPlusKSigma { k }
                    }
                    "quantile" => {
                        let q = match self.threshold {
                            ThresholdRule::Quantile { q } => q,
                            _ => 0.999,
                        };
                        ThresholdRule::Quantile { q }
                    }
                    other => return Err(format!("unknown threshold rule '{other}'")),
                };
            }
            "threshold_k" => {
                self.threshold = ThresholdRule::MeanPlusKSigma {
                    k: parse(key, value)?,
                };
            }
            "threshold_quantile" => {
                self.threshold = ThresholdRule::Quantile {
                    q: parse(key, value)?,
                };
            }
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "mae_source" => {
                self.mae_source = match value {
                    "test" => MaeSource::Test,
                    "fixture-file" => MaeSource::FixtureFile,
                    other => return Err(format!("unknown mae source '{other}'")),
                };
            }
            "fixture_votes" => self.fixture_votes = Some(PathBuf::from(value)),
            "fixture_mae" => self.fixture_mae = Some(PathBuf::from(value)),
            "parallel_fit" => self.parallel_fit = parse(key, value)?,
            _ => {
                let (param, kind) = match key.split_once('.') {
                    Some((param, slug)) => {
                        let kind = DetectorKind::from_slug(slug)
                            .ok_or_else(|| format!("unknown detector kind '{slug}'"))?;
                        (param, Some(kind))
                    }
                    None => (key, None),
                };
                self.apply_hyperparameter(param, kind, value)?;
            }
        }
        Ok(())
    }

    fn apply_hyperparameter(
        &mut self,
        param: &str,
        kind: Option<DetectorKind>,
        value: &str,
    ) -> Result<(), String> {
        let mut as_usize: Option<usize> = None;
        let mut as_f64: Option<f64> = None;
        match param {
            "window" | "latent" | "neighbors" | "batch_size" | "max_epochs" | "patience"
            | "season_period" | "max_reference_windows" => {
                as_usize = Some(
                    value
                        .parse()
                        .map_err(|_| format!("invalid value '{value}' for {param}"))?,
                );
            }
            "learning_rate" => {
                as_f64 = Some(
                    value
                        .parse()
                        .map_err(|_| format!("invalid value '{value}' for {param}"))?,
                );
            }
            other => return Err(format!("unknown config key '{other}'")),
        }
        for spec in &mut self.panel {
            if kind.is_some_and(|k| k != spec.kind) {
                continue;
            }
            let hp = &mut spec.hp;
            match param {
                "window" => hp.window = as_usize.unwrap(),
                "latent" => hp.latent = as_usize.unwrap(),
                "neighbors" => hp.neighbors = as_usize.unwrap(),
                "batch_size" => hp.batch_size = as_usize.unwrap(),
                "max_epochs" => hp.max_epochs = as_usize.unwrap(),
                "patience" => hp.patience = as_usize.unwrap(),
                "season_period" => hp.season_period = as_usize.unwrap(),
                "max_reference_windows" => hp.max_reference_windows = as_usize.unwrap(),
                "learning_rate" => hp.learning_rate = as_f64.unwrap(),
                _ => unreachable!(),
            }
        }
        Ok(())
    }
}
