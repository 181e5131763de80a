//! Report emission: a human-readable summary, the machine-readable JSON
//! report, per-method anomaly CSVs, and per-detector loss-history CSVs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::fusion::MethodOutcome;
use crate::pipeline::{AnomalyReport, PipelineError, StageSource};

/// File names produced by [`emit_report`].
pub const REPORT_JSON: &str = "report.json";
pub const SUMMARY_TXT: &str = "summary.txt";

fn stage_io<T>(result: std::io::Result<T>) -> Result<T, PipelineError> {
    result.map_err(|e| PipelineError::Stage {
        stage: "report",
        source: StageSource::Io(e),
    })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect()
}

fn method_csv(outcome: &MethodOutcome) -> String {
    let mut out = String::from("timestamp\n");
    for ts in &outcome.set {
        out.push_str(&ts.to_string());
        out.push('\n');
    }
    out
}

/// Writes every report artifact into `dir`, creating it if needed. On any
/// failure the files already written by this call are removed, so a report
/// directory is never left half-populated.
pub fn emit_report(report: &AnomalyReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = dir.as_ref();
    stage_io(std::fs::create_dir_all(dir))?;

    // Render everything before touching the filesystem.
    let mut files: Vec<(PathBuf, String)> = Vec::new();
    let json = serde_json::to_string_pretty(report).map_err(|e| PipelineError::Stage {
        stage: "report",
        source: StageSource::Json(e),
    })?;
    files.push((dir.join(REPORT_JSON), json + "\n"));
    files.push((dir.join(SUMMARY_TXT), render_summary(report)));

    let fusion = &report.fusion;
    files.push((dir.join("anomalies_consensus.csv"), method_csv(&fusion.consensus)));
    files.push((dir.join("anomalies_majority.csv"), method_csv(&fusion.majority)));
    files.push((dir.join("anomalies_weighted.csv"), method_csv(&fusion.weighted)));
    files.push((dir.join("anomalies_rank.csv"), method_csv(&fusion.rank)));

    let mut final_csv = String::from("timestamp,methods,votes\n");
    for entry in fusion.provenance.iter().filter(|e| e.in_final) {
        let votes: String = entry.votes.iter().map(|v| char::from(b'0' + v)).collect();
        let _ = writeln!(
            final_csv,
            "{},{},{}",
            entry.timestamp,
            entry.methods.join(";"),
            votes
        );
    }
    files.push((dir.join("anomalies_final.csv"), final_csv));

    for det in &report.detectors {
        if det.loss_history.is_empty() {
            continue;
        }
        let name = sanitize(&det.name);
        for (suffix, curve) in [
            ("train", &det.loss_history.train),
            ("validation", &det.loss_history.validation),
        ] {
            let mut csv = String::from("epoch,loss\n");
            for (epoch, loss) in curve.iter().enumerate() {
                let _ = writeln!(csv, "{epoch},{loss}");
            }
            files.push((dir.join(format!("loss_{name}_{suffix}.csv")), csv));
        }
    }

    let mut written: Vec<PathBuf> = Vec::new();
    for (path, content) in files {
        match std::fs::write(&path, content) {
            Ok(()) => written.push(path),
            Err(e) => {
                for done in &written {
                    let _ = std::fs::remove_file(done);
                }
                return stage_io(Err(e));
            }
        }
    }
    Ok(written)
}

/// Renders the human-readable run summary.
pub fn render_summary(report: &AnomalyReport) -> String {
    let mut out = String::new();
    let f = &report.fusion;
    let _ = writeln!(out, "anomaly detection run");
    let _ = writeln!(out, "=====================");
    let _ = writeln!(out, "config fingerprint : {}", report.config_fingerprint);
    let _ = writeln!(out, "seed               : {}", report.seed);
    if let Some(data) = &report.data {
        let _ = writeln!(
            out,
            "data               : {} rows x {} channels at {} ms",
            data.resampled_rows,
            data.channels.len(),
            data.resample_interval_ms
        );
        let _ = writeln!(
            out,
            "split              : train {} / test {} / validation {}",
            data.train_rows, data.test_rows, data.validation_rows
        );
        let _ = writeln!(out, "scored instants    : {}", data.scored_rows);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "detector panel");
    let _ = writeln!(out, "--------------");
    for det in &report.detectors {
        let threshold = det
            .threshold
            .map(|t| format!("{t:.6}"))
            .unwrap_or_else(|| "-".to_string());
        let _ = writeln!(
            out,
            "{:<28} kind {:<26} mae {:<10.6} threshold {:<10} flagged {}",
            det.name, det.kind, det.mae, threshold, det.flagged
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "fusion");
    let _ = writeln!(out, "------");
    let _ = writeln!(out, "consensus      N_a   = {}", f.n_a);
    let _ = writeln!(out, "majority       N_b.1 = {}", f.majority.count);
    let _ = writeln!(out, "weighted       N_b.2a = {}", f.weighted.count);
    let _ = writeln!(out, "rank           N_b.2b = {}", f.rank.count);
    let _ = writeln!(
        out,
        "fused stage-B  N_b   = {} (selected: {})",
        f.n_b,
        f.selected_method.name()
    );
    let _ = writeln!(out, "total          N     = {} (= N_a + N_b)", f.n);
    let _ = writeln!(out);
    let _ = writeln!(out, "model weights");
    let _ = writeln!(out, "-------------");
    for (i, name) in f.model_names.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<28} mae {:<10.6} W {:<10.6} rank {:<3} RW {:.6}",
            name,
            f.weights.mae[i],
            f.weights.performance[i],
            f.weights.ranks[i],
            f.weights.rank_weights[i]
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "final anomalies ({})", f.final_set.len());
    let _ = writeln!(out, "---------------");
    for entry in f.provenance.iter().filter(|e| e.in_final) {
        let _ = writeln!(out, "{}  [{}]", entry.timestamp, entry.methods.join(", "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::LabelSeries;
    use crate::fusion::{dual_fusion, ModelVerdict};
    use crate::series::Timestamp;
    use tempfile::tempdir;

    fn empty_report() -> AnomalyReport {
        let grid: Vec<Timestamp> = (0..3).map(|i| Timestamp::from_millis(i * 1000)).collect();
        let verdicts: Vec<ModelVerdict> = (0..3)
            .map(|i| ModelVerdict {
                name: format!("m{i}"),
                labels: LabelSeries {
                    timestamps: grid.clone(),
                    labels: vec![0, 0, 0],
                },
                mae: 0.1,
            })
            .collect();
        AnomalyReport {
            config_fingerprint: "test".to_string(),
            seed: 1,
            data: None,
            detectors: Vec::new(),
            fusion: dual_fusion(&verdicts).unwrap(),
        }
    }

    #[test]
    fn empty_fusion_writes_header_only_csvs() {
        let dir = tempdir().unwrap();
        let report = empty_report();
        emit_report(&report, dir.path()).unwrap();
        for name in [
            "anomalies_consensus.csv",
            "anomalies_majority.csv",
            "anomalies_weighted.csv",
            "anomalies_rank.csv",
        ] {
            let content = std::fs::read_to_string(dir.path().join(name)).unwrap();
            assert_eq!(content, "timestamp\n", "{name}");
        }
        let final_csv = std::fs::read_to_string(dir.path().join("anomalies_final.csv")).unwrap();
        assert_eq!(final_csv, "timestamp,methods,votes\n");
        assert!(dir.path().join(REPORT_JSON).exists());
        assert!(dir.path().join(SUMMARY_TXT).exists());
    }

    #[test]
    fn report_json_roundtrips_to_equal_report() {
        let report = empty_report();
        let json = serde_json::to_string_pretty(&report).unwrap();
        let parsed: AnomalyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, report);
    }
}
