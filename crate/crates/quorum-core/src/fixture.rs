//! Plain-text fixtures: a vote table (timestamp column plus one binary column
//! per model) and a model MAE list. These files let fusion run end-to-end on
//! externally supplied verdicts, without fitting any detector.

use std::path::Path;

use crate::detect::LabelSeries;
use crate::error::DataError;
use crate::series::Timestamp;

/// Per-model verdicts sharing one timestamp grid, as read from a vote table.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTable {
    pub model_names: Vec<String>,
    pub labels: Vec<LabelSeries>,
}

/// Reads a CSV vote table: header `timestamp,<model...>`, one 0/1 cell per
/// model per row. Rows are sorted by timestamp.
pub fn load_vote_table(path: impl AsRef<Path>) -> Result<VoteTable, DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Io {
            path: path_str.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .clone();
    if headers.is_empty() {
        return Err(DataError::EmptySeries);
    }
    let model_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if model_names.is_empty() {
        return Err(DataError::EmptySeries);
    }

    let mut rows: Vec<(Timestamp, Vec<u8>)> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let row = row_no + 1;
        let record = record.map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let ts_raw = record.get(0).unwrap_or("");
        let ts: Timestamp = ts_raw.parse().map_err(|_| DataError::BadTimestamp {
            row,
            value: ts_raw.to_string(),
        })?;
        let mut votes = Vec::with_capacity(model_names.len());
        for (j, name) in model_names.iter().enumerate() {
            let cell = record.get(j + 1).unwrap_or("");
            match cell {
                "0" => votes.push(0),
                "1" => votes.push(1),
                other => {
                    return Err(DataError::BadVote {
                        row,
                        column: name.clone(),
                        value: other.to_string(),
                    })
                }
            }
        }
        rows.push((ts, votes));
    }
    if rows.is_empty() {
        return Err(DataError::EmptySeries);
    }
    rows.sort_by_key(|(ts, _)| *ts);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(DataError::DuplicateTimestamp {
                timestamp: w[0].0.to_string(),
                first: 0,
                second: 0,
            });
        }
    }

    let timestamps: Vec<Timestamp> = rows.iter().map(|(ts, _)| *ts).collect();
    let labels = (0..model_names.len())
        .map(|j| LabelSeries {
            timestamps: timestamps.clone(),
            labels: rows.iter().map(|(_, votes)| votes[j]).collect(),
        })
        .collect();
    Ok(VoteTable {
        model_names,
        labels,
    })
}

/// Writes a vote table in the format [`load_vote_table`] reads.
pub fn write_vote_table(path: impl AsRef<Path>, table: &VoteTable) -> Result<(), DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut out = String::from("timestamp");
    for name in &table.model_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let grid = &table.labels[0].timestamps;
    for (row, ts) in grid.iter().enumerate() {
        out.push_str(&ts.to_string());
        for series in &table.labels {
            out.push(',');
            out.push_str(if series.labels[row] == 1 { "1" } else { "0" });
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| DataError::Io {
        path: path_str,
        source: e,
    })
}

/// Reads a model MAE list: header `model,mae`.
pub fn load_mae_table(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>, DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DataError::Io {
            path: path_str.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
    let mut out = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let row = row_no + 1;
        let record = record.map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let name = record.get(0).unwrap_or("").to_string();
        let raw = record.get(1).unwrap_or("");
        let mae: f64 = raw.parse().map_err(|_| DataError::NonNumericCell {
            row,
            column: "mae".to_string(),
            value: raw.to_string(),
        })?;
        out.push((name, mae));
    }
    if out.is_empty() {
        return Err(DataError::EmptySeries);
    }
    Ok(out)
}

/// Writes a MAE list in the format [`load_mae_table`] reads.
pub fn write_mae_table(
    path: impl AsRef<Path>,
    entries: &[(String, f64)],
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = String::from("model,mae\n");
    for (name, mae) in entries {
        out.push_str(&format!("{name},{mae}\n"));
    }
    std::fs::write(path, out).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Reorders `mae` entries to match `model_names`; every model must appear.
pub fn align_mae(
    model_names: &[String],
    mae: &[(String, f64)],
) -> Result<Vec<f64>, DataError> {
    model_names
        .iter()
        .map(|name| {
            mae.iter()
                .find(|(n, _)| n == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| DataError::MissingModel {
                    model: name.clone(),
                    what: "mae table",
                })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn vote_table_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("votes.csv");
        let grid: Vec<Timestamp> = vec![
            "2020-12-09 10:02:00.702".parse().unwrap(),
            "2020-12-09 10:02:01.734".parse().unwrap(),
        ];
        let table = VoteTable {
            model_names: vec!["a".into(), "b".into()],
            labels: vec![
                LabelSeries {
                    timestamps: grid.clone(),
                    labels: vec![1, 0],
                },
                LabelSeries {
                    timestamps: grid,
                    labels: vec![1, 1],
                },
            ],
        };
        write_vote_table(&path, &table).unwrap();
        let loaded = load_vote_table(&path).unwrap();
        assert_eq!(loaded, table);
    }

    #[test]
    fn mae_table_roundtrip_preserves_values() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mae.csv");
        let entries = vec![
            ("AE".to_string(), 0.43),
            ("VAE".to_string(), 0.453),
            ("CAE".to_string(), 0.007),
            ("LSTM-AE".to_string(), 0.116),
            ("LSTM-VAE".to_string(), 0.484),
        ];
        write_mae_table(&path, &entries).unwrap();
        let loaded = load_mae_table(&path).unwrap();
        assert_eq!(loaded, entries);
    }

    #[test]
    fn vote_table_rejects_non_binary_cell() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("votes.csv");
        std::fs::write(&path, "timestamp,m\n2021-01-01 00:00:00,2\n").unwrap();
        assert!(matches!(
            load_vote_table(&path),
            Err(DataError::BadVote { .. })
        ));
    }

    #[test]
    fn align_mae_reorders_and_reports_missing() {
        let names = vec!["b".to_string(), "a".to_string()];
        let entries = vec![("a".to_string(), 0.1), ("b".to_string(), 0.2)];
        assert_eq!(align_mae(&names, &entries).unwrap(), vec![0.2, 0.1]);
        let missing = align_mae(&["c".to_string()], &entries).unwrap_err();
        assert!(matches!(missing, DataError::MissingModel { .. }));
    }
}
