//! Multichannel time series: CSV ingestion, resampling, and chronological splits.
//!
//! Timestamps are naive instants carried at millisecond precision. Values are
//! an `n x m` matrix of channel readings; missing cells are `NaN` until
//! [`resample`] forward-fills them, after which every entry is finite.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDateTime;
use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::DataError;

/// A naive instant with millisecond precision. Serializes as its ISO-8601
/// display form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse()
            .map_err(|()| serde::de::Error::custom(format!("unparseable timestamp '{raw}'")))
    }
}

impl Timestamp {
    pub fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub fn millis(self) -> i64 {
        self.0
    }
}

const TIMESTAMP_FORMATS: &[&str] = &[
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
];

impl FromStr for Timestamp {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        for fmt in TIMESTAMP_FORMATS {
            if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
                return Ok(Timestamp(dt.and_utc().timestamp_millis()));
            }
        }
        Err(())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match chrono::DateTime::from_timestamp_millis(self.0) {
            Some(dt) => write!(f, "{}", dt.naive_utc().format("%Y-%m-%d %H:%M:%S%.3f")),
            None => write!(f, "@{}ms", self.0),
        }
    }
}

/// Timestamped `n x m` matrix of sensor channels.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<Timestamp>,
    channels: Vec<String>,
    values: Array2<f64>,
}

impl TimeSeries {
    /// Builds a series, enforcing strictly increasing timestamps and a
    /// rectangular value matrix.
    pub fn new(
        timestamps: Vec<Timestamp>,
        channels: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Self, DataError> {
        if timestamps.is_empty() {
            return Err(DataError::EmptySeries);
        }
        if values.nrows() != timestamps.len() || values.ncols() != channels.len() {
            return Err(DataError::RaggedRow {
                row: 0,
                expected: channels.len(),
                got: values.ncols(),
            });
        }
        for i in 1..timestamps.len() {
            if timestamps[i] <= timestamps[i - 1] {
                return Err(DataError::DuplicateTimestamp {
                    timestamp: timestamps[i].to_string(),
                    first: i - 1,
                    second: i,
                });
            }
        }
        Ok(TimeSeries {
            timestamps,
            channels,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn width(&self) -> usize {
        self.channels.len()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Sub-series covering the half-open row range `lo..hi`.
    pub fn slice_rows(&self, lo: usize, hi: usize) -> Result<TimeSeries, DataError> {
        if lo >= hi || hi > self.len() {
            return Err(DataError::EmptySeries);
        }
        TimeSeries::new(
            self.timestamps[lo..hi].to_vec(),
            self.channels.clone(),
            self.values.slice(ndarray::s![lo..hi, ..]).to_owned(),
        )
    }

    /// Spacing between consecutive timestamps when it is uniform.
    pub fn uniform_interval_ms(&self) -> Option<i64> {
        if self.len() < 2 {
            return None;
        }
        let step = self.timestamps[1].millis() - self.timestamps[0].millis();
        for w in self.timestamps.windows(2) {
            if w[1].millis() - w[0].millis() != step {
                return None;
            }
        }
        Some(step)
    }
}

/// Loads a CSV file whose first matching column holds ISO-8601 timestamps and
/// all remaining columns hold numeric channels. Rows are sorted by timestamp;
/// duplicate timestamps are rejected. Empty cells become `NaN` (missing).
pub fn load_csv(path: impl AsRef<Path>, timestamp_column: &str) -> Result<TimeSeries, DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io {
                path: path_str.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => DataError::Csv {
                path: path_str.clone(),
                source: e,
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?
        .clone();
    let ts_idx = headers
        .iter()
        .position(|h| h == timestamp_column)
        .ok_or_else(|| DataError::MissingTimestampColumn {
            column: timestamp_column.to_string(),
        })?;
    let channels: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != ts_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows: Vec<(Timestamp, Vec<f64>, usize)> = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        // 1-based data row number for error messages (header is row 0)
        let row = row_no + 1;
        let record = record.map_err(|e| DataError::Csv {
            path: path_str.clone(),
            source: e,
        })?;
        let ts_raw = record.get(ts_idx).unwrap_or("");
        let ts: Timestamp = ts_raw.parse().map_err(|_| DataError::BadTimestamp {
            row,
            value: ts_raw.to_string(),
        })?;
        let mut vals = Vec::with_capacity(channels.len());
        for (i, cell) in record.iter().enumerate() {
            if i == ts_idx {
                continue;
            }
            if cell.is_empty() {
                vals.push(f64::NAN);
            } else {
                let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                    row,
                    column: headers.get(i).unwrap_or("?").to_string(),
                    value: cell.to_string(),
                })?;
                vals.push(v);
            }
        }
        if vals.len() != channels.len() {
            return Err(DataError::RaggedRow {
                row,
                expected: channels.len(),
                got: vals.len(),
            });
        }
        rows.push((ts, vals, row));
    }
    if rows.is_empty() {
        return Err(DataError::EmptySeries);
    }

    rows.sort_by_key(|(ts, _, _)| *ts);
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(DataError::DuplicateTimestamp {
                timestamp: w[0].0.to_string(),
                first: w[0].2,
                second: w[1].2,
            });
        }
    }

    let n = rows.len();
    let m = channels.len();
    let timestamps = rows.iter().map(|(ts, _, _)| *ts).collect();
    let mut values = Array2::zeros((n, m));
    for (i, (_, vals, _)) in rows.iter().enumerate() {
        for (j, v) in vals.iter().enumerate() {
            values[(i, j)] = *v;
        }
    }
    TimeSeries::new(timestamps, channels, values)
}

/// Writes a series as CSV in the format [`load_csv`] reads. Values use the
/// shortest round-trip float representation, so load-after-write is exact.
pub fn write_csv(
    series: &TimeSeries,
    path: impl AsRef<Path>,
    timestamp_column: &str,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = String::from(timestamp_column);
    for name in series.channels() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..series.len() {
        out.push_str(&series.timestamps()[i].to_string());
        for v in series.row(i) {
            out.push(',');
            if v.is_nan() {
                // missing value
            } else {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Bucket aggregator applied during [`resample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    Mean,
}

/// Resamples onto a uniform grid anchored at the first timestamp.
///
/// Each output row aggregates the input rows falling in its bucket. Cells
/// left empty (no finite samples in the bucket) are forward-filled from the
/// previous output row; leading rows that cannot be filled are dropped.
pub fn resample(
    series: &TimeSeries,
    interval_ms: i64,
    aggregator: Aggregator,
) -> Result<TimeSeries, DataError> {
    if interval_ms <= 0 {
        return Err(DataError::BadInterval {
            millis: interval_ms,
        });
    }
    if series.is_empty() {
        return Err(DataError::EmptySeries);
    }
    let Aggregator::Mean = aggregator;

    let m = series.width();
    let t0 = series.timestamps()[0].millis();
    let t_last = series.timestamps()[series.len() - 1].millis();
    let n_buckets = ((t_last - t0) / interval_ms) as usize + 1;

    let mut sums = vec![0.0f64; n_buckets * m];
    let mut counts = vec![0u32; n_buckets * m];
    for (i, ts) in series.timestamps().iter().enumerate() {
        let b = ((ts.millis() - t0) / interval_ms) as usize;
        for (j, v) in series.row(i).iter().enumerate() {
            if v.is_finite() {
                sums[b * m + j] += v;
                counts[b * m + j] += 1;
            }
        }
    }

    let mut values = Array2::from_elem((n_buckets, m), f64::NAN);
    for b in 0..n_buckets {
        for j in 0..m {
            if counts[b * m + j] > 0 {
                values[(b, j)] = sums[b * m + j] / f64::from(counts[b * m + j]);
            }
        }
    }

    // Forward-fill gaps, then drop rows before every channel has a value.
    for b in 1..n_buckets {
        for j in 0..m {
            if values[(b, j)].is_nan() {
                values[(b, j)] = values[(b - 1, j)];
            }
        }
    }
    let first_complete = (0..n_buckets)
        .find(|&b| (0..m).all(|j| values[(b, j)].is_finite()))
        .ok_or(DataError::AllMissing)?;

    let timestamps: Vec<Timestamp> = (first_complete..n_buckets)
        .map(|b| Timestamp::from_millis(t0 + (b as i64) * interval_ms))
        .collect();
    let values = values
        .slice(ndarray::s![first_complete..n_buckets, ..])
        .to_owned();
    TimeSeries::new(timestamps, series.channels().to_vec(), values)
}

/// Chronological split specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of the (non-validation) rows assigned to training.
    pub train_fraction: f64,
    /// Inclusive timestamp interval held out entirely from train and test.
    pub validation_range: Option<(Timestamp, Timestamp)>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            validation_range: None,
        }
    }
}

/// Train/test/validation partitions of a [`split`]. Validation is empty when
/// no `validation_range` was given.
#[derive(Debug, Clone)]
pub struct SplitSeries {
    pub train: TimeSeries,
    pub test: TimeSeries,
    pub validation: Option<TimeSeries>,
}

/// Splits chronologically: validation rows are extracted first, then the
/// remainder is cut at `floor(train_fraction * n)` with train preceding test.
pub fn split(series: &TimeSeries, spec: &SplitSpec) -> Result<SplitSeries, DataError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DataError::BadTrainFraction {
            fraction: spec.train_fraction,
        });
    }

    let in_validation = |ts: Timestamp| match spec.validation_range {
        Some((lo, hi)) => ts >= lo && ts <= hi,
        None => false,
    };

    let mut val_rows = Vec::new();
    let mut rest_rows = Vec::new();
    for i in 0..series.len() {
        if in_validation(series.timestamps()[i]) {
            val_rows.push(i);
        } else {
            rest_rows.push(i);
        }
    }

    let n_rest = rest_rows.len();
    let n_train = (spec.train_fraction * n_rest as f64).floor() as usize;
    if n_train == 0 {
        return Err(DataError::EmptyPartition { partition: "train" });
    }
    if n_train == n_rest {
        return Err(DataError::EmptyPartition { partition: "test" });
    }

    let take = |rows: &[usize]| -> TimeSeries {
        let timestamps = rows.iter().map(|&i| series.timestamps()[i]).collect();
        let mut values = Array2::zeros((rows.len(), series.width()));
        for (out, &i) in rows.iter().enumerate() {
            values.row_mut(out).assign(&series.row(i));
        }
        TimeSeries::new(timestamps, series.channels().to_vec(), values)
            .expect("selected rows preserve order")
    };

    let validation = if val_rows.is_empty() {
        None
    } else {
        Some(take(&val_rows))
    };
    Ok(SplitSeries {
        train: take(&rest_rows[..n_train]),
        test: take(&rest_rows[n_train..]),
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write;

    fn ts(ms: i64) -> Timestamp {
        Timestamp::from_millis(ms)
    }

    fn series(stamps: &[i64], values: Array2<f64>) -> TimeSeries {
        TimeSeries::new(
            stamps.iter().copied().map(ts).collect(),
            (0..values.ncols()).map(|j| format!("c{j}")).collect(),
            values,
        )
        .unwrap()
    }

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn timestamp_parses_iso8601_with_millis() {
        let t: Timestamp = "2020-12-09 10:02:00.702".parse().unwrap();
        assert_eq!(t.to_string(), "2020-12-09 10:02:00.702");
        let t2: Timestamp = "2020-12-09T10:02:00.702".parse().unwrap();
        assert_eq!(t, t2);
        let plain: Timestamp = "2020-12-09 10:02:00".parse().unwrap();
        assert_eq!(plain.to_string(), "2020-12-09 10:02:00.000");
        assert!("not a time".parse::<Timestamp>().is_err());
    }

    #[test]
    fn load_csv_three_rows_two_channels() {
        let f = write_csv(
            "timestamp,a,b\n\
             2021-01-01 00:00:00,1.0,4.0\n\
             2021-01-01 00:00:01,2.0,5.0\n\
             2021-01-01 00:00:02,3.0,6.0\n",
        );
        let s = load_csv(f.path(), "timestamp").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.width(), 2);
        assert_eq!(s.channels(), &["a".to_string(), "b".to_string()]);
        assert_eq!(s.values()[(2, 1)], 6.0);
    }

    #[test]
    fn load_csv_sorts_out_of_order_rows() {
        let f = write_csv(
            "timestamp,a\n\
             2021-01-01 00:00:02,3.0\n\
             2021-01-01 00:00:00,1.0\n\
             2021-01-01 00:00:01,2.0\n",
        );
        let s = load_csv(f.path(), "timestamp").unwrap();
        let vals: Vec<f64> = s.values().column(0).to_vec();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn load_csv_rejects_duplicate_timestamp() {
        let f = write_csv(
            "timestamp,a\n\
             2021-01-01 00:00:01,1.0\n\
             2021-01-01 00:00:01,2.0\n",
        );
        let err = load_csv(f.path(), "timestamp").unwrap_err();
        match err {
            DataError::DuplicateTimestamp { timestamp, .. } => {
                assert!(timestamp.contains("00:00:01"));
            }
            other => panic!("expected duplicate error, got {other}"),
        }
    }

    #[test]
    fn load_csv_names_row_of_bad_timestamp() {
        let f = write_csv("timestamp,a\n2021-01-01 00:00:00,1.0\nbogus,2.0\n");
        match load_csv(f.path(), "timestamp").unwrap_err() {
            DataError::BadTimestamp { row, value } => {
                assert_eq!(row, 2);
                assert_eq!(value, "bogus");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn load_csv_names_row_and_column_of_non_numeric_cell() {
        let f = write_csv("timestamp,a,b\n2021-01-01 00:00:00,1.0,oops\n");
        match load_csv(f.path(), "timestamp").unwrap_err() {
            DataError::NonNumericCell { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (1, "b", "oops"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn load_csv_empty_cell_is_missing() {
        let f = write_csv(
            "timestamp,a\n\
             2021-01-01 00:00:00,\n\
             2021-01-01 00:00:01,2.0\n",
        );
        let s = load_csv(f.path(), "timestamp").unwrap();
        assert!(s.values()[(0, 0)].is_nan());
        assert_eq!(s.values()[(1, 0)], 2.0);
    }

    #[test]
    fn resample_means_values_within_bucket() {
        // two samples 100ms apart, bucketed at 1s -> single row with their mean
        let s = series(&[0, 100], array![[1.0], [3.0]]);
        let r = resample(&s, 1000, Aggregator::Mean).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.values()[(0, 0)], 2.0);
    }

    #[test]
    fn resample_identity_on_uniform_series() {
        let s = series(&[0, 1000, 2000], array![[1.0, 4.0], [2.0, 5.0], [3.0, 6.0]]);
        let r = resample(&s, 1000, Aggregator::Mean).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn resample_forward_fills_empty_middle_bucket() {
        // buckets: 0s,1s,2s,3s,4s; the 3s bucket has no samples.
        // Hand-trace: [1, 2, 3, <fill=3>, 5]
        let s = series(&[0, 1000, 2000, 4000], array![[1.0], [2.0], [3.0], [5.0]]);
        let r = resample(&s, 1000, Aggregator::Mean).unwrap();
        let got: Vec<f64> = r.values().column(0).to_vec();
        assert_eq!(got, vec![1.0, 2.0, 3.0, 3.0, 5.0]);
        assert_eq!(r.timestamps()[3], ts(3000));
    }

    #[test]
    fn resample_drops_leading_missing_rows() {
        let s = series(&[0, 1000, 2000], array![[f64::NAN], [2.0], [3.0]]);
        let r = resample(&s, 1000, Aggregator::Mean).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.timestamps()[0], ts(1000));
        assert_eq!(r.values()[(0, 0)], 2.0);
    }

    #[test]
    fn resample_rejects_empty_interval() {
        let s = series(&[0], array![[1.0]]);
        assert!(matches!(
            resample(&s, 0, Aggregator::Mean),
            Err(DataError::BadInterval { .. })
        ));
    }

    #[test]
    fn split_ten_rows_at_point_eight() {
        let values = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let stamps: Vec<i64> = (0..10).map(|i| i * 1000).collect();
        let s = series(&stamps, values);
        let parts = split(&s, &SplitSpec::default()).unwrap();
        assert_eq!(parts.train.len(), 8);
        assert_eq!(parts.test.len(), 2);
        assert!(parts.validation.is_none());
        assert_eq!(parts.test.timestamps()[0], ts(8000));
    }

    #[test]
    fn split_extracts_validation_range_then_floors_train_count() {
        // rows 0..10 at 1s; validation covers rows 0 and 1. Remaining 8 rows:
        // floor(0.8 * 8) = 6 train, 2 test.
        let values = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let stamps: Vec<i64> = (0..10).map(|i| i * 1000).collect();
        let s = series(&stamps, values);
        let spec = SplitSpec {
            train_fraction: 0.8,
            validation_range: Some((ts(0), ts(1000))),
        };
        let parts = split(&s, &spec).unwrap();
        assert_eq!(parts.validation.as_ref().map(TimeSeries::len), Some(2));
        assert_eq!(parts.train.len(), 6);
        assert_eq!(parts.test.len(), 2);
        assert_eq!(parts.train.timestamps()[0], ts(2000));
    }

    #[test]
    fn split_rejects_fraction_one() {
        let s = series(&[0, 1000], array![[1.0], [2.0]]);
        let spec = SplitSpec {
            train_fraction: 1.0,
            validation_range: None,
        };
        assert!(matches!(
            split(&s, &spec),
            Err(DataError::BadTrainFraction { .. })
        ));
    }

    #[test]
    fn split_partitions_reconstruct_input() {
        let values = Array2::from_shape_fn((20, 2), |(i, j)| (i * 2 + j) as f64);
        let stamps: Vec<i64> = (0..20).map(|i| i * 500).collect();
        let s = series(&stamps, values);
        let spec = SplitSpec {
            train_fraction: 0.7,
            validation_range: Some((ts(2500), ts(4000))),
        };
        let parts = split(&s, &spec).unwrap();
        let mut all: Vec<Timestamp> = parts
            .train
            .timestamps()
            .iter()
            .chain(parts.test.timestamps())
            .chain(parts.validation.as_ref().unwrap().timestamps())
            .copied()
            .collect();
        all.sort();
        assert_eq!(all, s.timestamps());
        // disjoint: sorted unique count equals total
        all.dedup();
        assert_eq!(all.len(), s.len());
    }
}
