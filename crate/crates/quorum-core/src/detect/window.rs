//! Sliding-window extraction shared by the windowed detectors.

use ndarray::{Array2, ArrayView1};

use crate::error::DetectorError;
use crate::series::TimeSeries;

/// Flattens every length-`w` window (stride 1) into a row of `w * m` values,
/// sample-major: the window's last sample occupies the final `m` slots.
pub fn sliding_windows(series: &TimeSeries, w: usize) -> Result<Array2<f64>, DetectorError> {
    let n = series.len();
    let m = series.width();
    if n < w {
        return Err(DetectorError::TooFewRows {
            required: w,
            got: n,
        });
    }
    let count = n - w + 1;
    let mut out = Array2::zeros((count, w * m));
    for i in 0..count {
        for s in 0..w {
            for j in 0..m {
                out[(i, s * m + j)] = series.values()[(i + s, j)];
            }
        }
    }
    Ok(out)
}

/// Mean absolute error over the last `m` entries of two flattened windows.
pub fn last_element_mae(reconstructed: ArrayView1<f64>, original: ArrayView1<f64>, m: usize) -> f64 {
    let d = original.len();
    let mut acc = 0.0;
    for j in (d - m)..d {
        acc += (reconstructed[j] - original[j]).abs();
    }
    acc / m as f64
}
