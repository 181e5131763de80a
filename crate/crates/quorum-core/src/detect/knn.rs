//! Window nearest-neighbor distance against stored training windows.

use ndarray::Array2;

use crate::error::DetectorError;
use crate::series::{TimeSeries, Timestamp};

use super::window::sliding_windows;
use super::DetectorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnParams {
    pub window: usize,
    pub neighbors: usize,
    /// Reference windows, possibly subsampled, `n_ref x d`.
    pub references: Array2<f64>,
}

pub fn fit(spec: &DetectorSpec, train: &TimeSeries) -> Result<KnnParams, DetectorError> {
    let hp = &spec.hp;
    let windows = sliding_windows(train, hp.window)?;
    let n = windows.nrows();

    // Deterministic even-stride subsample keeps scoring near-linear on large
    // training sets.
    let cap = hp.max_reference_windows.max(1);
    let references = if n > cap {
        let mut out = Array2::zeros((cap, windows.ncols()));
        for i in 0..cap {
            out.row_mut(i).assign(&windows.row(i * n / cap));
        }
        out
    } else {
        windows
    };

    if hp.neighbors > references.nrows() {
        return Err(DetectorError::InvalidHyperparameter {
            name: "neighbors",
            reason: format!(
                "need at least {} reference windows, have {}",
                hp.neighbors,
                references.nrows()
            ),
        });
    }

    Ok(KnnParams {
        window: hp.window,
        neighbors: hp.neighbors,
        references,
    })
}

pub fn score(
    params: &KnnParams,
    series: &TimeSeries,
) -> Result<(Vec<Timestamp>, Vec<f64>, usize), DetectorError> {
    let w = params.window;
    let windows = sliding_windows(series, w)?;
    let d = windows.ncols();
    let n_ref = params.references.nrows();
    let k = params.neighbors;

    let warmup = w - 1;
    let timestamps = series.timestamps()[warmup..].to_vec();
    let mut scores = Vec::with_capacity(windows.nrows());
    let mut dists = vec![0.0f64; n_ref];
    for query in windows.rows() {
        for (slot, reference) in dists.iter_mut().zip(params.references.rows()) {
            let mut acc = 0.0;
            for (a, b) in query.iter().zip(reference) {
                acc += (a - b).abs();
            }
            *slot = acc / d as f64;
        }
        dists.select_nth_unstable_by(k - 1, f64::total_cmp);
        let mean_k = dists[..k].iter().sum::<f64>() / k as f64;
        scores.push(mean_k);
    }
    Ok((timestamps, scores, warmup))
}
