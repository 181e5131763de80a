//! Closed-form low-rank reconstruction via principal components.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

use crate::error::DetectorError;
use crate::series::{TimeSeries, Timestamp};

use super::window::{last_element_mae, sliding_windows};
use super::DetectorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaParams {
    pub window: usize,
    pub mean: Array1<f64>,
    /// Top components as rows, `latent x d`.
    pub components: Array2<f64>,
}

pub fn fit(spec: &DetectorSpec, train: &TimeSeries) -> Result<PcaParams, DetectorError> {
    let hp = &spec.hp;
    let windows = sliding_windows(train, hp.window)?;
    let n = windows.nrows();
    let d = windows.ncols();

    let mean = windows.sum_axis(ndarray::Axis(0)) / n as f64;
    let centered = &windows - &mean;

    // Population covariance, d x d.
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut acc = 0.0;
            for i in 0..n {
                acc += centered[(i, a)] * centered[(i, b)];
            }
            let v = acc / n as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    // Largest eigenvalue first; ties broken by original column index so the
    // decomposition is reproducible.
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let r = hp.latent;
    let mut components = Array2::zeros((r, d));
    for (row, &col) in order.iter().take(r).enumerate() {
        let v = eigen.eigenvectors.column(col);
        // Fix an overall sign so equivalent eigenvectors serialize identically.
        let flip = v.iter().fold(0.0f64, |acc, &x| {
            if x.abs() > acc.abs() {
                x
            } else {
                acc
            }
        });
        let sign = if flip < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components[(row, j)] = sign * v[j];
        }
    }

    Ok(PcaParams {
        window: hp.window,
        mean,
        components,
    })
}

pub fn score(
    params: &PcaParams,
    series: &TimeSeries,
) -> Result<(Vec<Timestamp>, Vec<f64>, usize), DetectorError> {
    let m = series.width();
    let w = params.window;
    let windows = sliding_windows(series, w)?;
    let centered = &windows - &params.mean;
    // Project onto the retained subspace and back.
    let coords = centered.dot(&params.components.t());
    let recon = coords.dot(&params.components);

    let warmup = w - 1;
    let timestamps = series.timestamps()[warmup..].to_vec();
    let scores = recon
        .rows()
        .into_iter()
        .zip(centered.rows())
        .map(|(rec, orig)| last_element_mae(rec, orig, m))
        .collect();
    Ok((timestamps, scores, warmup))
}
