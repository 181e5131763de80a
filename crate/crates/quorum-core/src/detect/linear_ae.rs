//! Windowed linear autoencoder trained by mini-batch Adam on MSE.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::DetectorError;
use crate::series::{TimeSeries, Timestamp};

use super::train::{Adam1, Adam2, EarlyStopping, LossHistory};
use super::window::{last_element_mae, sliding_windows};
use super::DetectorSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearAeParams {
    pub window: usize,
    pub encoder: Array2<f64>,
    pub encoder_bias: Array1<f64>,
    pub decoder: Array2<f64>,
    pub decoder_bias: Array1<f64>,
}

struct Model {
    encoder: Array2<f64>,
    encoder_bias: Array1<f64>,
    decoder: Array2<f64>,
    decoder_bias: Array1<f64>,
}

impl Model {
    fn init(d: usize, h: usize, rng: &mut ChaCha20Rng) -> Self {
        let scale = 1.0 / (d as f64).sqrt();
        let mut draw = |rows: usize, cols: usize| {
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
        };
        Model {
            encoder: draw(h, d),
            decoder: draw(d, h),
            encoder_bias: Array1::zeros(h),
            decoder_bias: Array1::zeros(d),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let z = x.dot(&self.encoder.t()) + &self.encoder_bias;
        let xhat = z.dot(&self.decoder.t()) + &self.decoder_bias;
        (z, xhat)
    }

    fn mse(&self, x: &Array2<f64>) -> f64 {
        let (_, xhat) = self.forward(x);
        let diff = &xhat - x;
        diff.mapv(|v| v * v).sum() / diff.len() as f64
    }
}

type FitOutput = (LinearAeParams, LossHistory);

pub fn fit(spec: &DetectorSpec, train: &TimeSeries) -> Result<FitOutput, DetectorError> {
    let hp = &spec.hp;
    let windows = sliding_windows(train, hp.window)?;
    let n = windows.nrows();
    let d = windows.ncols();
    let h = hp.latent;

    // Chronological 80/20 split of the windows for loss monitoring; tiny
    // datasets monitor the training windows themselves.
    let n_fit = ((0.8 * n as f64).floor() as usize).max(1);
    let (fit_view, val_view) = if n_fit < n {
        (
            windows.slice(ndarray::s![..n_fit, ..]),
            windows.slice(ndarray::s![n_fit.., ..]),
        )
    } else {
        (windows.view(), windows.view())
    };
    let fit_set = fit_view.to_owned();
    let val_set = val_view.to_owned();

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut model = Model::init(d, h, &mut rng);
    let mut opt_enc = Adam2::new((h, d));
    let mut opt_enc_b = Adam1::new(h);
    let mut opt_dec = Adam2::new((d, h));
    let mut opt_dec_b = Adam1::new(d);

    let mut history = LossHistory::empty();
    let mut stopper = EarlyStopping::new(hp.patience);
    let mut best = model.clone_params();
    let mut step: u64 = 0;
    let mut indices: Vec<usize> = (0..fit_set.nrows()).collect();

    for epoch in 0..hp.max_epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for chunk in indices.chunks(hp.batch_size.max(1)) {
            let batch = fit_set.select(Axis(0), chunk);
            let b = batch.nrows();
            let (z, xhat) = model.forward(&batch);
            let diff = &xhat - &batch;
            let loss = diff.mapv(|v| v * v).sum() / (b * d) as f64;
            if !loss.is_finite() {
                return Err(DetectorError::NonFiniteLoss { epoch });
            }
            epoch_loss += loss * b as f64;
            seen += b;

            let scale = 2.0 / (b * d) as f64;
            let err = diff.mapv(|v| v * scale);
            let grad_dec = err.t().dot(&z);
            let grad_dec_b = err.sum_axis(Axis(0));
            let grad_z = err.dot(&model.decoder);
            let grad_enc = grad_z.t().dot(&batch);
            let grad_enc_b = grad_z.sum_axis(Axis(0));

            step += 1;
            opt_dec.step(&mut model.decoder, &grad_dec, hp.learning_rate, step);
            opt_dec_b.step(&mut model.decoder_bias, &grad_dec_b, hp.learning_rate, step);
            opt_enc.step(&mut model.encoder, &grad_enc, hp.learning_rate, step);
            opt_enc_b.step(&mut model.encoder_bias, &grad_enc_b, hp.learning_rate, step);
        }

        let val_loss = model.mse(&val_set);
        if !val_loss.is_finite() {
            return Err(DetectorError::NonFiniteLoss { epoch });
        }
        history.train.push(epoch_loss / seen.max(1) as f64);
        history.validation.push(val_loss);
        if stopper.observe(epoch, val_loss) {
            best = model.clone_params();
        }
        if stopper.should_stop() {
            break;
        }
    }
    history.best_epoch = stopper.best_epoch;

    let params = LinearAeParams {
        window: hp.window,
        encoder: best.0,
        encoder_bias: best.1,
        decoder: best.2,
        decoder_bias: best.3,
    };
    Ok((params, history))
}

impl Model {
    fn clone_params(&self) -> (Array2<f64>, Array1<f64>, Array2<f64>, Array1<f64>) {
        (
            self.encoder.clone(),
            self.encoder_bias.clone(),
            self.decoder.clone(),
            self.decoder_bias.clone(),
        )
    }
}

pub fn score(
    params: &LinearAeParams,
    series: &TimeSeries,
) -> Result<(Vec<Timestamp>, Vec<f64>, usize), DetectorError> {
    let m = series.width();
    let w = params.window;
    let windows = sliding_windows(series, w)?;
    let z = windows.dot(&params.encoder.t()) + &params.encoder_bias;
    let xhat = z.dot(&params.decoder.t()) + &params.decoder_bias;

    let warmup = w - 1;
    let timestamps = series.timestamps()[warmup..].to_vec();
    let scores = windows
        .rows()
        .into_iter()
        .zip(xhat.rows())
        .map(|(orig, rec)| last_element_mae(rec, orig, m))
        .collect();
    Ok((timestamps, scores, warmup))
}
