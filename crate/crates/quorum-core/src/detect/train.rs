//! Mini-batch training loop pieces: Adam updates and early stopping.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Per-epoch training and validation loss, plus the checkpointed epoch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    /// Epoch whose parameters were kept (index into the vectors).
    pub best_epoch: usize,
}

impl LossHistory {
    pub fn empty() -> Self {
        LossHistory::default()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty() && self.validation.is_empty()
    }
}

/// Adam state for one parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam2 {
    m: Array2<f64>,
    v: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct Adam1 {
    m: Array1<f64>,
    v: Array1<f64>,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl Adam2 {
    pub fn new(shape: (usize, usize)) -> Self {
        Adam2 {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
        }
    }

    pub fn step(&mut self, param: &mut Array2<f64>, grad: &Array2<f64>, lr: f64, t: u64) {
        let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
        for ((p, g), (m, v)) in param
            .iter_mut()
            .zip(grad.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

impl Adam1 {
    pub fn new(len: usize) -> Self {
        Adam1 {
            m: Array1::zeros(len),
            v: Array1::zeros(len),
        }
    }

    pub fn step(&mut self, param: &mut Array1<f64>, grad: &Array1<f64>, lr: f64, t: u64) {
        let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
        for ((p, g), (m, v)) in param
            .iter_mut()
            .zip(grad.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

/// Stops after `patience` consecutive epochs without validation improvement.
#[derive(Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    pub best_epoch: usize,
    wait: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Records one epoch's validation loss; returns true when this epoch is
    /// the new best (caller should checkpoint).
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.wait = 0;
            true
        } else {
            self.wait += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.wait >= self.patience
    }
}
