//! Dense linear algebra and the training machinery shared by every model:
//! parameter sets, Glorot initialization, dropout, Adam with coupled weight
//! decay, early stopping, and finite-difference gradient checks.

mod adam;
mod dropout;
mod early_stop;
mod gradcheck;
mod input;
mod matrix;
mod params;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use dropout::dropout_forward;
pub use early_stop::{EarlyStopping, StopDecision};
pub use gradcheck::{gradcheck, relative_error, GradcheckOptions, GradcheckReport};
pub use input::{InputMatrix, SPARSE_DENSITY_THRESHOLD};
pub use matrix::{argmax, log_softmax_at, softmax_in_place, softmax_rows, DenseMatrix};
pub use params::{glorot_init, ParameterSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization settings for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// `None` trains for exactly `max_epochs` and keeps the final parameters.
    pub patience: Option<usize>,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            max_epochs: 200,
            patience: Some(10),
            dropout: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        Ok(())
    }
}
