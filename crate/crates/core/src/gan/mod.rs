//! Generator/discriminator construction, the alternating training loop,
//! sample generation, and the WGAN-GP critic variant.

mod config;
mod model;
mod penalty;

use alloc::string::String;
use alloc::vec::Vec;

pub use config::{ConfigDigest, GanConfig, LossKind};
pub use model::{build_gan, discriminator_specs, generator_specs, Clock, DStep, GanModel, LOSS_CLAMP};
pub use penalty::{gradient_penalty, penalty_at, Penalty};

use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GanError {
    #[error("invalid GAN configuration: {0}")]
    Config(String),
    #[error("expected {expected} features, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("training data is empty")]
    EmptyData,
    #[error("{0}")]
    Usage(&'static str),
    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: u64 },
    #[error("numerical failure at step {step}: {source}")]
    Numerical { step: u64, source: NnError },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// One training iteration: the mean discriminator loss over its updates and
/// the generator loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub d_loss: f64,
    pub g_loss: f64,
    /// Mean gradient penalty over the iteration's critic updates.
    pub gp: Option<f64>,
    pub elapsed_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
    pub d_updates: u64,
    pub g_updates: u64,
    /// Penalty of every critic update, in order (empty for vanilla).
    pub penalties: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
