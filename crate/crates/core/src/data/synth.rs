//! Latent-factor Bernoulli generator for synthetic diagnosis matrices.
//!
//! Patients draw a mixture over latent "conditions"; each condition raises
//! the log-odds of a sparse set of diagnoses. Silos share the condition
//! structure but may drift apart feature by feature, which mimics hospitals
//! with similar but not identical case mix.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::codes::COMMON_ICU_CODES;
use super::{DataError, PatientMatrix};
use crate::nn::sigmoid;
use crate::rng;

/// Calibration considers at most this many patients.
const CALIBRATION_ROWS: usize = 2_000;
const CALIBRATION_ITERS: usize = 200;
const MIXTURE_SHARPNESS: f64 = 2.0;
const BASE_SPREAD: f64 = 1.5;
const LOADING_STRENGTH: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SourceParams {
    pub n_patients: usize,
    pub n_features: usize,
    /// Number of latent conditions.
    pub n_latent: usize,
    /// Target fraction of ones in the matrix.
    pub sparsity_target: f64,
    /// Per-silo log-odds drift scale.
    pub silo_shift: f64,
    pub seed: u64,
}

impl SourceParams {
    pub fn new(n_patients: usize, n_features: usize, sparsity_target: f64, seed: u64) -> Self {
        Self { n_patients, n_features, n_latent: 12, sparsity_target, silo_shift: 0.0, seed }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_patients == 0 || self.n_features == 0 || self.n_latent == 0 {
            return Err(DataError::Config("patients, features and latent count must be positive".to_string()));
        }
        if !(self.sparsity_target > 0.0 && self.sparsity_target < 1.0) {
            return Err(DataError::Config(format!("sparsity target {} is outside (0, 1)", self.sparsity_target)));
        }
        if !(self.silo_shift >= 0.0 && self.silo_shift.is_finite()) {
            return Err(DataError::Config(format!("silo shift {} must be finite and non-negative", self.silo_shift)));
        }
        Ok(())
    }
}

/// Feature codes for a synthetic matrix: real ICU codes first, then
/// placeholder codes `X0000`, `X0001`, ...
pub fn synthetic_labels(n_features: usize) -> Vec<String> {
    (0..n_features)
        .map(|j| match COMMON_ICU_CODES.get(j) {
            Some((code, _)) => code.to_string(),
            None => format!("X{:04}", j),
        })
        .collect()
}

struct Structure {
    base: Vec<f64>,
    /// `n_latent x n_features`, row-major.
    loadings: Vec<f64>,
    drift: Vec<f64>,
}

fn structure(params: &SourceParams) -> Structure {
    let mut rng = rng::stream(params.seed, 0);
    let f = params.n_features;
    let base = (0..f).map(|_| BASE_SPREAD * rng.sample::<f64, _>(StandardNormal)).collect();
    let member_prob = (1.5 / params.n_latent as f64).min(1.0);
    let loadings = (0..params.n_latent * f)
        .map(|_| if rng.random::<f64>() < member_prob { LOADING_STRENGTH * rng.random_range(0.5..1.0) } else { 0.0 })
        .collect();
    let drift = (0..f).map(|_| rng.sample(StandardNormal)).collect();
    Structure { base, loadings, drift }
}

/// Generates the patient matrix for silo `silo_index`.
pub fn synth_source(params: &SourceParams, silo_index: u32) -> Result<PatientMatrix, DataError> {
    params.validate()?;
    let s = structure(params);
    let (n, f, k) = (params.n_patients, params.n_features, params.n_latent);
    let mut rng = rng::stream(params.seed, 1 + u64::from(silo_index));
    let shift = f64::from(silo_index) * params.silo_shift;

    let mut logits = Vec::with_capacity(n * f);
    let mut mix = alloc::vec![0.0; k];
    for _ in 0..n {
        for m in mix.iter_mut() {
            *m = MIXTURE_SHARPNESS * rng.sample::<f64, _>(StandardNormal);
        }
        let max = mix.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for m in mix.iter_mut() {
            *m = libm::exp(*m - max);
            total += *m;
        }
        for j in 0..f {
            let mut z = s.base[j] + shift * s.drift[j];
            for (t, m) in mix.iter().enumerate() {
                z += (m / total) * s.loadings[t * f + j];
            }
            logits.push(z);
        }
    }

    let offset = calibrate(&logits[..n.min(CALIBRATION_ROWS) * f], params.sparsity_target)?;
    let bits = logits.iter().map(|z| u8::from(rng.random::<f64>() < sigmoid(z + offset))).collect();
    PatientMatrix::new(n, f, bits)?.with_labels(synthetic_labels(f))
}

/// Finds the log-odds offset that brings the mean probability to `target`.
fn calibrate(logits: &[f64], target: f64) -> Result<f64, DataError> {
    let mean_at = |c: f64| logits.iter().map(|z| sigmoid(z + c)).sum::<f64>() / logits.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..CALIBRATION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let achieved = mean_at(c);
    if (achieved - target).abs() > 1e-3 * target {
        return Err(DataError::Calibration { target, achieved });
    }
    Ok(c)
}
