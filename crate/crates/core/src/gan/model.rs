use alloc::format;
use alloc::vec::Vec;

use super::penalty::gradient_penalty;
use super::{GanConfig, GanError, LossKind, StepRecord, TrainLog};
use crate::data::{binarize, encode_rows_pm1, PatientMatrix, RowSource};
use crate::linalg::Matrix;
use crate::nn::{Activation, AdamState, LayerSpec, Network};
use crate::rng::{self, StreamRng};

/// Sigmoid outputs are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const LOSS_CLAMP: f64 = 1e-7;
const GENERATE_CHUNK: usize = 4096;
const PROGRESS_EVERY: u64 = 500;

/// Milliseconds from an arbitrary fixed origin.
pub type Clock = fn() -> u64;

/// Generator, discriminator, their optimizers, and the random stream that
/// drives noise and minibatch order.
#[derive(Clone, Debug)]
pub struct GanModel {
    config: GanConfig,
    generator: Network,
    discriminator: Network,
    g_opt: AdamState,
    d_opt: AdamState,
    rng: StreamRng,
    sampler: Option<Sampler>,
    iteration: u64,
    clock: Option<Clock>,
}

#[derive(Clone, Debug)]
struct Sampler {
    order: Vec<usize>,
    cursor: usize,
}

/// Outcome of one discriminator (critic) update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DStep {
    pub loss: f64,
    /// Gradient-penalty term, present for WGAN-GP critics.
    pub penalty: Option<f64>,
}

pub fn generator_specs(config: &GanConfig) -> Vec<LayerSpec> {
    chain(config.noise_dim, &config.g_hidden, config.feature_dim, Activation::Tanh)
}

pub fn discriminator_specs(config: &GanConfig) -> Vec<LayerSpec> {
    let head = match config.loss_kind {
        LossKind::Vanilla => Activation::Sigmoid,
        LossKind::WganGp => Activation::Identity,
    };
    chain(config.feature_dim, &config.d_hidden, 1, head)
}

fn chain(input: usize, hidden: &[usize], output: usize, head: Activation) -> Vec<LayerSpec> {
    let mut specs = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input;
    for &h in hidden {
        specs.push(LayerSpec::new(prev, h, Activation::LeakyRelu));
        prev = h;
    }
    specs.push(LayerSpec::new(prev, output, head));
    specs
}

/// Builds the pair for single-source training (training stream of node 0).
pub fn build_gan(config: &GanConfig) -> Result<GanModel, GanError> {
    GanModel::for_node(config, 0)
}

impl GanModel {
    pub fn new(config: &GanConfig) -> Result<Self, GanError> {
        Self::for_node(config, 0)
    }

    /// Same initial weights as [`build_gan`], but minibatch order and noise
    /// come from training stream `node`.
    pub fn for_node(config: &GanConfig, node: u64) -> Result<Self, GanError> {
        config.validate()?;
        let mut init = rng::stream(config.seed, rng::INIT_STREAM);
        let generator = Network::init_with_rng(&generator_specs(config), config.seed, &mut init)?;
        let discriminator = Network::init_with_rng(&discriminator_specs(config), config.seed, &mut init)?;
        Ok(Self {
            g_opt: AdamState::new(&generator, config.learning_rate),
            d_opt: AdamState::new(&discriminator, config.learning_rate),
            generator,
            discriminator,
            rng: rng::stream(config.seed, rng::TRAIN_STREAM_BASE + node),
            sampler: None,
            iteration: 0,
            clock: None,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    pub fn generator(&self) -> &Network {
        &self.generator
    }

    pub fn discriminator(&self) -> &Network {
        &self.discriminator
    }

    pub fn generator_mut(&mut self) -> &mut Network {
        &mut self.generator
    }

    pub fn discriminator_mut(&mut self) -> &mut Network {
        &mut self.discriminator
    }

    pub fn g_optimizer(&self) -> &AdamState {
        &self.g_opt
    }

    pub fn d_optimizer(&self) -> &AdamState {
        &self.d_opt
    }

    /// Overrides the step size of both optimizers, leaving the configured
    /// rate (and the config digest) unchanged.
    pub fn set_learning_rate(&mut self, learning_rate: f64) {
        self.g_opt.learning_rate = learning_rate;
        self.d_opt.learning_rate = learning_rate;
    }

    /// Completed training iterations over the model's lifetime.
    pub fn iterations(&self) -> u64 {
        self.iteration
    }

    /// Source of wall-clock timestamps for training logs.
    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = Some(clock);
    }

    /// True when both networks hold exactly the same parameters.
    pub fn same_weights(&self, other: &GanModel) -> bool {
        self.generator == other.generator && self.discriminator == other.discriminator
    }

    fn noise(&mut self, rows: usize) -> Matrix {
        rng::gaussian_matrix(&mut self.rng, rows, self.config.noise_dim)
    }

    /// One discriminator update against a fresh fake batch of the same size.
    /// `real_batch` must already be ±1 encoded.
    pub fn d_train_step(&mut self, real_batch: &Matrix) -> Result<DStep, GanError> {
        if real_batch.cols() != self.config.feature_dim {
            return Err(GanError::Shape { expected: self.config.feature_dim, found: real_batch.cols() });
        }
        if real_batch.rows() == 0 {
            return Err(GanError::Usage("real batch is empty"));
        }
        let step = self.iteration;
        let rows = real_batch.rows();
        let z = self.noise(rows);
        let fake = self.generator.predict(&z)?;
        let both = real_batch.vstack(&fake);
        let cache = self.discriminator.forward_cached(&both)?;
        let out = cache.output();
        let b = rows as f64;
        let mut grad = Matrix::zeros(2 * rows, 1);
        let (loss, penalty) = match self.config.loss_kind {
            LossKind::Vanilla => {
                let mut loss = 0.0;
                for r in 0..2 * rows {
                    let d = out.get(r, 0);
                    let dc = d.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
                    if r < rows {
                        loss -= libm::log(dc);
                        grad.set(r, 0, (d - 1.0) / b);
                    } else {
                        loss -= libm::log(1.0 - dc);
                        grad.set(r, 0, d / b);
                    }
                }
                (loss / b, None)
            }
            LossKind::WganGp => {
                let mut loss = 0.0;
                for r in 0..2 * rows {
                    let c = out.get(r, 0);
                    if r < rows {
                        loss -= c;
                        grad.set(r, 0, -1.0 / b);
                    } else {
                        loss += c;
                        grad.set(r, 0, 1.0 / b);
                    }
                }
                (loss / b, Some(()))
            }
        };
        let (mut grads, _) = self.discriminator.backward_from_logits(&cache, &grad)?;
        let (loss, penalty) = match penalty {
            Some(()) => {
                let gp =
                    gradient_penalty(&self.discriminator, real_batch, &fake, self.config.gp_lambda, &mut self.rng)?;
                grads.add_scaled(&gp.grads, 1.0);
                (loss + gp.value, Some(gp.value))
            }
            None => (loss, None),
        };
        if !loss.is_finite() {
            return Err(GanError::NonFiniteLoss { step });
        }
        self.d_opt.step(&mut self.discriminator, &grads).map_err(|source| GanError::Numerical { step, source })?;
        Ok(DStep { loss, penalty })
    }

    /// One generator update: non-saturating `-mean log D(G(z))` for the
    /// vanilla pair, `-mean C(G(z))` for a Wasserstein critic.
    pub fn g_train_step(&mut self) -> Result<f64, GanError> {
        let step = self.iteration;
        let rows = self.config.batch_size;
        let z = self.noise(rows);
        let g_cache = self.generator.forward_cached(&z)?;
        let d_cache = self.discriminator.forward_cached(g_cache.output())?;
        let out = d_cache.output();
        let b = rows as f64;
        let mut grad = Matrix::zeros(rows, 1);
        let mut loss = 0.0;
        for r in 0..rows {
            let d = out.get(r, 0);
            match self.config.loss_kind {
                LossKind::Vanilla => {
                    loss -= libm::log(d.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP));
                    grad.set(r, 0, (d - 1.0) / b);
                }
                LossKind::WganGp => {
                    loss -= d;
                    grad.set(r, 0, -1.0 / b);
                }
            }
        }
        let loss = loss / b;
        if !loss.is_finite() {
            return Err(GanError::NonFiniteLoss { step });
        }
        let fake_grad = self.discriminator.input_gradient_from_logits(&d_cache, &grad)?;
        let (grads, _) = self.generator.backward(&g_cache, &fake_grad)?;
        self.g_opt.step(&mut self.generator, &grads).map_err(|source| GanError::Numerical { step, source })?;
        Ok(loss)
    }

    fn next_batch<S: RowSource + ?Sized>(&mut self, data: &S, batch: usize) -> Matrix {
        let n = data.n_rows();
        let stale = !matches!(&self.sampler, Some(s) if s.order.len() == n);
        if stale {
            self.sampler = Some(Sampler { order: rng::permutation(&mut self.rng, n), cursor: 0 });
        }
        let sampler = self.sampler.as_mut().expect("set above");
        if sampler.cursor + batch > n {
            sampler.order = rng::permutation(&mut self.rng, n);
            sampler.cursor = 0;
        }
        let idx = &sampler.order[sampler.cursor..sampler.cursor + batch];
        sampler.cursor += batch;
        encode_rows_pm1(data, idx)
    }

    /// Runs `epochs` iterations of `d_steps_per_g_step` discriminator
    /// updates (each on a fresh real minibatch) followed by one generator
    /// update. Works for both loss kinds.
    pub fn train<S: RowSource + ?Sized>(&mut self, data: &S, epochs: u64) -> Result<TrainLog, GanError> {
        let mut log = TrainLog::default();
        if epochs == 0 {
            return Ok(log);
        }
        if data.n_rows() == 0 {
            return Err(GanError::EmptyData);
        }
        if data.n_cols() != self.config.feature_dim {
            return Err(GanError::Shape { expected: self.config.feature_dim, found: data.n_cols() });
        }
        let mut batch = self.config.batch_size;
        if batch > data.n_rows() {
            log.warnings.push(format!("batch size {} exceeds {} training rows; clamped", batch, data.n_rows()));
            log::warn!("batch size {} exceeds {} training rows; clamped", batch, data.n_rows());
            batch = data.n_rows();
        }
        // The generator step draws its own batch_size noise rows, so keep
        // both halves of the game on the clamped size.
        let configured = self.config.batch_size;
        self.config.batch_size = batch;
        let result = self.run_iterations(data, epochs, batch, &mut log);
        self.config.batch_size = configured;
        result?;
        Ok(log)
    }

    fn run_iterations<S: RowSource + ?Sized>(
        &mut self,
        data: &S,
        epochs: u64,
        batch: usize,
        log: &mut TrainLog,
    ) -> Result<(), GanError> {
        let start = self.clock.map(|c| c());
        for _ in 0..epochs {
            let mut d_loss = 0.0;
            let mut gp_sum = 0.0;
            let mut has_gp = false;
            for _ in 0..self.config.d_steps_per_g_step {
                let real = self.next_batch(data, batch);
                let d = self.d_train_step(&real)?;
                d_loss += d.loss;
                log.d_updates += 1;
                if let Some(p) = d.penalty {
                    gp_sum += p;
                    has_gp = true;
                    log.penalties.push(p);
                }
            }
            let g_loss = self.g_train_step()?;
            log.g_updates += 1;
            let k = self.config.d_steps_per_g_step as f64;
            let elapsed_ms = match (self.clock, start) {
                (Some(c), Some(s)) => c().saturating_sub(s),
                _ => 0,
            };
            let record = StepRecord {
                step: self.iteration,
                d_loss: d_loss / k,
                g_loss,
                gp: has_gp.then(|| gp_sum / k),
                elapsed_ms,
            };
            if self.iteration % PROGRESS_EVERY == 0 {
                log::info!("iteration {}: d_loss {:.4} g_loss {:.4}", record.step, record.d_loss, record.g_loss);
            }
            log.records.push(record);
            self.iteration += 1;
        }
        Ok(())
    }

    /// Wasserstein training; the model must have been built with
    /// [`LossKind::WganGp`].
    pub fn wgan_train<S: RowSource + ?Sized>(&mut self, data: &S, epochs: u64) -> Result<TrainLog, GanError> {
        if self.config.loss_kind != LossKind::WganGp {
            return Err(GanError::Usage("wgan_train requires a model built with the wgan_gp loss"));
        }
        self.train(data, epochs)
    }

    /// Raw generator outputs in (-1, 1) for `n` noise draws from `seed`.
    pub fn generate_raw(&self, n: usize, seed: u64) -> Result<Matrix, GanError> {
        let mut rng = rng::stream(seed, rng::GENERATE_STREAM);
        let mut data = Vec::with_capacity(n * self.config.feature_dim);
        let mut done = 0;
        while done < n {
            let rows = GENERATE_CHUNK.min(n - done);
            let z = rng::gaussian_matrix(&mut rng, rows, self.config.noise_dim);
            data.extend_from_slice(self.generator.predict(&z)?.as_slice());
            done += rows;
        }
        Ok(Matrix::from_vec(n, self.config.feature_dim, data))
    }

    /// `n` synthetic patients: generator outputs binarized at 0.
    pub fn generate(&self, n: usize, seed: u64) -> Result<PatientMatrix, GanError> {
        Ok(binarize(&self.generate_raw(n, seed)?, 0.0))
    }
}
