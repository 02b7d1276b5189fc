use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use super::GanError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Sigmoid discriminator with binary cross-entropy.
    Vanilla,
    /// Unbounded critic with Wasserstein loss and gradient penalty.
    WganGp,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Vanilla => "vanilla",
            LossKind::WganGp => "wgan_gp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "vanilla" => Some(LossKind::Vanilla),
            "wgan_gp" | "wgan-gp" => Some(LossKind::WganGp),
            _ => None,
        }
    }
}

/// Hyperparameters and architecture of a generator/discriminator pair.
#[derive(Clone, Debug, PartialEq)]
pub struct GanConfig {
    pub feature_dim: usize,
    pub noise_dim: usize,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub d_steps_per_g_step: usize,
    pub loss_kind: LossKind,
    pub gp_lambda: f64,
    pub seed: u64,
}

/// SHA-256 of the canonical config text.
pub type ConfigDigest = [u8; 32];

impl GanConfig {
    /// The published setup: 128-d noise, hidden widths 128/256/512 for the
    /// generator and 512/256/128 for the discriminator, Adam at 2e-4,
    /// batch 1500, two discriminator updates per generator update.
    pub fn paper(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            noise_dim: 128,
            g_hidden: alloc::vec![128, 256, 512],
            d_hidden: alloc::vec![512, 256, 128],
            learning_rate: 0.0002,
            batch_size: 1500,
            d_steps_per_g_step: 2,
            loss_kind: LossKind::Vanilla,
            gp_lambda: 10.0,
            seed: 0,
        }
    }

    /// Narrower networks and smaller batches that train in minutes on a
    /// single CPU core. Same depth, activations and update schedule as
    /// [`GanConfig::paper`].
    pub fn desk(feature_dim: usize) -> Self {
        Self {
            noise_dim: 128,
            g_hidden: alloc::vec![64, 128, 128],
            d_hidden: alloc::vec![128, 64, 32],
            learning_rate: 0.0001,
            batch_size: 256,
            ..Self::paper(feature_dim)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_loss(mut self, loss_kind: LossKind) -> Self {
        self.loss_kind = loss_kind;
        self
    }

    pub fn validate(&self) -> Result<(), GanError> {
        let bad = |msg: String| Err(GanError::Config(msg));
        if self.feature_dim == 0 || self.noise_dim == 0 {
            return bad("feature_dim and noise_dim must be positive".to_string());
        }
        if self.g_hidden.iter().chain(&self.d_hidden).any(|d| *d == 0) {
            return bad("hidden widths must be positive".to_string());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".to_string());
        }
        if self.d_steps_per_g_step == 0 {
            return bad("d_steps_per_g_step must be at least 1".to_string());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be finite and non-negative", self.learning_rate));
        }
        if !(self.gp_lambda >= 0.0 && self.gp_lambda.is_finite()) {
            return bad(format!("gp_lambda {} must be finite and non-negative", self.gp_lambda));
        }
        Ok(())
    }

    /// Canonical `key=value` rendering, one key per line in fixed order.
    pub fn to_kv(&self) -> String {
        let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        format!(
            "feature_dim={}\nnoise_dim={}\ng_hidden={}\nd_hidden={}\nlearning_rate={}\nbatch_size={}\n\
             d_steps_per_g_step={}\nloss={}\ngp_lambda={}\nseed={}\n",
            self.feature_dim,
            self.noise_dim,
            join(&self.g_hidden),
            join(&self.d_hidden),
            self.learning_rate,
            self.batch_size,
            self.d_steps_per_g_step,
            self.loss_kind.name(),
            self.gp_lambda,
            self.seed,
        )
    }

    /// Applies one `key=value` setting. Returns `Ok(false)` for keys that
    /// are not GAN settings so callers can handle their own keys.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<bool, GanError> {
        let value = value.trim();
        let bad = |what: &str| GanError::Config(format!("invalid {what} value {value:?}"));
        let parse_usize = |what: &str| value.parse::<usize>().map_err(|_| bad(what));
        let parse_f64 = |what: &str| value.parse::<f64>().map_err(|_| bad(what));
        let parse_dims = |what: &str| -> Result<Vec<usize>, GanError> {
            if value.is_empty() {
                return Ok(Vec::new());
            }
            value.split(',').map(|v| v.trim().parse::<usize>().map_err(|_| bad(what))).collect()
        };
        match key.trim() {
            "feature_dim" => self.feature_dim = parse_usize("feature_dim")?,
            "noise_dim" => self.noise_dim = parse_usize("noise_dim")?,
            "g_hidden" => self.g_hidden = parse_dims("g_hidden")?,
            "d_hidden" => self.d_hidden = parse_dims("d_hidden")?,
            "learning_rate" => self.learning_rate = parse_f64("learning_rate")?,
            "batch_size" => self.batch_size = parse_usize("batch_size")?,
            "d_steps_per_g_step" => self.d_steps_per_g_step = parse_usize("d_steps_per_g_step")?,
            "loss" => self.loss_kind = LossKind::from_name(value).ok_or_else(|| bad("loss"))?,
            "gp_lambda" => self.gp_lambda = parse_f64("gp_lambda")?,
            "seed" => self.seed = value.parse::<u64>().map_err(|_| bad("seed"))?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Parses text produced by [`GanConfig::to_kv`] on top of `base`.
    /// Blank lines and `#` comments are skipped; unknown keys are errors.
    pub fn from_kv(base: GanConfig, text: &str) -> Result<Self, GanError> {
        let mut cfg = base;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GanError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            if !cfg.apply_kv(k, v)? {
                return Err(GanError::Config(format!("line {}: unknown key {:?}", lineno + 1, k.trim())));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn digest(&self) -> ConfigDigest {
        Sha256::digest(self.to_kv().as_bytes()).into()
    }
}
