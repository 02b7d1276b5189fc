//! `key=value` files holding a GAN configuration and a federation plan.
//!
//! Any [`GanConfig`] or [`FederationPlan`] key may appear, plus
//! `total_epochs`, which is split across `silo_count` nodes after all other
//! keys are read. `shuffle_seed` defaults to the GAN seed.

use fedtabgan_core::federation::{epoch_budget, FederationError, FederationPlan};
use fedtabgan_core::gan::{GanConfig, GanError};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Federation(#[from] FederationError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanFile {
    pub gan: GanConfig,
    pub federation: FederationPlan,
}

impl PlanFile {
    pub fn render(&self) -> String {
        let mut out = self.gan.to_kv();
        out.push_str(&self.federation.to_kv());
        out
    }
}

/// Parses `text` on top of `gan`. The federation part starts as a single
/// silo with one round and no epochs.
pub fn parse_plan(text: &str, gan: GanConfig) -> Result<PlanFile, PlanError> {
    let mut gan = gan;
    let mut fed = FederationPlan::new(1, 0, 1, 0)?;
    let mut total = None;
    let mut shuffle_seed_set = false;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |message: String| PlanError::Syntax { line: i + 1, message };
        let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected key=value".into()))?;
        let key = key.trim();
        if key == "total_epochs" {
            total = Some(value.trim().parse::<u64>().map_err(|_| syntax(format!("invalid total_epochs {value:?}")))?);
            continue;
        }
        if gan.apply_kv(key, value).map_err(|e| syntax(e.to_string()))? {
            continue;
        }
        if fed.apply_kv(key, value).map_err(|e| syntax(e.to_string()))? {
            shuffle_seed_set |= key == "shuffle_seed";
            continue;
        }
        return Err(syntax(format!("unknown key {key:?}")));
    }
    if let Some(total) = total {
        fed.epochs_per_node = epoch_budget(total, fed.silo_count)?;
    } else if fed.epochs_per_node.len() != fed.silo_count && fed.total_epochs() == 0 {
        fed.epochs_per_node = vec![0; fed.silo_count];
    }
    if !shuffle_seed_set {
        fed.shuffle_seed = gan.seed;
    }
    gan.validate()?;
    fed.validate()?;
    Ok(PlanFile { gan, federation: fed })
}
