//! In-process sequential federation: silos are visited one after another,
//! each node starting from the weights the previous node produced.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::data::{PatientMatrix, RowSource};
use crate::gan::{GanConfig, GanError, GanModel, TrainLog};
use crate::rng;
use crate::wire::{WeightsBundle, WireError};

const PARTITION_STREAM: u64 = 0xFFFF_0001;
const NODE_ORDER_STREAM: u64 = 0xFFFF_0002;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FederationError {
    #[error("invalid federation setup: {0}")]
    Config(String),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Splits `total` epochs over `k` nodes: `total / k` each, with the
/// remainder going one apiece to the first nodes. Nodes may receive zero
/// when `total < k`.
pub fn epoch_budget(total: u64, k: usize) -> Result<Vec<u64>, FederationError> {
    if k == 0 {
        return Err(FederationError::Config("epoch budget needs at least one node".to_string()));
    }
    let k64 = k as u64;
    let (base, extra) = (total / k64, total % k64);
    Ok((0..k64).map(|i| base + u64::from(i < extra)).collect())
}

/// Result of splitting one matrix into silos.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub silos: Vec<PatientMatrix>,
    /// Half-open ranges into the shuffled row order, one per silo.
    pub ranges: Vec<(usize, usize)>,
    /// Source row index of every shuffled position.
    pub order: Vec<usize>,
    pub dropped: usize,
}

/// Shuffles rows by `seed` and cuts `k` silos of `rows / k` rows; the
/// remainder is dropped. A single silo keeps the input order.
pub fn partition(data: &PatientMatrix, k: usize, seed: u64) -> Result<Partition, FederationError> {
    partition_with(data, k, seed, false)
}

/// As [`partition`], optionally appending the remainder rows to the last silo.
pub fn partition_with(
    data: &PatientMatrix,
    k: usize,
    seed: u64,
    remainder_to_last: bool,
) -> Result<Partition, FederationError> {
    let n = data.rows();
    if k == 0 || k > n {
        return Err(FederationError::Config(format!("cannot split {n} rows into {k} silos")));
    }
    let order = if k == 1 {
        (0..n).collect()
    } else {
        rng::permutation(&mut rng::stream(seed, PARTITION_STREAM), n)
    };
    let size = n / k;
    let mut ranges: Vec<(usize, usize)> = (0..k).map(|i| (i * size, (i + 1) * size)).collect();
    let mut dropped = n - size * k;
    if remainder_to_last {
        ranges[k - 1].1 = n;
        dropped = 0;
    }
    let silos = ranges.iter().map(|&(s, e)| data.select_rows(&order[s..e])).collect();
    Ok(Partition { silos, ranges, order, dropped })
}

/// Silo layout, epoch budgets and round count of a federated run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FederationPlan {
    pub silo_count: usize,
    /// Ranges into the shuffled source; empty when silos come from
    /// separate files.
    pub silo_row_ranges: Vec<(usize, usize)>,
    /// Total epochs per node across all rounds.
    pub epochs_per_node: Vec<u64>,
    pub rounds: u32,
    pub shuffle_seed: u64,
    pub remainder_to_last: bool,
    /// Visit nodes in a seeded random order each round instead of by index.
    pub shuffle_node_order: bool,
}

impl FederationPlan {
    pub fn new(silo_count: usize, total_epochs: u64, rounds: u32, shuffle_seed: u64) -> Result<Self, FederationError> {
        let plan = Self {
            silo_count,
            silo_row_ranges: Vec::new(),
            epochs_per_node: epoch_budget(total_epochs, silo_count)?,
            rounds,
            shuffle_seed,
            remainder_to_last: false,
            shuffle_node_order: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn total_epochs(&self) -> u64 {
        self.epochs_per_node.iter().sum()
    }

    pub fn validate(&self) -> Result<(), FederationError> {
        let bad = |m: String| Err(FederationError::Config(m));
        if self.silo_count == 0 {
            return bad("silo_count must be at least 1".to_string());
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".to_string());
        }
        if self.epochs_per_node.len() != self.silo_count {
            return bad(format!(
                "{} epoch budgets for {} silos",
                self.epochs_per_node.len(),
                self.silo_count
            ));
        }
        if !self.silo_row_ranges.is_empty() {
            if self.silo_row_ranges.len() != self.silo_count {
                return bad(format!("{} row ranges for {} silos", self.silo_row_ranges.len(), self.silo_count));
            }
            let mut prev_end = 0;
            for &(s, e) in &self.silo_row_ranges {
                if s > e || s < prev_end {
                    return bad(format!("row range {s}..{e} is empty-reversed or overlaps its predecessor"));
                }
                prev_end = e;
            }
        }
        Ok(())
    }

    /// Epochs for every node in `round`.
    pub fn round_budgets(&self, round: u32) -> Vec<u64> {
        self.epochs_per_node
            .iter()
            .map(|&total| {
                let per_round = epoch_budget(total, self.rounds as usize).expect("rounds validated");
                per_round[round as usize]
            })
            .collect()
    }

    /// Order in which nodes are visited in `round`.
    pub fn node_order(&self, round: u32) -> Vec<usize> {
        if self.shuffle_node_order {
            let mut r = rng::stream(self.shuffle_seed ^ u64::from(round), NODE_ORDER_STREAM);
            rng::permutation(&mut r, self.silo_count)
        } else {
            (0..self.silo_count).collect()
        }
    }

    pub fn to_kv(&self) -> String {
        let budgets: Vec<String> = self.epochs_per_node.iter().map(ToString::to_string).collect();
        let mut out = format!(
            "silo_count={}\nepochs_per_node={}\nrounds={}\nshuffle_seed={}\nremainder_to_last={}\nshuffle_node_order={}\n",
            self.silo_count,
            budgets.join(","),
            self.rounds,
            self.shuffle_seed,
            self.remainder_to_last,
            self.shuffle_node_order,
        );
        if !self.silo_row_ranges.is_empty() {
            let ranges: Vec<String> = self.silo_row_ranges.iter().map(|(s, e)| format!("{s}..{e}")).collect();
            out.push_str(&format!("silo_row_ranges={}\n", ranges.join(",")));
        }
        out
    }

    /// Applies one `key=value` setting; `Ok(false)` for foreign keys.
    /// Setting `total_epochs` re-derives `epochs_per_node` from `silo_count`.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<bool, FederationError> {
        let value = value.trim();
        let bad = |what: &str| FederationError::Config(format!("invalid {what} value {value:?}"));
        let parse_bool = |what: &str| match value {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(bad(what)),
        };
        match key.trim() {
            "silo_count" => self.silo_count = value.parse().map_err(|_| bad("silo_count"))?,
            "rounds" => self.rounds = value.parse().map_err(|_| bad("rounds"))?,
            "shuffle_seed" => self.shuffle_seed = value.parse().map_err(|_| bad("shuffle_seed"))?,
            "remainder_to_last" => self.remainder_to_last = parse_bool("remainder_to_last")?,
            "shuffle_node_order" => self.shuffle_node_order = parse_bool("shuffle_node_order")?,
            "total_epochs" => {
                let total: u64 = value.parse().map_err(|_| bad("total_epochs"))?;
                self.epochs_per_node = epoch_budget(total, self.silo_count)?;
            }
            "epochs_per_node" => {
                self.epochs_per_node = value
                    .split(',')
                    .map(|v| v.trim().parse::<u64>().map_err(|_| bad("epochs_per_node")))
                    .collect::<Result<_, _>>()?;
            }
            "silo_row_ranges" => {
                self.silo_row_ranges = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| {
                        let (s, e) = v.trim().split_once("..").ok_or_else(|| bad("silo_row_ranges"))?;
                        Ok((
                            s.parse().map_err(|_| bad("silo_row_ranges"))?,
                            e.parse().map_err(|_| bad("silo_row_ranges"))?,
                        ))
                    })
                    .collect::<Result<_, FederationError>>()?;
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Training log of one node's turn.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeLog {
    pub round: u32,
    pub node: usize,
    pub log: TrainLog,
}

/// Rounds `model`'s weights to 32-bit floats, as they would be after a
/// trip over the wire.
pub fn round_to_f32(model: &mut GanModel) -> Result<WeightsBundle, FederationError> {
    let bundle = WeightsBundle::from_model(model);
    bundle.apply_to(model)?;
    Ok(bundle)
}

/// Global model plus one persistent local model per node. Local models keep
/// their optimizer and sampling state between rounds; only weights are
/// exchanged.
#[derive(Clone, Debug)]
pub struct Federation {
    global: GanModel,
    nodes: Vec<GanModel>,
}

impl Federation {
    pub fn new(config: &GanConfig, silo_count: usize) -> Result<Self, FederationError> {
        if silo_count == 0 {
            return Err(FederationError::Config("need at least one silo".to_string()));
        }
        let nodes = (0..silo_count as u64).map(|i| GanModel::for_node(config, i)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { global: GanModel::new(config)?, nodes })
    }

    pub fn global(&self) -> &GanModel {
        &self.global
    }

    pub fn node(&self, index: usize) -> &GanModel {
        &self.nodes[index]
    }

    pub fn into_global(self) -> GanModel {
        self.global
    }

    /// Visits nodes in index order; see [`Federation::run_round_ordered`].
    pub fn run_round<S: RowSource>(
        &mut self,
        round: u32,
        silos: &[S],
        budgets: &[u64],
    ) -> Result<Vec<NodeLog>, FederationError> {
        let order: Vec<usize> = (0..self.nodes.len()).collect();
        self.run_round_ordered(round, silos, budgets, &order)
    }

    /// For each node in `order`: copy the global weights into the local
    /// model, train on that node's silo for its budget, copy the result back
    /// into the global model. Weights are rounded to `f32` at both copies.
    pub fn run_round_ordered<S: RowSource>(
        &mut self,
        round: u32,
        silos: &[S],
        budgets: &[u64],
        order: &[usize],
    ) -> Result<Vec<NodeLog>, FederationError> {
        let k = self.nodes.len();
        if silos.len() != k || budgets.len() != k {
            return Err(FederationError::Config(format!(
                "{} silos and {} budgets for {} nodes",
                silos.len(),
                budgets.len(),
                k
            )));
        }
        let dim = self.global.config().feature_dim;
        if let Some(i) = silos.iter().position(|s| s.n_cols() != dim) {
            return Err(FederationError::Config(format!(
                "silo {i} has {} features, model expects {dim}",
                silos[i].n_cols()
            )));
        }
        let mut logs = Vec::with_capacity(k);
        for &node in order {
            let local = &mut self.nodes[node];
            WeightsBundle::from_model(&self.global).apply_to(local)?;
            let log = local.train(&silos[node], budgets[node])?;
            round_to_f32(local)?.apply_to(&mut self.global)?;
            logs.push(NodeLog { round, node, log });
        }
        Ok(logs)
    }

    /// Runs every round of `plan`.
    pub fn run_plan<S: RowSource>(&mut self, plan: &FederationPlan, silos: &[S]) -> Result<Vec<NodeLog>, FederationError> {
        plan.validate()?;
        if plan.silo_count != self.nodes.len() {
            return Err(FederationError::Config(format!(
                "plan has {} silos, federation has {} nodes",
                plan.silo_count,
                self.nodes.len()
            )));
        }
        let mut logs = Vec::new();
        for round in 0..plan.rounds {
            let budgets = plan.round_budgets(round);
            logs.extend(self.run_round_ordered(round, silos, &budgets, &plan.node_order(round))?);
        }
        Ok(logs)
    }
}

/// Outcome of [`run_federation`].
#[derive(Clone, Debug)]
pub struct FederationRun {
    pub model: GanModel,
    pub logs: Vec<NodeLog>,
    pub plan: FederationPlan,
    pub dropped_rows: usize,
}

/// Partitions `data` into `k` silos and trains over `rounds` rounds with
/// `total_epochs` split across nodes. The shuffle seed is the config seed.
pub fn run_federation(
    config: &GanConfig,
    data: &PatientMatrix,
    k: usize,
    rounds: u32,
    total_epochs: u64,
) -> Result<FederationRun, FederationError> {
    let mut plan = FederationPlan::new(k, total_epochs, rounds, config.seed)?;
    let parts = partition(data, k, plan.shuffle_seed)?;
    plan.silo_row_ranges = parts.ranges.clone();
    run_partitioned(config, &parts.silos, &plan).map(|(model, logs)| FederationRun {
        model,
        logs,
        plan,
        dropped_rows: parts.dropped,
    })
}

/// Trains a fresh federation over prepared silos.
pub fn run_partitioned<S: RowSource>(
    config: &GanConfig,
    silos: &[S],
    plan: &FederationPlan,
) -> Result<(GanModel, Vec<NodeLog>), FederationError> {
    let mut fed = Federation::new(config, plan.silo_count)?;
    let logs = fed.run_plan(plan, silos)?;
    Ok((fed.into_global(), logs))
}
