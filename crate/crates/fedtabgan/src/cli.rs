//! The `fedtabgan` command line.
//!
//! Exit codes: 0 success, 1 runtime or network failure, 2 invalid usage,
//! input or configuration.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use fedtabgan_core::data::{synth_source, CodeDictionary, DataError, PatientMatrix, SourceParams};
use fedtabgan_core::eval::{self, make_survey_pack, tabulate_survey, EvalError, DEFAULT_PREAMBLE};
use fedtabgan_core::federation::{partition_with, run_partitioned, FederationError, FederationPlan};
use fedtabgan_core::gan::{GanConfig, GanError, GanModel, LossKind};

use crate::io::{self, IoError};
use crate::model_file::{self, ModelFileError};
use crate::net::{self, Coordinator, NetError, WorkerOptions};
use crate::plan_file::{parse_plan, PlanError};

pub const SEED_ENV: &str = "FEDTABGAN_SEED";

#[derive(Debug, Parser)]
#[command(name = "fedtabgan", version, about = "Federated GAN training and evaluation for binary patient data")]
pub struct Cli {
    /// More log output (repeat for trace level).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic patient matrices, one CSV per silo.
    Synth(SynthArgs),
    /// Train on one data file, or federate over several silos.
    Train(TrainArgs),
    /// Coordinate a networked federated session.
    Serve(ServeArgs),
    /// Join a networked session and train on local data.
    Worker(WorkerArgs),
    /// Sample synthetic patients from a trained model.
    Generate(GenerateArgs),
    /// Compare a synthetic cohort against real data.
    Eval(EvalArgs),
    /// Build a blinded plausibility survey.
    Survey(SurveyArgs),
    /// Count survey ratings per origin and category.
    SurveyTabulate(TabulateArgs),
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Preset {
    /// Published architecture and hyperparameters.
    Paper,
    /// Smaller networks for quick runs on one CPU core.
    Desk,
}

impl Preset {
    fn config(self, feature_dim: usize) -> GanConfig {
        match self {
            Preset::Paper => GanConfig::paper(feature_dim),
            Preset::Desk => GanConfig::desk(feature_dim),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 46_520)]
    pub patients: usize,
    #[arg(long, default_value_t = 1_071)]
    pub features: usize,
    #[arg(long, default_value_t = 1)]
    pub silos: u32,
    /// Target mean fraction of ones.
    #[arg(long, default_value_t = 0.01)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 0.0)]
    pub silo_shift: f64,
    #[arg(long, default_value_t = 12)]
    pub latent: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV; repeat for one silo per file.
    #[arg(long, required = true)]
    pub data: Vec<PathBuf>,
    /// Split a single data file into this many silos.
    #[arg(long, default_value_t = 1)]
    pub silos: usize,
    /// Total iterations across all nodes and rounds.
    #[arg(long, default_value_t = 20_000)]
    pub epochs: u64,
    #[arg(long, default_value_t = 1)]
    pub rounds: u32,
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<LossKind>,
    #[arg(long, value_enum, default_value_t = Preset::Paper)]
    pub preset: Preset,
    /// key=value GAN settings applied on top of the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_model: PathBuf,
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Training-log CSV. Federated runs write one file per round and node,
    /// named after this path.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Keep the rows left over by an uneven split in the last silo.
    #[arg(long)]
    pub remainder_to_last: bool,
    /// Visit nodes in a seeded random order each round.
    #[arg(long)]
    pub shuffle_node_order: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: String,
    /// key=value file with the GAN configuration and federation plan.
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    #[arg(long)]
    pub connect: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub node_id: u32,
    /// Same plan file as the coordinator. Without it the preset is used.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Paper)]
    pub preset: Preset,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 600)]
    pub timeout_secs: u64,
    /// Training-log CSV prefix, one file per round.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Expected configuration; generation stops if the model differs.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generate even when the model's configuration digest differs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub synth: PathBuf,
    /// Report destination; standard output when absent.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// Feature-probability CSV `feature,real_prob,synth_prob`.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
    /// Separate CSV for the distance histogram.
    #[arg(long)]
    pub hist: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub hist_bins: usize,
    #[arg(long, default_value_t = eval::DEFAULT_DISTANCE_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct SurveyArgs {
    #[arg(long)]
    pub real: PathBuf,
    /// Single-source cohort, then federated cohort.
    #[arg(long, num_args = 1.., required = true)]
    pub synth: Vec<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// `code,description` CSV; a built-in list of common ICU codes otherwise.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_pack: PathBuf,
    #[arg(long)]
    pub out_key: PathBuf,
    /// Text file replacing the default instructions.
    #[arg(long)]
    pub preamble: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TabulateArgs {
    /// `id,category` CSV, one per rater.
    #[arg(long, required = true)]
    pub responses: Vec<PathBuf>,
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    LossKind::from_name(s).ok_or_else(|| format!("unknown loss {s:?}; expected vanilla or wgan_gp"))
}

/// A failed command: message for standard error and the exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self { code: if e.is_validation() { 2 } else { 1 }, message: e.to_string() }
    }
}

impl From<ModelFileError> for CliError {
    fn from(e: ModelFileError) -> Self {
        match e {
            ModelFileError::Io { .. } => Self::runtime(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

impl From<GanError> for CliError {
    fn from(e: GanError) -> Self {
        match e {
            GanError::Config(_) | GanError::Shape { .. } | GanError::EmptyData => Self::usage(e.to_string()),
            _ => Self::runtime(e.to_string()),
        }
    }
}

impl From<FederationError> for CliError {
    fn from(e: FederationError) -> Self {
        match e {
            FederationError::Gan(g) => g.into(),
            FederationError::Config(_) => Self::usage(e.to_string()),
            FederationError::Wire(_) => Self::runtime(e.to_string()),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        Self::runtime(e.to_string())
    }
}

fn now_ms() -> u64 {
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_millis() as u64
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Worker(a) => cmd_worker(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Survey(a) => cmd_survey(a),
        Command::SurveyTabulate(a) => cmd_survey_tabulate(a),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let mut params = SourceParams::new(a.patients, a.features, a.sparsity, a.seed);
    params.silo_shift = a.silo_shift;
    params.n_latent = a.latent;
    params.validate()?;
    if a.silos == 0 {
        return Err(CliError::usage("--silos must be at least 1"));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| CliError::runtime(format!("{}: {e}", a.out.display())))?;
    for silo in 0..a.silos {
        let m = synth_source(&params, silo)?;
        let path = a.out.join(format!("silo_{silo}.csv"));
        io::save_matrix(&m, &path)?;
        let frac = m.count_ones() as f64 / (m.rows() * m.cols()).max(1) as f64;
        eprintln!(
            "{}: {} patients x {} features, fraction of ones {:.5} (target {})",
            path.display(),
            m.rows(),
            m.cols(),
            frac,
            a.sparsity
        );
    }
    Ok(())
}

fn log_path(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "train".into());
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    base.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let data: Vec<PatientMatrix> = a.data.iter().map(|p| io::load_matrix(p)).collect::<Result<_, _>>()?;
    let dim = data[0].cols();
    if let Some((i, m)) = data.iter().enumerate().find(|(_, m)| m.cols() != dim) {
        return Err(CliError::usage(format!(
            "{} has {} features but {} has {dim}",
            a.data[i].display(),
            m.cols(),
            a.data[0].display()
        )));
    }
    let mut config = a.preset.config(dim);
    if let Some(path) = &a.config {
        let text = io::read_text(path)?;
        config = GanConfig::from_kv(config, &text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if config.feature_dim != dim {
            return Err(CliError::usage(format!("config feature_dim {} but data has {dim} features", config.feature_dim)));
        }
    }
    if let Some(loss) = a.loss {
        config.loss_kind = loss;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    log::info!("effective configuration:\n{}", config.to_kv().trim_end());
    let labels = data[0].labels().map(<[String]>::to_vec);

    let federated = data.len() > 1 || a.silos > 1 || a.rounds > 1;
    let model = if !federated {
        let mut model = GanModel::new(&config)?;
        model.set_clock(now_ms);
        let log = model.train(&data[0], a.epochs)?;
        if let Some(path) = &a.log {
            io::write_train_log(&log, path)?;
        }
        eprintln!("trained {} epochs on {} rows", log.len(), data[0].rows());
        model
    } else {
        if data.len() > 1 && a.silos > 1 && a.silos != data.len() {
            return Err(CliError::usage(format!("--silos {} conflicts with {} --data files", a.silos, data.len())));
        }
        let k = if data.len() > 1 { data.len() } else { a.silos };
        let mut plan = FederationPlan::new(k, a.epochs, a.rounds, config.seed)?;
        plan.remainder_to_last = a.remainder_to_last;
        plan.shuffle_node_order = a.shuffle_node_order;
        let silos = if data.len() > 1 {
            data
        } else {
            let parts = partition_with(&data[0], k, plan.shuffle_seed, plan.remainder_to_last)?;
            if parts.dropped > 0 {
                eprintln!("split {} rows into {k} silos; {} remainder rows dropped", data[0].rows(), parts.dropped);
            }
            plan.silo_row_ranges = parts.ranges;
            parts.silos
        };
        log::info!("federation plan:\n{}", plan.to_kv().trim_end());
        let (model, logs) = run_partitioned(&config, &silos, &plan)?;
        for l in &logs {
            eprintln!("round {} node {}: {} epochs on {} rows", l.round, l.node, l.log.len(), silos[l.node].rows());
            if let Some(path) = &a.log {
                io::write_train_log(&l.log, &log_path(path, &format!("r{}.n{}", l.round, l.node)))?;
            }
        }
        model
    };
    model_file::save_model(&model, labels.as_deref(), &a.out_model)?;
    eprintln!("model written to {}", a.out_model.display());
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    let text = io::read_text(&a.plan)?;
    let plan = parse_plan(&text, GanConfig::paper(0)).map_err(|e| CliError::usage(format!("{}: {e}", a.plan.display())))?;
    log::info!("session plan:\n{}", plan.render().trim_end());
    let coordinator = Coordinator::bind(a.bind.as_str(), plan.gan, plan.federation)?
        .with_timeout(Duration::from_secs(a.timeout_secs));
    log::info!("listening on {}", coordinator.local_addr()?);
    let outcome = coordinator.run()?;
    if let Some(path) = &a.out_model {
        model_file::save_model(&outcome.model, None, path)?;
        eprintln!("model written to {}", path.display());
    }
    Ok(())
}

fn cmd_worker(a: WorkerArgs) -> Result<(), CliError> {
    let data = io::load_matrix(&a.data)?;
    let config = match &a.plan {
        Some(path) => {
            let text = io::read_text(path)?;
            parse_plan(&text, GanConfig::paper(0)).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?.gan
        }
        None => a.preset.config(data.cols()).with_seed(a.seed),
    };
    if config.feature_dim != data.cols() {
        return Err(CliError::usage(format!(
            "configuration expects {} features, {} has {}",
            config.feature_dim,
            a.data.display(),
            data.cols()
        )));
    }
    let timeout = Duration::from_secs(a.timeout_secs);
    let opts = WorkerOptions { node_id: a.node_id, config, connect_timeout: timeout, timeout };
    let summary = net::worker_run(&data, a.connect.as_str(), &opts)?;
    if let Some(path) = &a.log {
        for t in &summary.turns {
            io::write_train_log(&t.log, &log_path(path, &format!("r{}.n{}", t.round, t.node)))?;
        }
    }
    eprintln!("session ended after {} turns", summary.turns.len());
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<(), CliError> {
    let loaded = model_file::load_model(&a.model)?;
    if let Some(path) = &a.config {
        let text = io::read_text(path)?;
        let expected = GanConfig::from_kv(loaded.model.config().clone(), &text)?;
        if expected.digest() != loaded.digest {
            let msg = format!("{} was trained with a different configuration than {}", a.model.display(), path.display());
            if !a.force {
                return Err(CliError::usage(format!("{msg}; pass --force to generate anyway")));
            }
            log::warn!("{msg}");
        }
    }
    let mut m = loaded.model.generate(a.n, a.seed)?;
    if let Some(labels) = loaded.labels {
        m = m.with_labels(labels)?;
    }
    io::save_matrix(&m, &a.out)?;
    eprintln!("{} patients written to {}", m.rows(), a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let real = io::load_matrix(&a.real)?;
    let synth = io::load_matrix(&a.synth)?;
    let report = eval::evaluate(&real, &synth, a.hist_bins, a.threshold)?;
    let hist = io::histogram_csv(&report.histogram);
    let text = format!("{}\n[histogram]\n{hist}", report.to_text());
    match &a.out_report {
        Some(path) => io::write_text(&text, path)?,
        None => print!("{text}"),
    }
    if let Some(path) = &a.scatter {
        io::write_scatter(&report.real_probs, &report.synth_probs, real.labels(), path)?;
    }
    if let Some(path) = &a.hist {
        io::write_text(&hist, path)?;
    }
    eprintln!(
        "r_squared {:.4}, rmse {:.4}, duplicates {}, mean min cosine distance {:.4}",
        report.r_squared, report.rmse, report.duplicate_count, report.min_cos_distance_mean
    );
    Ok(())
}

fn cmd_survey(a: SurveyArgs) -> Result<(), CliError> {
    if a.synth.len() != 2 {
        return Err(CliError::usage(format!("--synth needs exactly two cohorts, got {}", a.synth.len())));
    }
    let real = io::load_matrix(&a.real)?;
    let single = io::load_matrix(&a.synth[0])?;
    let fed = io::load_matrix(&a.synth[1])?;
    let dict = match &a.dict {
        Some(path) => io::load_dictionary(path)?,
        None => CodeDictionary::common_icu(),
    };
    let preamble = match &a.preamble {
        Some(path) => io::read_text(path)?,
        None => DEFAULT_PREAMBLE.to_string(),
    };
    let pack = make_survey_pack(&real, &single, &fed, a.n, &dict, a.seed, &preamble)?;
    io::write_text(&pack.to_text(), &a.out_pack)?;
    io::write_text(&pack.key.to_csv(), &a.out_key)?;
    eprintln!("{} entries written to {}", pack.entries.len(), a.out_pack.display());
    Ok(())
}

fn cmd_survey_tabulate(a: TabulateArgs) -> Result<(), CliError> {
    let key = io::load_survey_key(&a.key)?;
    let responses = a.responses.iter().map(|p| io::load_survey_response(p)).collect::<Result<Vec<_>, _>>()?;
    let tables = tabulate_survey(&responses, &key)?;
    io::write_text(&tables.to_csv(), &a.out)?;
    eprintln!("{} rater tables plus pooled written to {}", tables.per_rater.len(), a.out.display());
    Ok(())
}
