//! Simulation orchestration: config, the monthly training loop, the
//! full-retraining baseline, compute accounting, sweeps and report files.

mod report;
mod sweep;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use report::{emit_reports, ARTIFACTS};
pub use sweep::{expand_grid, run_job, run_sweep, GridSpec, Job};

use crate::error::{Error, Result};
use crate::metrics::{evaluate_model, AucMatrix, MetricSeries};
use crate::model::{
    cosine_lr, Activation, Arch, GradAccumulator, ModelState, OptimizerState, DEFAULT_BETAS,
    DEFAULT_EPS, DEFAULT_HIDDEN_DIM, DEFAULT_WEIGHT_DECAY,
};
use crate::rng::{stable_hash, stream_rng, Stream};
use crate::strategies::{Learner, StrategyConfig, StrategyKind};
use crate::stream::{
    build_registry, draw_pool, extract_batch, make_eval_set, select_dataset, EvalCadence,
    LabeledSample, ReleaseSchedule, DEFAULT_BATCH_SIZE, DEFAULT_DIM, DEFAULT_HORIZON_MONTHS,
    DEFAULT_NOISE_SCALE, DEFAULT_RELEASE_MONTHS, DEFAULT_STRENGTH,
};

pub const DEFAULT_MONTHLY_BATCHES: usize = 10;
pub const DEFAULT_EVAL_PER_CLASS: usize = 500;
pub const DEFAULT_FISHER_BATCHES: usize = 10;
pub const DEFAULT_RETRAIN_ITERATIONS: usize = 4_000;
pub const DEFAULT_RETRAIN_LR: f64 = 3e-3;
pub const DEFAULT_RETRAIN_POOL_PER_CLASS: usize = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    pub n_generators: usize,
    pub dim: usize,
    pub strength: f64,
    pub noise_scale: f64,
    /// One month per generator; empty means evenly spread.
    pub release_months: Vec<u32>,
    pub horizon_months: u32,
    pub eval_cadence: EvalCadence,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        Self {
            n_generators: DEFAULT_RELEASE_MONTHS.len(),
            dim: DEFAULT_DIM,
            strength: DEFAULT_STRENGTH,
            noise_scale: DEFAULT_NOISE_SCALE,
            release_months: DEFAULT_RELEASE_MONTHS.to_vec(),
            horizon_months: DEFAULT_HORIZON_MONTHS,
            eval_cadence: EvalCadence::PerRelease,
        }
    }
}

impl ScheduleSpec {
    pub fn build(&self, seed: u64) -> Result<ReleaseSchedule> {
        let mut generators = build_registry(self.n_generators, self.dim, self.strength, seed)?;
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config(format!("noise_scale {} must be >= 0", self.noise_scale)));
        }
        if !self.release_months.is_empty() {
            if self.release_months.len() != self.n_generators {
                return Err(Error::Config(format!(
                    "{} release months for {} generators",
                    self.release_months.len(),
                    self.n_generators
                )));
            }
            for (g, m) in generators.iter_mut().zip(&self.release_months) {
                g.release_month = *m;
            }
        } else {
            let spacing = (self.horizon_months / self.n_generators as u32).max(1);
            for g in &mut generators {
                g.release_month = g.id * spacing;
            }
        }
        for g in &mut generators {
            g.noise_scale = self.noise_scale;
        }
        ReleaseSchedule::new(generators, self.horizon_months, self.eval_cadence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden_dim: usize,
    pub activation: Activation,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            hidden_dim: DEFAULT_HIDDEN_DIM,
            activation: Activation::Tanh,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            beta1: DEFAULT_BETAS.0,
            beta2: DEFAULT_BETAS.1,
            eps: DEFAULT_EPS,
        }
    }
}

impl ModelSpec {
    pub fn arch(&self, input_dim: usize) -> Arch {
        Arch {
            input_dim,
            hidden_dim: self.hidden_dim,
            activation: self.activation,
        }
    }

    pub fn optimizer(&self, n_params: usize, lr: f64) -> OptimizerState {
        OptimizerState::new(n_params, lr, self.weight_decay)
            .with_betas((self.beta1, self.beta2), self.eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionSpec {
    pub monthly_batches: usize,
    pub batch_size: usize,
    pub eval_per_class: usize,
    /// Recent batches used for each Fisher estimate.
    pub fisher_batches: usize,
    /// Iterations per full retraining.
    pub retrain_iterations: usize,
    pub retrain_lr: f64,
    /// Fixed training pool per class and dataset for full retraining.
    pub retrain_pool_per_class: usize,
}

impl Default for ExecutionSpec {
    fn default() -> Self {
        Self {
            monthly_batches: DEFAULT_MONTHLY_BATCHES,
            batch_size: DEFAULT_BATCH_SIZE,
            eval_per_class: DEFAULT_EVAL_PER_CLASS,
            fisher_batches: DEFAULT_FISHER_BATCHES,
            retrain_iterations: DEFAULT_RETRAIN_ITERATIONS,
            retrain_lr: DEFAULT_RETRAIN_LR,
            retrain_pool_per_class: DEFAULT_RETRAIN_POOL_PER_CLASS,
        }
    }
}

/// One complete run description. The JSON form is the run-config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub model: ModelSpec,
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub execution: ExecutionSpec,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self::for_strategy(StrategyKind::Naive, DEFAULT_MONTHLY_BATCHES, 0)
    }
}

impl SimulationConfig {
    /// Default desk-scale config for one strategy.
    pub fn for_strategy(kind: StrategyKind, monthly_batches: usize, seed: u64) -> Self {
        Self {
            seed,
            schedule: ScheduleSpec::default(),
            model: ModelSpec::default(),
            strategy: StrategyConfig::desk(kind, monthly_batches),
            execution: ExecutionSpec {
                monthly_batches,
                ..ExecutionSpec::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.execution;
        if e.monthly_batches == 0 {
            return Err(Error::Config("monthly_batches must be >= 1".into()));
        }
        if e.batch_size < 2 || !e.batch_size.is_multiple_of(2) {
            return Err(Error::Config(format!("batch_size {} must be even and >= 2", e.batch_size)));
        }
        if e.eval_per_class == 0 || e.retrain_pool_per_class == 0 {
            return Err(Error::Config("eval and retraining pools must be non-empty".into()));
        }
        if self.model.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be >= 1".into()));
        }
        if !(e.retrain_lr > 0.0 && e.retrain_lr.is_finite()) {
            return Err(Error::Config(format!("retrain_lr {} must be positive", e.retrain_lr)));
        }
        self.strategy.validate()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Training method behind a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ContinualLearning,
    FullRetraining,
}

/// Counters standing in for GPU time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComputeLedger {
    /// Training samples drawn from the data stream (replayed samples excluded).
    pub samples_processed: u64,
    pub unique_samples: u64,
    pub parameter_updates: u64,
    /// Per-sample backward passes, replay and distillation terms included.
    pub sample_gradients: u64,
}

/// Everything measured at one evaluation event; also the JSONL line body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event: usize,
    pub month: u32,
    pub eval_auc: f64,
    pub c_auc: f64,
    pub fwt_auc: Option<f64>,
    pub row: Vec<f64>,
    pub ledger: ComputeLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub method: Method,
    pub config: SimulationConfig,
    pub matrix: AucMatrix,
    pub series: MetricSeries,
    pub events: Vec<EventRecord>,
    pub ledger: ComputeLedger,
    /// Informational only; never written to deterministic outputs.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl RunRecord {
    /// Label used to group runs in reports ("Naive", ..., "FullRetraining").
    pub fn label(&self) -> &'static str {
        match self.method {
            Method::FullRetraining => "FullRetraining",
            Method::ContinualLearning => self.config.strategy.kind.name(),
        }
    }

    /// Builds a record around an existing matrix (used for offline analysis).
    pub fn from_matrix(
        method: Method,
        config: SimulationConfig,
        matrix: AucMatrix,
        ledgers: Vec<ComputeLedger>,
    ) -> Result<Self> {
        matrix.validate()?;
        let series = MetricSeries::from_matrix(&matrix)?;
        let events = (0..matrix.n_events())
            .map(|t| EventRecord {
                event: t,
                month: matrix.event_months[t],
                eval_auc: series.eval_auc[t],
                c_auc: series.c_auc[t],
                fwt_auc: series.fwt_auc[t],
                row: matrix.values[t].clone(),
                ledger: ledgers.get(t).copied().unwrap_or_default(),
            })
            .collect();
        Ok(Self {
            run_id: run_id(method, &config),
            method,
            ledger: ledgers.last().copied().unwrap_or_default(),
            config,
            matrix,
            series,
            events,
            wall_clock_secs: 0.0,
        })
    }
}

/// 16 hex digits of a stable hash of (method, config).
pub fn run_id(method: Method, config: &SimulationConfig) -> String {
    let key = serde_json::to_vec(&(method, config)).expect("config serializes");
    format!("{:016x}", stable_hash(&key))
}

fn eval_sets(schedule: &ReleaseSchedule, config: &SimulationConfig) -> Result<Vec<Vec<LabeledSample>>> {
    schedule
        .generators
        .iter()
        .map(|g| make_eval_set(g, config.execution.eval_per_class, config.seed))
        .collect()
}

/// Runs one continual-learning simulation.
pub fn run_simulation(config: &SimulationConfig) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let seed = config.seed;
    let exec = &config.execution;
    let schedule = config.schedule.build(seed)?;
    let eval_sets = eval_sets(&schedule, config)?;

    let arch = config.model.arch(schedule.dim());
    let model = ModelState::init(arch, &mut stream_rng(seed, Stream::Init));
    let opt = config.model.optimizer(arch.param_count(), config.strategy.lr);
    let mut learner = Learner::new(
        config.strategy.clone(),
        model,
        opt,
        exec.batch_size,
        exec.fisher_batches,
        stream_rng(seed, Stream::Strategy),
    )?;

    let mut train_rng = stream_rng(seed, Stream::Train);
    let mut matrix = AucMatrix::new(schedule.released_at());
    let mut ledger = ComputeLedger::default();
    let mut ledgers = Vec::with_capacity(schedule.eval_events.len());
    let first_month = schedule.generators[0].release_month;

    for month in first_month..schedule.horizon_months {
        if schedule.is_release_month(month) {
            learner.on_release()?;
        }
        for _ in 0..exec.monthly_batches {
            let dataset = select_dataset(month, &schedule, &mut train_rng)?;
            let batch = extract_batch(dataset, &schedule, exec.batch_size, &mut train_rng)?;
            let report = learner.step(&batch).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("month {month}: {msg}")),
                other => other,
            })?;
            ledger.samples_processed += batch.len() as u64;
            ledger.unique_samples += batch.len() as u64;
            ledger.parameter_updates += 1;
            ledger.sample_gradients += report.sample_gradients as u64;
        }
        if schedule.eval_events.binary_search(&month).is_ok() {
            let row = evaluate_model(&learner.eval_model(), &eval_sets)?;
            matrix.push_row(month, row)?;
            ledgers.push(ledger);
        }
    }

    let mut record = RunRecord::from_matrix(Method::ContinualLearning, config.clone(), matrix, ledgers)?;
    record.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(record)
}

/// Full-retraining baseline: at every release event a fresh model is trained
/// from the initial weights on class-balanced batches (half a batch of each
/// class per released dataset) drawn from fixed per-dataset pools, with a
/// cosine learning-rate schedule.
pub fn run_full_retraining(config: &SimulationConfig) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let seed = config.seed;
    let exec = &config.execution;
    let schedule = config.schedule.build(seed)?;
    let eval_sets = eval_sets(&schedule, config)?;
    let arch = config.model.arch(schedule.dim());
    let init = ModelState::init(arch, &mut stream_rng(seed, Stream::Init));

    let pool_size = exec.retrain_pool_per_class;
    let pools: Vec<Vec<LabeledSample>> = schedule
        .generators
        .iter()
        .map(|g| draw_pool(g, pool_size, &mut stream_rng(seed, Stream::RetrainPool(g.id))))
        .collect();
    let mut used: Vec<Vec<bool>> = pools.iter().map(|p| vec![false; p.len()]).collect();

    let mut rng = stream_rng(seed, Stream::Retrain);
    let half = exec.batch_size / 2;
    let mut matrix = AucMatrix::new(schedule.released_at());
    let mut ledger = ComputeLedger::default();
    let mut ledgers = Vec::new();
    let mut model = init.clone();
    let mut trained_on = 0usize;

    for &month in &schedule.eval_events {
        let released = schedule.released_newest_first(month);
        if released.len() > trained_on {
            trained_on = released.len();
            model = init.clone();
            let mut opt = config.model.optimizer(arch.param_count(), exec.retrain_lr);
            let iterations = exec.retrain_iterations as u64;
            let mut picks: Vec<(usize, usize)> = Vec::with_capacity(half * 2 * released.len());
            for it in 0..iterations {
                opt.lr = cosine_lr(it, exec.retrain_lr, iterations)?;
                picks.clear();
                for &g in released.iter().rev() {
                    let g = g as usize;
                    for _ in 0..half {
                        picks.push((g, rand::Rng::random_range(&mut rng, 0..pool_size)));
                    }
                    for _ in 0..half {
                        picks.push((g, pool_size + rand::Rng::random_range(&mut rng, 0..pool_size)));
                    }
                }
                let mut acc = GradAccumulator::new(&model);
                let scale = 1.0 / picks.len() as f64;
                acc.add_ce(&model, picks.iter().map(|&(g, i)| &pools[g][i]), scale, None)?;
                let (_, grad) = acc.finish();
                opt.step(&mut model, &grad)?;
                if !model.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "full retraining diverged at month {month}, iteration {it}"
                    )));
                }
                for &(g, i) in &picks {
                    if !used[g][i] {
                        used[g][i] = true;
                        ledger.unique_samples += 1;
                    }
                }
                ledger.samples_processed += picks.len() as u64;
                ledger.sample_gradients += picks.len() as u64;
                ledger.parameter_updates += 1;
            }
        }
        let row = evaluate_model(&model, &eval_sets)?;
        matrix.push_row(month, row)?;
        ledgers.push(ledger);
    }

    let mut record = RunRecord::from_matrix(Method::FullRetraining, config.clone(), matrix, ledgers)?;
    record.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: StrategyKind) -> SimulationConfig {
        let mut c = SimulationConfig::for_strategy(kind, 2, 3);
        c.schedule.n_generators = 3;
        c.schedule.dim = 8;
        c.schedule.release_months = vec![0, 3, 5];
        c.schedule.horizon_months = 8;
        c.model.hidden_dim = 4;
        c.execution.eval_per_class = 20;
        c.execution.retrain_iterations = 30;
        c.execution.retrain_pool_per_class = 50;
        c
    }

    #[test]
    fn config_json_round_trip_and_defaults() {
        let c = SimulationConfig::for_strategy(StrategyKind::DERPP, 20, 11);
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: SimulationConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let minimal: SimulationConfig = serde_json::from_str(
            r#"{"seed": 1, "strategy": {"kind": "Naive", "lr": 0.01, "lambda_reg": 0,
                "buffer_capacity": 0, "plastic_decay": 1, "stable_decay": 1,
                "esmer_beta": 1, "esmer_alpha": 0.9, "derpp_alpha": 0}}"#,
        )
        .unwrap();
        assert_eq!(minimal.schedule, ScheduleSpec::default());
        assert_eq!(minimal.execution.monthly_batches, 10);
        assert!(serde_json::from_str::<SimulationConfig>(r#"{"seed": 1, "bogus": 2}"#).is_err());
    }

    #[test]
    fn validation_failures() {
        let mut c = small(StrategyKind::Naive);
        c.execution.monthly_batches = 0;
        assert!(matches!(run_simulation(&c), Err(Error::Config(_))));
        let mut c = small(StrategyKind::Naive);
        c.execution.batch_size = 7;
        assert!(run_simulation(&c).is_err());
        let mut c = small(StrategyKind::Naive);
        c.schedule.release_months = vec![0, 3];
        assert!(run_simulation(&c).is_err());
    }

    #[test]
    fn small_run_shapes_and_ledger() {
        let c = small(StrategyKind::Replay);
        let r = run_simulation(&c).unwrap();
        assert_eq!(r.matrix.event_months, vec![0, 3, 5, 7]);
        assert_eq!(r.events.len(), 4);
        assert_eq!(r.ledger.samples_processed, 8 * 2 * 16);
        assert_eq!(r.ledger.unique_samples, r.ledger.samples_processed);
        assert_eq!(r.ledger.parameter_updates, 16);
        assert!(r.ledger.sample_gradients > r.ledger.samples_processed);
        assert_eq!(r.series.fwt_auc.last().unwrap(), &None);
        assert!(r.series.fwt_auc[0].is_some());
    }

    #[test]
    fn baseline_small_run() {
        let c = small(StrategyKind::Naive);
        let r = run_full_retraining(&c).unwrap();
        assert_eq!(r.method, Method::FullRetraining);
        // Three retrainings with 1, 2 and 3 datasets.
        assert_eq!(r.ledger.parameter_updates, 3 * 30);
        assert_eq!(r.ledger.samples_processed, 30 * 16 * (1 + 2 + 3));
        assert!(r.ledger.unique_samples <= 3 * 100);
        assert_ne!(r.run_id, run_simulation(&c).unwrap().run_id);
    }
}
