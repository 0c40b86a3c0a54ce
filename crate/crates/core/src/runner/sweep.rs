use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    run_full_retraining, run_id, run_simulation, ExecutionSpec, Method, ModelSpec, RunRecord,
    ScheduleSpec, SimulationConfig,
};
use crate::error::{Error, Result};
use crate::hypothesis::{ResultSet, RunFailure, DEFAULT_FILTER_THRESHOLD};
use crate::rng::derive_seed;
use crate::strategies::{Preset, StrategyConfig, StrategyKind};

/// One unit of sweep work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub method: Method,
    pub config: SimulationConfig,
}

impl Job {
    pub fn simulate(config: SimulationConfig) -> Self {
        Self { method: Method::ContinualLearning, config }
    }

    pub fn baseline(config: SimulationConfig) -> Self {
        Self { method: Method::FullRetraining, config }
    }

    pub fn run_id(&self) -> String {
        run_id(self.method, &self.config)
    }
}

pub fn run_job(job: &Job) -> Result<RunRecord> {
    match job.method {
        Method::ContinualLearning => run_simulation(&job.config),
        Method::FullRetraining => run_full_retraining(&job.config),
    }
}

/// Grid file contents: strategies × monthly-batch settings × replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub master_seed: u64,
    pub replicates: usize,
    pub strategies: Vec<StrategyKind>,
    pub monthly_batches: Vec<usize>,
    pub preset: Preset,
    /// Adds one full-retraining run per replicate and monthly-batch setting.
    pub include_baseline: bool,
    pub filter_threshold: f64,
    pub schedule: ScheduleSpec,
    pub model: ModelSpec,
    pub execution: ExecutionSpec,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            master_seed: 0,
            replicates: 20,
            strategies: StrategyKind::ALL.to_vec(),
            monthly_batches: vec![10, 20, 50],
            preset: Preset::Desk,
            include_baseline: false,
            filter_threshold: DEFAULT_FILTER_THRESHOLD,
            schedule: ScheduleSpec::default(),
            model: ModelSpec::default(),
            execution: ExecutionSpec::default(),
        }
    }
}

/// Expands a grid into jobs. Replicate `r` uses the seed
/// `derive_seed(master_seed, r)` for every strategy, so strategies are
/// compared on identical data streams.
pub fn expand_grid(grid: &GridSpec) -> Result<Vec<Job>> {
    if grid.replicates == 0 || grid.strategies.is_empty() || grid.monthly_batches.is_empty() {
        return Err(Error::Config("grid has no runs".into()));
    }
    let mut jobs = Vec::new();
    for r in 0..grid.replicates as u64 {
        let seed = derive_seed(grid.master_seed, r);
        for &mb in &grid.monthly_batches {
            let make = |kind| SimulationConfig {
                seed,
                schedule: grid.schedule.clone(),
                model: grid.model.clone(),
                strategy: StrategyConfig::preset(grid.preset, kind, mb),
                execution: ExecutionSpec {
                    monthly_batches: mb,
                    ..grid.execution.clone()
                },
            };
            for &kind in &grid.strategies {
                jobs.push(Job::simulate(make(kind)));
            }
            if grid.include_baseline {
                jobs.push(Job::baseline(make(StrategyKind::Naive)));
            }
        }
    }
    Ok(jobs)
}

/// Runs every job on `n_jobs` worker threads. Failed runs are recorded
/// rather than aborting the sweep; results are ordered by run id, so the
/// outcome does not depend on job order or parallelism.
pub fn run_sweep(jobs: &[Job], n_jobs: usize) -> Result<ResultSet> {
    if jobs.is_empty() {
        return Err(Error::Config("empty sweep".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<(&Job, Result<RunRecord>)> =
        pool.install(|| jobs.par_iter().map(|j| (j, run_job(j))).collect());

    let mut set = ResultSet::new(Vec::new());
    for (job, outcome) in outcomes {
        match outcome {
            Ok(record) => set.runs.push(record),
            Err(e) => set.failures.push(RunFailure {
                run_id: job.run_id(),
                method: job.method,
                error: e.to_string(),
            }),
        }
    }
    set.runs.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    set.failures.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(set)
}
