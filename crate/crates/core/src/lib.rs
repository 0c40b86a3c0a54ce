//! Desk-scale simulator for continual learning on a timeline of synthetic
//! "generator" domains.
//!
//! Real samples are standard normal feature vectors; each generator adds its
//! own orthogonal signature. Datasets are released over an 80-month horizon
//! and a detector is trained month by month with one of eight continual
//! learning strategies, then scored with continual AUC (released datasets)
//! and forward-transfer AUC (not yet released ones).
//!
//! The examples are the intended entry points:
//!
//! ```text
//! cargo run --release --example timeline_sampler
//! cargo run --release --example train_single_generator
//! cargo run --release --example strategy_comparison
//! cargo run --release --example full_retraining
//! cargo run --release --example hypothesis_analysis
//! cargo run --release --example sweep_and_report
//! ```

pub mod error;
pub mod hypothesis;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod runner;
pub mod strategies;
pub mod stream;

pub use error::{Error, Result};
pub use hypothesis::{analyze, HypothesisReport, ResultSet};
pub use metrics::{auc, c_auc, fwt_auc, AucMatrix, MetricSeries};
pub use model::{Arch, ModelState, OptimizerState};
pub use runner::{
    emit_reports, expand_grid, run_full_retraining, run_simulation, run_sweep, ComputeLedger,
    GridSpec, Job, Method, RunRecord, SimulationConfig,
};
pub use strategies::{Learner, Preset, StrategyConfig, StrategyKind};
pub use stream::{Batch, GeneratorSpec, LabeledSample, ReleaseSchedule};
