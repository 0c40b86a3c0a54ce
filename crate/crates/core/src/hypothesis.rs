//! Transferability statistics over collections of runs: the maximum
//! next-release transfer, its per-step decay and the compounded k-step AUC.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AucMatrix;
use crate::runner::{Method, RunRecord};

pub const DEFAULT_FILTER_THRESHOLD: f64 = 0.75;
/// Ratio pairs whose next-step transfer is closer to zero than this are skipped.
pub const EPSILON_DENOM: f64 = 1e-3;
/// `t_comp` is reported for k in `0..=MAX_K`.
pub const MAX_K: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub run_id: String,
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub runs: Vec<RunRecord>,
    #[serde(default)]
    pub failures: Vec<RunFailure>,
    pub filter_threshold: f64,
}

impl ResultSet {
    pub fn new(runs: Vec<RunRecord>) -> Self {
        Self {
            runs,
            failures: Vec::new(),
            filter_threshold: DEFAULT_FILTER_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidArgument(format!("filter threshold {threshold} outside [0, 1]")));
        }
        self.filter_threshold = threshold;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.filter_threshold) {
            return Err(Error::InvalidArgument(format!(
                "filter threshold {} outside [0, 1]",
                self.filter_threshold
            )));
        }
        let mut dims = self.runs.iter().map(|r| r.matrix.n_datasets());
        if let Some(first) = dims.next() {
            if let Some(other) = dims.find(|d| *d != first) {
                return Err(Error::DimensionMismatch { expected: first, got: other });
            }
        }
        self.runs.iter().try_for_each(|r| r.matrix.validate())
    }

    /// Reads `results.json` from a report directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("results.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let set: Self = serde_json::from_str(&text)?;
        set.validate()?;
        Ok(set)
    }

    /// Continual-learning runs; the retraining baseline is not part of the
    /// strategy space the statistics range over.
    fn strategy_runs(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.method == Method::ContinualLearning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub t_max: f64,
    pub t_decay: f64,
    /// Pairs that entered the mean.
    pub sample_count: usize,
    /// Pairs dropped for a near-zero denominator.
    pub excluded: usize,
}

/// Largest next-release transfer `R[t][next] - 0.5` in one matrix.
fn matrix_t_max(m: &AucMatrix) -> Option<f64> {
    (0..m.n_events())
        .filter_map(|t| m.future_in_release_order(t).first().map(|&j| m.values[t][j] - 0.5))
        .reduce(f64::max)
}

pub fn t_max(results: &ResultSet) -> Result<f64> {
    results
        .strategy_runs()
        .filter_map(|r| matrix_t_max(&r.matrix))
        .reduce(f64::max)
        .ok_or_else(|| Error::UndefinedMetric("no run has a future dataset at any event".into()))
}

/// (sum of ratios, included pairs, excluded pairs) for one matrix.
fn matrix_ratios(m: &AucMatrix) -> (f64, usize, usize) {
    let (mut sum, mut n, mut excluded) = (0.0, 0, 0);
    for t in 0..m.n_events() {
        let future = m.future_in_release_order(t);
        if future.len() < 2 {
            continue;
        }
        let den = m.values[t][future[0]] - 0.5;
        if den.abs() < EPSILON_DENOM {
            excluded += 1;
            continue;
        }
        sum += (m.values[t][future[1]] - 0.5) / den;
        n += 1;
    }
    (sum, n, excluded)
}

/// Mean decay ratio over runs whose final evaluation AUC reaches `threshold`
/// (`None` keeps every run). Returns (mean, included, excluded).
pub fn t_decay_with(results: &ResultSet, threshold: Option<f64>) -> Result<(f64, usize, usize)> {
    let (mut sum, mut n, mut excluded) = (0.0, 0, 0);
    for run in results.strategy_runs() {
        if let Some(th) = threshold {
            if run.series.final_eval_auc().is_none_or(|a| a < th) {
                continue;
            }
        }
        let (s, k, e) = matrix_ratios(&run.matrix);
        sum += s;
        n += k;
        excluded += e;
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(format!(
            "no eligible pairs for the decay ratio ({excluded} excluded for a near-zero denominator)"
        )));
    }
    Ok((sum / n as f64, n, excluded))
}

/// Decay ratio over runs passing the set's evaluation-AUC filter.
pub fn t_decay(results: &ResultSet) -> Result<f64> {
    t_decay_with(results, Some(results.filter_threshold)).map(|(d, _, _)| d)
}

pub fn estimate(results: &ResultSet) -> Result<DecayEstimate> {
    let t_max = t_max(results)?;
    let (t_decay, sample_count, excluded) = t_decay_with(results, Some(results.filter_threshold))?;
    Ok(DecayEstimate {
        t_max,
        t_decay,
        sample_count,
        excluded,
    })
}

/// Expected AUC `k` releases ahead: `0.5 + t_max * t_decay^k`.
pub fn t_comp(t_max: f64, t_decay: f64, k: i64) -> Result<f64> {
    if k < 0 {
        return Err(Error::InvalidArgument(format!("k must be >= 0, got {k}")));
    }
    let k = i32::try_from(k).map_err(|_| Error::InvalidArgument(format!("k = {k} too large")))?;
    Ok(0.5 + t_max * t_decay.powi(k))
}

/// Mean and population standard deviation of every defined per-event
/// FWT-AUC across runs.
pub fn fwt_summary(results: &ResultSet) -> Result<(f64, f64)> {
    let values: Vec<f64> = results
        .strategy_runs()
        .flat_map(|r| r.series.fwt_auc.iter().flatten().copied())
        .collect();
    mean_std(&values).ok_or_else(|| Error::UndefinedMetric("no defined FWT-AUC values".into()))
}

pub(crate) fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// The analysis document. Quantities that are undefined for the given
/// results are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub t_max: Option<f64>,
    pub t_decay: Option<f64>,
    pub t_decay_unfiltered: Option<f64>,
    /// Indexed by k.
    pub t_comp: Vec<f64>,
    pub fwt_mean: Option<f64>,
    pub fwt_std: Option<f64>,
    pub eligible_pairs: usize,
    pub excluded_pairs: usize,
    pub filter_threshold: f64,
    pub runs: usize,
}

pub fn analyze(results: &ResultSet) -> HypothesisReport {
    let t_max = t_max(results).ok();
    let filtered = t_decay_with(results, Some(results.filter_threshold)).ok();
    let unfiltered = t_decay_with(results, None).ok();
    let fwt = fwt_summary(results).ok();
    let t_comp = match (t_max, filtered) {
        (Some(m), Some((d, _, _))) => (0..=MAX_K as i64).filter_map(|k| t_comp(m, d, k).ok()).collect(),
        _ => Vec::new(),
    };
    HypothesisReport {
        t_max,
        t_decay: filtered.map(|f| f.0),
        t_decay_unfiltered: unfiltered.map(|f| f.0),
        t_comp,
        fwt_mean: fwt.map(|f| f.0),
        fwt_std: fwt.map(|f| f.1),
        eligible_pairs: filtered.map_or(0, |f| f.1),
        excluded_pairs: filtered.map_or(0, |f| f.2),
        filter_threshold: results.filter_threshold,
        runs: results.strategy_runs().count(),
    }
}
