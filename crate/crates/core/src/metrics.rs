//! Rank-based AUC and the chronological retention / forward-transfer metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::stream::LabeledSample;

/// Mann-Whitney AUC: probability that a random positive outscores a random
/// negative, ties counted one half. Computed from average ranks in O(n log n).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(format!(
            "AUC needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; a tie group spanning positions [i, j) gets (i + j + 1) / 2.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        let positives = order[i..j].iter().filter(|&&k| labels[k] == 1).count();
        pos_rank_sum += avg_rank * positives as f64;
        i = j;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Grid of AUC(model at event t, dataset i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucMatrix {
    pub values: Vec<Vec<f64>>,
    /// Event index at which each dataset counts as released.
    pub released_at: Vec<usize>,
    /// Month of each evaluation event.
    pub event_months: Vec<u32>,
}

impl AucMatrix {
    pub fn new(released_at: Vec<usize>) -> Self {
        Self {
            values: Vec::new(),
            released_at,
            event_months: Vec::new(),
        }
    }

    pub fn n_events(&self) -> usize {
        self.values.len()
    }

    pub fn n_datasets(&self) -> usize {
        self.released_at.len()
    }

    pub fn push_row(&mut self, month: u32, row: Vec<f64>) -> Result<()> {
        if row.len() != self.n_datasets() {
            return Err(Error::DimensionMismatch {
                expected: self.n_datasets(),
                got: row.len(),
            });
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("AUC entry {v} outside [0, 1]")));
        }
        self.values.push(row);
        self.event_months.push(month);
        Ok(())
    }

    /// Checks the structural invariants (rectangular, entries in [0, 1],
    /// release order non-decreasing).
    pub fn validate(&self) -> Result<()> {
        if self.event_months.len() != self.values.len() {
            return Err(Error::InvalidArgument("event months do not match rows".into()));
        }
        for row in &self.values {
            if row.len() != self.n_datasets() {
                return Err(Error::InvalidArgument("matrix is not rectangular".into()));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument("AUC entry outside [0, 1]".into()));
            }
        }
        if self.released_at.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("released_at must be non-decreasing".into()));
        }
        Ok(())
    }

    pub fn released(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_datasets()).filter(move |&i| self.released_at[i] <= t)
    }

    pub fn future(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_datasets()).filter(move |&i| self.released_at[i] > t)
    }

    /// Future datasets at event `t` in release order (ties by column index).
    pub fn future_in_release_order(&self, t: usize) -> Vec<usize> {
        let mut f: Vec<usize> = self.future(t).collect();
        f.sort_by_key(|&i| (self.released_at[i], i));
        f
    }

    /// Plot-ready CSV: header `event,month,<dataset ids>`, one row per event.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("event,month");
        for i in 0..self.n_datasets() {
            out.push_str(&format!(",{i}"));
        }
        out.push('\n');
        for (t, row) in self.values.iter().enumerate() {
            out.push_str(&format!("{t},{}", self.event_months[t]));
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Mean AUC over datasets released by event `t`.
pub fn c_auc(matrix: &AucMatrix, t: usize) -> Result<f64> {
    let row = matrix
        .values
        .get(t)
        .ok_or_else(|| Error::InvalidArgument(format!("event {t} out of range")))?;
    mean_of(matrix.released(t).map(|i| row[i]))
        .ok_or_else(|| Error::UndefinedMetric(format!("no dataset released at event {t}")))
}

/// Mean AUC over datasets not yet released at event `t`; `None` when there are none.
pub fn fwt_auc(matrix: &AucMatrix, t: usize) -> Result<Option<f64>> {
    let row = matrix
        .values
        .get(t)
        .ok_or_else(|| Error::InvalidArgument(format!("event {t} out of range")))?;
    Ok(mean_of(matrix.future(t).map(|i| row[i])))
}

/// Per-event metric series derived from an [`AucMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub eval_auc: Vec<f64>,
    pub c_auc: Vec<f64>,
    pub fwt_auc: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn from_matrix(matrix: &AucMatrix) -> Result<Self> {
        let mut s = MetricSeries {
            eval_auc: Vec::with_capacity(matrix.n_events()),
            c_auc: Vec::with_capacity(matrix.n_events()),
            fwt_auc: Vec::with_capacity(matrix.n_events()),
        };
        for t in 0..matrix.n_events() {
            let c = c_auc(matrix, t)?;
            // Eval AUC: mean over released datasets' test AUC at this event.
            s.eval_auc.push(c);
            s.c_auc.push(c);
            s.fwt_auc.push(fwt_auc(matrix, t)?);
        }
        Ok(s)
    }

    pub fn final_eval_auc(&self) -> Option<f64> {
        self.eval_auc.last().copied()
    }

    pub fn final_c_auc(&self) -> Option<f64> {
        self.c_auc.last().copied()
    }

    pub fn mean_c_auc(&self) -> Option<f64> {
        mean_of(self.c_auc.iter().copied())
    }

    pub fn mean_fwt_auc(&self) -> Option<f64> {
        mean_of(self.fwt_auc.iter().flatten().copied())
    }
}

/// One matrix row: AUC of `model` on every dataset's evaluation set,
/// released or not.
pub fn evaluate_model(model: &ModelState, eval_sets: &[Vec<LabeledSample>]) -> Result<Vec<f64>> {
    eval_sets
        .iter()
        .map(|set| {
            let scores = model.logits(set)?;
            let labels: Vec<u8> = set.iter().map(|s| s.label).collect();
            auc(&scores, &labels)
        })
        .collect()
}
