use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::ModelState;
use crate::stream::Batch;

/// Parameters to stay close to, weighted by a diagonal Fisher estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherAnchor {
    pub anchor_params: Vec<f64>,
    pub fisher_diag: Vec<f64>,
}

impl FisherAnchor {
    /// Anchor with zero importance everywhere: the penalty vanishes.
    pub fn zeros(params: &[f64]) -> Self {
        Self {
            anchor_params: params.to_vec(),
            fisher_diag: vec![0.0; params.len()],
        }
    }

    pub fn new(anchor_params: Vec<f64>, fisher_diag: Vec<f64>) -> Result<Self> {
        check_len(anchor_params.len(), fisher_diag.len())?;
        if fisher_diag.iter().any(|f| f.is_nan() || *f < 0.0) {
            return Err(Error::InvalidArgument("Fisher entries must be non-negative".into()));
        }
        Ok(Self {
            anchor_params,
            fisher_diag,
        })
    }
}

/// `sum_i F_i (theta_i - anchor_i)^2` and its gradient `2 F (theta - anchor)`.
pub fn ewc_penalty(model: &ModelState, anchor: &FisherAnchor) -> Result<(f64, Vec<f64>)> {
    check_len(anchor.anchor_params.len(), model.params.len())?;
    check_len(anchor.fisher_diag.len(), model.params.len())?;
    let mut value = 0.0;
    let grad = model
        .params
        .iter()
        .zip(&anchor.anchor_params)
        .zip(&anchor.fisher_diag)
        .map(|((p, a), f)| {
            let d = p - a;
            value += f * d * d;
            2.0 * f * d
        })
        .collect();
    Ok((value, grad))
}

/// Empirical diagonal Fisher: mean of squared per-sample loss gradients,
/// anchored at the current parameters.
pub fn estimate_fisher(model: &ModelState, batches: &[Batch]) -> Result<FisherAnchor> {
    let n: usize = batches.iter().map(Batch::len).sum();
    if n == 0 {
        return Err(Error::InvalidArgument("Fisher estimate needs at least one sample".into()));
    }
    let mut fisher = vec![0.0; model.param_count()];
    for sample in batches.iter().flat_map(|b| &b.samples) {
        let (_, g) = model.sample_loss_and_grad(sample)?;
        fisher.iter_mut().zip(&g).for_each(|(f, gi)| *f += gi * gi);
    }
    fisher.iter_mut().for_each(|f| *f /= n as f64);
    Ok(FisherAnchor {
        anchor_params: model.params.clone(),
        fisher_diag: fisher,
    })
}
