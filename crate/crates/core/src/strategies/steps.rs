use rand::Rng;

use super::{ewc_penalty, DualMemoryState, FisherAnchor, MemoryBuffer, StrategyConfig, StrategyKind};
use crate::error::{Error, Result};
use crate::model::{bce_with_logit, GradAccumulator, ModelState, OptimizerState};
use crate::stream::{Batch, LabeledSample};

/// What one update did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Total objective before the update.
    pub loss: f64,
    /// Total gradient handed to the optimizer.
    pub grad: Vec<f64>,
    /// Buffer samples that contributed to the objective.
    pub replayed: usize,
    /// Incoming samples zeroed out by ESMER's loss gate.
    pub gated_out: usize,
    /// Per-sample backward passes performed.
    pub sample_gradients: usize,
}

type EwcTerm<'a> = Option<(&'a FisherAnchor, f64)>;

fn non_empty(batch: &Batch) -> Result<usize> {
    if batch.is_empty() {
        Err(Error::InvalidArgument("empty training batch".into()))
    } else {
        Ok(batch.len())
    }
}

fn add_ewc(acc: &mut GradAccumulator, model: &ModelState, ewc: EwcTerm<'_>) -> Result<()> {
    if let Some((anchor, lambda)) = ewc {
        if lambda != 0.0 {
            let (value, grad) = ewc_penalty(model, anchor)?;
            acc.add_penalty(value, &grad, lambda);
        }
    }
    Ok(())
}

fn apply(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    acc: GradAccumulator,
    replayed: usize,
    gated_out: usize,
    sample_gradients: usize,
) -> Result<StepReport> {
    let (loss, grad) = acc.finish();
    opt.step(model, &grad)?;
    Ok(StepReport {
        loss,
        grad,
        replayed,
        gated_out,
        sample_gradients,
    })
}

fn store_batch<R: Rng + ?Sized>(
    buf: &mut MemoryBuffer,
    samples: &[LabeledSample],
    logits: &[f64],
    keep: Option<&[bool]>,
    rng: &mut R,
) {
    for (i, (s, z)) in samples.iter().zip(logits).enumerate() {
        if keep.is_none_or(|k| k[i]) {
            buf.insert(s.clone(), *z, rng);
        }
    }
}

/// Plain fine-tuning on the incoming batch.
pub fn step_naive(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
) -> Result<StepReport> {
    let n = non_empty(batch)?;
    let mut acc = GradAccumulator::new(model);
    acc.add_ce(model, &batch.samples, 1.0 / n as f64, None)?;
    apply(model, opt, acc, 0, 0, n)
}

fn replay_inner<R: Rng + ?Sized>(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
    buf: &mut MemoryBuffer,
    ewc: EwcTerm<'_>,
    rng: &mut R,
) -> Result<StepReport> {
    let n = non_empty(batch)?;
    let logits = model.logits(&batch.samples)?;
    let mut acc = GradAccumulator::new(model);
    let replay = buf.sample(n, rng);
    let total = n + replay.len();
    acc.add_ce(model, &batch.samples, 1.0 / total as f64, None)?;
    if !replay.is_empty() {
        acc.add_ce(model, replay.iter().map(|s| &s.sample), 1.0 / total as f64, None)?;
    }
    add_ewc(&mut acc, model, ewc)?;
    let replayed = replay.len();
    let report = apply(model, opt, acc, replayed, 0, total)?;
    store_batch(buf, &batch.samples, &logits, None, rng);
    Ok(report)
}

/// Experience replay: the incoming batch concatenated with a uniform draw
/// from the buffer; the incoming samples are offered to the buffer afterwards.
pub fn step_replay<R: Rng + ?Sized>(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
    buf: &mut MemoryBuffer,
    rng: &mut R,
) -> Result<StepReport> {
    replay_inner(model, opt, batch, buf, None, rng)
}

/// Cross-entropy plus `lambda * sum F (theta - anchor)^2`.
pub fn step_ewc(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
    anchor: &FisherAnchor,
    lambda: f64,
) -> Result<StepReport> {
    let n = non_empty(batch)?;
    let mut acc = GradAccumulator::new(model);
    acc.add_ce(model, &batch.samples, 1.0 / n as f64, None)?;
    add_ewc(&mut acc, model, Some((anchor, lambda)))?;
    apply(model, opt, acc, 0, 0, n)
}

/// Dark experience replay: CE on the batch, `derpp_alpha` times the logit MSE
/// against stored logits on one buffer draw, and `lambda_reg` times CE on a
/// second, independent buffer draw.
pub fn step_derpp<R: Rng + ?Sized>(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
    buf: &mut MemoryBuffer,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<StepReport> {
    let n = non_empty(batch)?;
    let logits = model.logits(&batch.samples)?;
    let mut acc = GradAccumulator::new(model);
    acc.add_ce(model, &batch.samples, 1.0 / n as f64, None)?;
    let mut replayed = 0;
    if cfg.derpp_alpha != 0.0 {
        let draw = buf.sample(n, rng);
        if !draw.is_empty() {
            let scale = cfg.derpp_alpha / draw.len() as f64;
            acc.add_logit_mse(
                model,
                draw.iter().map(|s| (s.sample.features.as_slice(), s.stored_logit)),
                scale,
            )?;
            replayed += draw.len();
        }
    }
    if cfg.lambda_reg != 0.0 {
        let draw = buf.sample(n, rng);
        if !draw.is_empty() {
            let scale = cfg.lambda_reg / draw.len() as f64;
            acc.add_ce(model, draw.iter().map(|s| &s.sample), scale, None)?;
            replayed += draw.len();
        }
    }
    let report = apply(model, opt, acc, replayed, 0, n + replayed)?;
    store_batch(buf, &batch.samples, &logits, None, rng);
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn clser_inner<R: Rng + ?Sized>(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
    buf: &mut MemoryBuffer,
    dual: &mut DualMemoryState,
    lambda: f64,
    ewc: EwcTerm<'_>,
    rng: &mut R,
) -> Result<StepReport> {
    let n = non_empty(batch)?;
    let logits = model.logits(&batch.samples)?;
    let mut acc = GradAccumulator::new(model);
    let replay = buf.sample(n, rng);
    let total = n + replay.len();
    acc.add_ce(model, &batch.samples, 1.0 / total as f64, None)?;
    let mut grads = total;
    if !replay.is_empty() {
        acc.add_ce(model, replay.iter().map(|s| &s.sample), 1.0 / total as f64, None)?;
        if lambda != 0.0 {
            let stable = dual.stable.as_model(model.arch);
            let targets: Vec<f64> = replay
                .iter()
                .map(|s| stable.forward(&s.sample.features))
                .collect::<Result<_>>()?;
            acc.add_logit_mse(
                model,
                replay.iter().zip(&targets).map(|(s, t)| (s.sample.features.as_slice(), *t)),
                lambda / replay.len() as f64,
            )?;
            grads += replay.len();
        }
    }
    add_ewc(&mut acc, model, ewc)?;
    let replayed = replay.len();
    let report = apply(model, opt, acc, replayed, 0, grads)?;
    dual.plastic.update(&model.params)?;
    dual.stable.update(&model.params)?;
    store_batch(buf, &batch.samples, &logits, None, rng);
    Ok(report)
}

/// Dual-memory replay: replayed CE plus a logit-consistency loss towards the
/// stable EMA model (weight `lambda_reg`); both EMAs track the working model.
pub fn step_clser<R: Rng + ?Sized>(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
    buf: &mut MemoryBuffer,
    dual: &mut DualMemoryState,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<StepReport> {
    clser_inner(model, opt, batch, buf, dual, cfg.lambda_reg, None, rng)
}

/// Error-sensitive replay. Incoming samples whose loss exceeds
/// `esmer_beta` times the running loss are dropped from the gradient and
/// from the buffer; buffer samples add `lambda_reg` times their CE.
pub fn step_esmer<R: Rng + ?Sized>(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
    buf: &mut MemoryBuffer,
    dual: &mut DualMemoryState,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<StepReport> {
    let n = non_empty(batch)?;
    let logits = model.logits(&batch.samples)?;
    let losses: Vec<f64> = batch
        .samples
        .iter()
        .zip(&logits)
        .map(|(s, z)| bce_with_logit(*z, s.target()))
        .collect();
    let gates: Option<Vec<bool>> = dual
        .loss_estimate(cfg.esmer_alpha)
        .map(|est| losses.iter().map(|l| *l <= cfg.esmer_beta * est).collect());
    let gated_out = gates.as_ref().map_or(0, |g| g.iter().filter(|k| !**k).count());

    let mut acc = GradAccumulator::new(model);
    acc.add_ce(model, &batch.samples, 1.0 / n as f64, gates.as_deref())?;
    let mut replayed = 0;
    if cfg.lambda_reg != 0.0 {
        let draw = buf.sample(n, rng);
        if !draw.is_empty() {
            let scale = cfg.lambda_reg / draw.len() as f64;
            acc.add_ce(model, draw.iter().map(|s| &s.sample), scale, None)?;
            replayed = draw.len();
        }
    }
    let report = apply(model, opt, acc, replayed, gated_out, n - gated_out + replayed)?;

    let mean_loss = losses.iter().sum::<f64>() / n as f64;
    dual.record_loss(cfg.esmer_alpha, mean_loss);
    dual.stable.update(&model.params)?;
    store_batch(buf, &batch.samples, &logits, gates.as_deref(), rng);
    Ok(report)
}

/// Replay or CLS-ER with `lambda_reg` times the EWC penalty added.
#[allow(clippy::too_many_arguments)]
pub fn step_composite<R: Rng + ?Sized>(
    model: &mut ModelState,
    opt: &mut OptimizerState,
    batch: &Batch,
    buf: &mut MemoryBuffer,
    dual: Option<&mut DualMemoryState>,
    anchor: &FisherAnchor,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<StepReport> {
    let ewc = Some((anchor, cfg.lambda_reg));
    match cfg.kind {
        StrategyKind::ReplayEWC => replay_inner(model, opt, batch, buf, ewc, rng),
        StrategyKind::CLSEREWC => {
            let dual = dual.ok_or_else(|| {
                Error::InvalidArgument("CLSEREWC needs a dual-memory state".into())
            })?;
            clser_inner(model, opt, batch, buf, dual, cfg.lambda_reg, ewc, rng)
        }
        other => Err(Error::InvalidArgument(format!("{other} is not a composite strategy"))),
    }
}
