//! Continual-learning update rules.
//!
//! Every rule minimises the incoming batch's cross-entropy plus whatever
//! retention term the strategy adds (replayed samples, an EWC penalty, logit
//! consistency or distillation). A rule with all of its retention mechanisms
//! switched off performs exactly the same floating-point operations as
//! [`step_naive`].

mod buffer;
mod ewc;
mod steps;

use std::borrow::Cow;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use buffer::{BufferSlot, MemoryBuffer};
pub use ewc::{estimate_fisher, ewc_penalty, FisherAnchor};
pub use steps::{
    step_clser, step_composite, step_derpp, step_esmer, step_ewc, step_naive, step_replay,
    StepReport,
};

use crate::error::{Error, Result};
use crate::model::{EmaState, ModelState, OptimizerState};
use crate::rng::SimRng;
use crate::stream::Batch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyKind {
    Naive,
    Replay,
    EWC,
    ReplayEWC,
    CLSER,
    CLSEREWC,
    ESMER,
    DERPP,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::Naive,
        StrategyKind::Replay,
        StrategyKind::EWC,
        StrategyKind::ReplayEWC,
        StrategyKind::CLSER,
        StrategyKind::CLSEREWC,
        StrategyKind::ESMER,
        StrategyKind::DERPP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Naive => "Naive",
            StrategyKind::Replay => "Replay",
            StrategyKind::EWC => "EWC",
            StrategyKind::ReplayEWC => "ReplayEWC",
            StrategyKind::CLSER => "CLSER",
            StrategyKind::CLSEREWC => "CLSEREWC",
            StrategyKind::ESMER => "ESMER",
            StrategyKind::DERPP => "DERPP",
        }
    }

    pub fn uses_buffer(self) -> bool {
        !matches!(self, StrategyKind::Naive | StrategyKind::EWC)
    }

    pub fn uses_ewc(self) -> bool {
        matches!(self, StrategyKind::EWC | StrategyKind::ReplayEWC | StrategyKind::CLSEREWC)
    }

    pub fn uses_dual_memory(self) -> bool {
        matches!(self, StrategyKind::CLSER | StrategyKind::CLSEREWC | StrategyKind::ESMER)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy kind {s:?}")))
    }
}

/// Strategy identity plus every hyperparameter any rule reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub lr: f64,
    /// Weight of the retention term (EWC penalty, consistency loss, buffer CE).
    pub lambda_reg: f64,
    /// Replay memory size, in batches.
    pub buffer_capacity: usize,
    pub plastic_decay: f64,
    pub stable_decay: f64,
    pub esmer_beta: f64,
    pub esmer_alpha: f64,
    pub derpp_alpha: f64,
}

/// Which hyperparameter table a default config comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Values reported for the original vision-backbone experiments.
    Reported,
    /// Same table retuned for the desk-scale MLP.
    #[default]
    Desk,
}

const REPORTED_PLASTIC_DECAY: f64 = 0.99;
const REPORTED_CLSER_STABLE_DECAY: f64 = 0.999;
const REPORTED_ESMER_STABLE_DECAY: f64 = 0.99;
const REPORTED_ESMER_BETA: f64 = 1.0;
const REPORTED_ESMER_ALPHA: f64 = 0.9;
const DEFAULT_DERPP_ALPHA: f64 = 0.5;

/// The three monthly-batch settings the tables are given for.
fn bucket(monthly_batches: usize) -> usize {
    match monthly_batches {
        0..=14 => 10,
        15..=34 => 20,
        _ => 50,
    }
}

impl StrategyConfig {
    /// The reported hyperparameters for `kind` at `monthly_batches`. Gaps in
    /// the table are filled from the nearest setting that lists the value.
    pub fn reported(kind: StrategyKind, monthly_batches: usize) -> Self {
        use StrategyKind::*;
        let mb = bucket(monthly_batches);
        let lr = match (mb, kind) {
            (50, ESMER | CLSER) => 1e-4,
            (50, _) => 1e-5,
            (20, Naive) => 1e-3,
            (20, ESMER | CLSER) => 1e-4,
            (20, _) => 1e-5,
            (_, Naive | DERPP | EWC) => 1e-5,
            (_, _) => 1e-4,
        };
        let buffer_batches = match (mb, kind) {
            (_, Naive | EWC) => 0,
            (50, Replay) => 10,
            (50, _) => 50,
            (20, CLSEREWC | ESMER | CLSER) => 100,
            (20, _) => 50,
            (_, _) => 100,
        };
        let lambda_reg = match (mb, kind) {
            (_, Naive) => 0.0,
            (50, Replay | ReplayEWC | CLSER) => 10.0,
            (50, ESMER | CLSEREWC) => 0.5,
            (50, DERPP) => 0.5,
            (_, ReplayEWC | CLSEREWC | CLSER) => 10.0,
            (_, Replay) => 1.0,
            (_, DERPP | ESMER) => 0.5,
            (_, EWC) => 0.1,
        };
        let (plastic_decay, stable_decay) = match kind {
            CLSER | CLSEREWC => (REPORTED_PLASTIC_DECAY, REPORTED_CLSER_STABLE_DECAY),
            _ => (REPORTED_PLASTIC_DECAY, REPORTED_ESMER_STABLE_DECAY),
        };
        StrategyConfig {
            kind,
            lr,
            lambda_reg,
            buffer_capacity: buffer_batches,
            plastic_decay,
            stable_decay,
            esmer_beta: REPORTED_ESMER_BETA,
            esmer_alpha: REPORTED_ESMER_ALPHA,
            derpp_alpha: DEFAULT_DERPP_ALPHA,
        }
    }

    /// Desk-scale defaults. Learning rates, retention weights, buffer sizes
    /// and two gating/decay constants are retuned for the small MLP: the
    /// reported values were tuned for pretrained backbones, and at this scale
    /// the reported rates barely move the network while the reported
    /// consistency and EWC weights freeze it.
    pub fn desk(kind: StrategyKind, monthly_batches: usize) -> Self {
        use StrategyKind::*;
        let mut cfg = Self::reported(kind, monthly_batches);
        cfg.lr = DESK_LR;
        if kind.uses_buffer() {
            cfg.buffer_capacity = DESK_BUFFER_BATCHES;
        }
        cfg.lambda_reg = match kind {
            Naive | Replay => 0.0,
            EWC => 0.1,
            ReplayEWC | CLSEREWC => 0.03,
            CLSER => 0.1,
            ESMER | DERPP => 0.5,
        };
        if matches!(kind, CLSER | CLSEREWC) {
            cfg.stable_decay = DESK_CLSER_STABLE_DECAY;
        }
        cfg.esmer_beta = DESK_ESMER_BETA;
        cfg.derpp_alpha = DESK_DERPP_ALPHA;
        cfg
    }

    pub fn preset(preset: Preset, kind: StrategyKind, monthly_batches: usize) -> Self {
        match preset {
            Preset::Reported => Self::reported(kind, monthly_batches),
            Preset::Desk => Self::desk(kind, monthly_batches),
        }
    }

    /// The same kind with every retention mechanism switched off.
    pub fn disabled(kind: StrategyKind, lr: f64) -> Self {
        StrategyConfig {
            kind,
            lr,
            lambda_reg: 0.0,
            buffer_capacity: 0,
            plastic_decay: 1.0,
            stable_decay: 1.0,
            esmer_beta: REPORTED_ESMER_BETA,
            esmer_alpha: 1.0,
            derpp_alpha: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        unit("plastic_decay", self.plastic_decay)?;
        unit("stable_decay", self.stable_decay)?;
        unit("esmer_alpha", self.esmer_alpha)?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr = {} must be positive", self.lr)));
        }
        for (name, v) in [
            ("lambda_reg", self.lambda_reg),
            ("esmer_beta", self.esmer_beta),
            ("derpp_alpha", self.derpp_alpha),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

const DESK_LR: f64 = 1e-2;
const DESK_BUFFER_BATCHES: usize = 200;
const DESK_CLSER_STABLE_DECAY: f64 = 0.99;
const DESK_ESMER_BETA: f64 = 3.0;
const DESK_DERPP_ALPHA: f64 = 0.1;

/// Plastic and stable EMA copies of the working model, plus ESMER's running loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualMemoryState {
    pub plastic: EmaState,
    pub stable: EmaState,
    /// Raw (not bias-corrected) running mean of the batch loss.
    pub loss_ema: f64,
    pub loss_updates: u64,
}

impl DualMemoryState {
    pub fn new(params: &[f64], plastic_decay: f64, stable_decay: f64) -> Result<Self> {
        Ok(Self {
            plastic: EmaState::new(params, plastic_decay)?,
            stable: EmaState::new(params, stable_decay)?,
            loss_ema: 0.0,
            loss_updates: 0,
        })
    }

    /// Bias-corrected running loss, once at least one update has happened.
    /// With `alpha == 1` the average never moves and no estimate exists.
    pub fn loss_estimate(&self, alpha: f64) -> Option<f64> {
        if self.loss_updates == 0 || alpha >= 1.0 {
            return None;
        }
        let correction = 1.0 - alpha.powi(self.loss_updates.min(i32::MAX as u64) as i32);
        Some(self.loss_ema / correction)
    }

    pub fn record_loss(&mut self, alpha: f64, batch_loss: f64) {
        self.loss_ema = alpha * self.loss_ema + (1.0 - alpha) * batch_loss;
        self.loss_updates += 1;
    }
}

/// A model plus all state one strategy carries between batches.
#[derive(Debug, Clone)]
pub struct Learner {
    pub config: StrategyConfig,
    pub model: ModelState,
    pub opt: OptimizerState,
    pub buffer: Option<MemoryBuffer>,
    pub anchor: Option<FisherAnchor>,
    pub dual: Option<DualMemoryState>,
    recent: VecDeque<Batch>,
    fisher_batches: usize,
    rng: SimRng,
}

impl Learner {
    /// `opt` supplies weight decay and betas; its learning rate is replaced by
    /// the strategy's. `batch_size` converts the buffer capacity into samples.
    pub fn new(
        config: StrategyConfig,
        model: ModelState,
        mut opt: OptimizerState,
        batch_size: usize,
        fisher_batches: usize,
        rng: SimRng,
    ) -> Result<Self> {
        config.validate()?;
        opt.lr = config.lr;
        let kind = config.kind;
        let buffer = kind
            .uses_buffer()
            .then(|| MemoryBuffer::new(config.buffer_capacity * batch_size));
        let anchor = kind.uses_ewc().then(|| FisherAnchor::zeros(&model.params));
        let dual = if kind.uses_dual_memory() {
            Some(DualMemoryState::new(&model.params, config.plastic_decay, config.stable_decay)?)
        } else {
            None
        };
        Ok(Self {
            config,
            model,
            opt,
            buffer,
            anchor,
            dual,
            recent: VecDeque::new(),
            fisher_batches,
            rng,
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.config.kind
    }

    /// One update on an incoming batch.
    pub fn step(&mut self, batch: &Batch) -> Result<StepReport> {
        use StrategyKind::*;
        let cfg = &self.config;
        let report = match cfg.kind {
            Naive => step_naive(&mut self.model, &mut self.opt, batch)?,
            Replay => step_replay(
                &mut self.model,
                &mut self.opt,
                batch,
                self.buffer.as_mut().expect("replay buffer"),
                &mut self.rng,
            )?,
            EWC => step_ewc(
                &mut self.model,
                &mut self.opt,
                batch,
                self.anchor.as_ref().expect("anchor"),
                cfg.lambda_reg,
            )?,
            ReplayEWC | CLSEREWC => step_composite(
                &mut self.model,
                &mut self.opt,
                batch,
                self.buffer.as_mut().expect("replay buffer"),
                self.dual.as_mut(),
                self.anchor.as_ref().expect("anchor"),
                cfg,
                &mut self.rng,
            )?,
            CLSER => step_clser(
                &mut self.model,
                &mut self.opt,
                batch,
                self.buffer.as_mut().expect("replay buffer"),
                self.dual.as_mut().expect("dual memory"),
                cfg,
                &mut self.rng,
            )?,
            ESMER => step_esmer(
                &mut self.model,
                &mut self.opt,
                batch,
                self.buffer.as_mut().expect("replay buffer"),
                self.dual.as_mut().expect("dual memory"),
                cfg,
                &mut self.rng,
            )?,
            DERPP => step_derpp(
                &mut self.model,
                &mut self.opt,
                batch,
                self.buffer.as_mut().expect("replay buffer"),
                cfg,
                &mut self.rng,
            )?,
        };
        if !self.model.is_finite() {
            return Err(Error::NonFinite(format!(
                "{} parameters diverged after step {}",
                cfg.kind, self.opt.step_count
            )));
        }
        if self.anchor.is_some() && self.fisher_batches > 0 {
            if self.recent.len() == self.fisher_batches {
                self.recent.pop_front();
            }
            self.recent.push_back(batch.clone());
        }
        Ok(report)
    }

    /// Called when a new dataset is released: EWC kinds re-anchor on the most
    /// recent batches.
    pub fn on_release(&mut self) -> Result<()> {
        if self.anchor.is_some() && !self.recent.is_empty() {
            let batches: Vec<Batch> = self.recent.iter().cloned().collect();
            self.anchor = Some(estimate_fisher(&self.model, &batches)?);
        }
        Ok(())
    }

    /// The model used for evaluation: the stable EMA for dual-memory kinds.
    pub fn eval_model(&self) -> Cow<'_, ModelState> {
        match &self.dual {
            Some(d) => Cow::Owned(d.stable.as_model(self.model.arch)),
            None => Cow::Borrowed(&self.model),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("LwF".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn reported_table_values() {
        use StrategyKind::*;
        let c = StrategyConfig::reported(Replay, 50);
        assert_eq!((c.lr, c.buffer_capacity, c.lambda_reg), (1e-5, 10, 10.0));
        let c = StrategyConfig::reported(ESMER, 50);
        assert_eq!((c.lr, c.buffer_capacity, c.lambda_reg), (1e-4, 50, 0.5));
        assert_eq!((c.esmer_beta, c.esmer_alpha, c.stable_decay), (1.0, 0.9, 0.99));
        assert_eq!(StrategyConfig::reported(EWC, 50).lambda_reg, 0.1);
        assert_eq!(StrategyConfig::reported(Naive, 20).lr, 1e-3);
        let c = StrategyConfig::reported(CLSER, 20);
        assert_eq!((c.buffer_capacity, c.lambda_reg), (100, 10.0));
        assert_eq!((c.plastic_decay, c.stable_decay), (0.99, 0.999));
        assert_eq!(StrategyConfig::reported(DERPP, 20).lambda_reg, 0.5);
        assert_eq!(StrategyConfig::reported(Replay, 20).lambda_reg, 1.0);
        assert_eq!(StrategyConfig::reported(ReplayEWC, 10).buffer_capacity, 100);
        assert_eq!(StrategyConfig::reported(DERPP, 10).lr, 1e-5);
        assert_eq!(StrategyConfig::reported(Replay, 10).lr, 1e-4);
        assert_eq!(StrategyConfig::reported(Naive, 10).buffer_capacity, 0);
    }

    #[test]
    fn validation() {
        let mut c = StrategyConfig::desk(StrategyKind::CLSER, 10);
        assert!(c.validate().is_ok());
        c.stable_decay = 1.5;
        assert!(c.validate().is_err());
        let mut c = StrategyConfig::desk(StrategyKind::EWC, 10);
        c.lambda_reg = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn loss_estimate_is_bias_corrected() {
        let mut d = DualMemoryState::new(&[0.0], 0.9, 0.9).unwrap();
        assert_eq!(d.loss_estimate(0.9), None);
        d.record_loss(0.9, 2.0);
        assert!((d.loss_ema - 0.2).abs() < 1e-15);
        assert!((d.loss_estimate(0.9).unwrap() - 2.0).abs() < 1e-12);
        d.record_loss(1.0, 5.0);
        assert_eq!(d.loss_estimate(1.0), None);
    }
}
