//! Single-hidden-layer MLP with hand-written backprop, AdamW, cosine learning
//! rate schedule and EMA parameter copies. Everything is `f64`.
//!
//! Parameter layout (flat): `W1` (hidden x input, row major), `b1` (hidden),
//! `w2` (hidden), `b2` (1).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::stream::LabeledSample;

pub const DEFAULT_HIDDEN_DIM: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation and the activation value.
    #[inline]
    fn derivative(self, pre: f64, act: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - act * act,
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
}

impl Arch {
    pub fn param_count(&self) -> usize {
        self.input_dim * self.hidden_dim + 2 * self.hidden_dim + 1
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Binary cross-entropy of a logit against a 0/1 target.
#[inline]
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    softplus(z) - y * z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub arch: Arch,
    pub params: Vec<f64>,
}

impl ModelState {
    pub fn zeros(arch: Arch) -> Self {
        Self {
            arch,
            params: vec![0.0; arch.param_count()],
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(arch: Arch, rng: &mut R) -> Self {
        let mut m = Self::zeros(arch);
        let (d, h) = (arch.input_dim, arch.hidden_dim);
        let a1 = (6.0 / (d + h) as f64).sqrt();
        let a2 = (6.0 / (h + 1) as f64).sqrt();
        for w in &mut m.params[..d * h] {
            *w = rng.random_range(-a1..a1);
        }
        let w2 = d * h + h;
        for w in &mut m.params[w2..w2 + h] {
            *w = rng.random_range(-a2..a2);
        }
        m
    }

    pub fn from_params(arch: Arch, params: Vec<f64>) -> Result<Self> {
        check_len(arch.param_count(), params.len())?;
        Ok(Self { arch, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let (d, h) = (self.arch.input_dim, self.arch.hidden_dim);
        (d * h, d * h + h, d * h + 2 * h)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        check_len(self.arch.input_dim, features.len())?;
        let mut scratch = Scratch::new(self.arch.hidden_dim);
        Ok(self.forward_into(features, &mut scratch))
    }

    /// Logits for every sample.
    pub fn logits(&self, samples: &[LabeledSample]) -> Result<Vec<f64>> {
        let mut scratch = Scratch::new(self.arch.hidden_dim);
        samples
            .iter()
            .map(|s| {
                check_len(self.arch.input_dim, s.features.len())?;
                Ok(self.forward_into(&s.features, &mut scratch))
            })
            .collect()
    }

    fn forward_into(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        let (d, h) = (self.arch.input_dim, self.arch.hidden_dim);
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let mut z = p[b2];
        for j in 0..h {
            let row = &p[j * d..(j + 1) * d];
            let pre = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + p[b1 + j];
            let act = self.arch.activation.apply(pre);
            scratch.pre[j] = pre;
            scratch.act[j] = act;
            z += p[w2 + j] * act;
        }
        z
    }

    /// Adds `dlogit * d(logit)/d(params)` into `grad`. `scratch` must hold the
    /// forward pass for `x`.
    fn backward_into(&self, x: &[f64], dlogit: f64, scratch: &Scratch, grad: &mut [f64]) {
        let (d, h) = (self.arch.input_dim, self.arch.hidden_dim);
        let (b1, w2, b2) = self.offsets();
        grad[b2] += dlogit;
        for j in 0..h {
            grad[w2 + j] += dlogit * scratch.act[j];
            let delta = dlogit
                * self.params[w2 + j]
                * self.arch.activation.derivative(scratch.pre[j], scratch.act[j]);
            grad[b1 + j] += delta;
            if delta != 0.0 {
                for (g, xi) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *g += delta * xi;
                }
            }
        }
    }

    /// Mean binary cross-entropy over `samples` and its gradient.
    pub fn loss_and_grad(&self, samples: &[LabeledSample]) -> Result<(f64, Vec<f64>)> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("loss over an empty batch".into()));
        }
        let mut acc = GradAccumulator::new(self);
        acc.add_ce(self, samples, 1.0 / samples.len() as f64, None)?;
        Ok(acc.finish())
    }

    /// Cross-entropy and gradient for a single sample.
    pub fn sample_loss_and_grad(&self, sample: &LabeledSample) -> Result<(f64, Vec<f64>)> {
        self.loss_and_grad(std::slice::from_ref(sample))
    }
}

struct Scratch {
    pre: Vec<f64>,
    act: Vec<f64>,
}

impl Scratch {
    fn new(h: usize) -> Self {
        Self {
            pre: vec![0.0; h],
            act: vec![0.0; h],
        }
    }
}

/// Accumulates a composite objective term by term. Every strategy builds its
/// loss through this type so that disabled terms leave the arithmetic of the
/// remaining ones untouched.
pub struct GradAccumulator {
    loss: f64,
    grad: Vec<f64>,
    scratch: Scratch,
}

impl GradAccumulator {
    pub fn new(model: &ModelState) -> Self {
        Self {
            loss: 0.0,
            grad: vec![0.0; model.param_count()],
            scratch: Scratch::new(model.arch.hidden_dim),
        }
    }

    /// Adds `scale * sum_i gate_i * CE_i`; samples whose gate is false are skipped.
    pub fn add_ce<'a, I>(
        &mut self,
        model: &ModelState,
        samples: I,
        scale: f64,
        gates: Option<&[bool]>,
    ) -> Result<()>
    where
        I: IntoIterator<Item = &'a LabeledSample>,
    {
        for (i, s) in samples.into_iter().enumerate() {
            if let Some(g) = gates {
                if !g[i] {
                    continue;
                }
            }
            check_len(model.arch.input_dim, s.features.len())?;
            let z = model.forward_into(&s.features, &mut self.scratch);
            let y = s.target();
            self.loss += scale * bce_with_logit(z, y);
            model.backward_into(&s.features, scale * (sigmoid(z) - y), &self.scratch, &mut self.grad);
        }
        Ok(())
    }

    /// Adds `scale * sum_i (logit_i - target_i)^2`.
    pub fn add_logit_mse<'a, I>(&mut self, model: &ModelState, pairs: I, scale: f64) -> Result<()>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        for (x, target) in pairs {
            check_len(model.arch.input_dim, x.len())?;
            let z = model.forward_into(x, &mut self.scratch);
            let r = z - target;
            self.loss += scale * r * r;
            model.backward_into(x, scale * 2.0 * r, &self.scratch, &mut self.grad);
        }
        Ok(())
    }

    /// Adds a precomputed penalty and its gradient, scaled.
    pub fn add_penalty(&mut self, value: f64, grad: &[f64], scale: f64) {
        self.loss += scale * value;
        self.grad.iter_mut().zip(grad).for_each(|(g, p)| *g += scale * p);
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn finish(self) -> (f64, Vec<f64>) {
        (self.loss, self.grad)
    }
}

pub const DEFAULT_BETAS: (f64, f64) = (0.9, 0.999);
pub const DEFAULT_EPS: f64 = 1e-8;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;

/// AdamW with decoupled weight decay and bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(n_params: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
            lr,
            weight_decay,
            betas: DEFAULT_BETAS,
            eps: DEFAULT_EPS,
        }
    }

    pub fn with_betas(mut self, betas: (f64, f64), eps: f64) -> Self {
        self.betas = betas;
        self.eps = eps;
        self
    }

    pub fn step(&mut self, model: &mut ModelState, grad: &[f64]) -> Result<()> {
        check_len(model.params.len(), grad.len())?;
        check_len(model.params.len(), self.first_moment.len())?;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {i} is {}", grad[i])));
        }
        self.step_count += 1;
        let (b1, b2) = self.betas;
        let t = self.step_count as i32;
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        let decay = 1.0 - self.lr * self.weight_decay;
        for (((p, g), m), v) in model
            .params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *p *= decay;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Free-function form of [`OptimizerState::step`].
pub fn adamw_step(model: &mut ModelState, opt: &mut OptimizerState, grad: &[f64]) -> Result<()> {
    opt.step(model, grad)
}

/// Cosine annealing from `base_lr` at step 0 to zero at `t_max`.
pub fn cosine_lr(step: u64, base_lr: f64, t_max: u64) -> Result<f64> {
    if step > t_max {
        return Err(Error::InvalidArgument(format!("step {step} beyond t_max {t_max}")));
    }
    if t_max == 0 {
        return Ok(base_lr);
    }
    let phase = std::f64::consts::PI * step as f64 / t_max as f64;
    Ok(base_lr * 0.5 * (1.0 + phase.cos()))
}

/// Exponential moving average of a parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaState {
    pub shadow_params: Vec<f64>,
    pub decay: f64,
}

impl EmaState {
    pub fn new(params: &[f64], decay: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::InvalidArgument(format!("EMA decay {decay} outside [0, 1]")));
        }
        Ok(Self {
            shadow_params: params.to_vec(),
            decay,
        })
    }

    pub fn update(&mut self, params: &[f64]) -> Result<()> {
        check_len(self.shadow_params.len(), params.len())?;
        let d = self.decay;
        for (s, p) in self.shadow_params.iter_mut().zip(params) {
            *s = d * *s + (1.0 - d) * p;
        }
        Ok(())
    }

    pub fn as_model(&self, arch: Arch) -> ModelState {
        ModelState {
            arch,
            params: self.shadow_params.clone(),
        }
    }
}
