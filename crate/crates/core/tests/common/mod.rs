#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timeline_dil::model::{Activation, Arch, ModelState};
use timeline_dil::stream::LabeledSample;

/// Pair-counting AUC: P(score_pos > score_neg) + 0.5 P(tie).
pub fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logit of a one-hidden-layer net written out from the parameter layout
/// [W1 (h rows of d), b1 (h), w2 (h), b2].
pub fn oracle_logit(params: &[f64], arch: Arch, x: &[f64]) -> f64 {
    let (d, h) = (arch.input_dim, arch.hidden_dim);
    let mut z = params[d * h + 2 * h];
    for j in 0..h {
        let mut pre = params[d * h + j];
        for i in 0..d {
            pre += params[j * d + i] * x[i];
        }
        let act = match arch.activation {
            Activation::Tanh => pre.tanh(),
            Activation::Relu => pre.max(0.0),
            Activation::Identity => pre,
        };
        z += params[d * h + h + j] * act;
    }
    z
}

/// Mean binary cross-entropy, computed independently of the library.
pub fn oracle_loss(params: &[f64], arch: Arch, batch: &[LabeledSample]) -> f64 {
    batch
        .iter()
        .map(|s| {
            let z = oracle_logit(params, arch, &s.features);
            if s.label == 1 {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum::<f64>()
        / batch.len() as f64
}

/// Central finite differences of `f` at `params`.
pub fn finite_diff(params: &[f64], step: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|k| {
            let orig = p[k];
            p[k] = orig + step;
            let up = f(&p);
            p[k] = orig - step;
            let down = f(&p);
            p[k] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// ||a - b|| / max(||a||, ||b||), zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_model<R: Rng>(rng: &mut R, arch: Arch, scale: f64) -> ModelState {
    let params = (0..arch.param_count()).map(|_| rng.random_range(-scale..scale)).collect();
    ModelState::from_params(arch, params).unwrap()
}

pub fn random_batch<R: Rng>(rng: &mut R, dim: usize, n: usize) -> Vec<LabeledSample> {
    (0..n)
        .map(|i| {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            if i % 2 == 0 {
                LabeledSample::real(x)
            } else {
                LabeledSample::fake(x, 0)
            }
        })
        .collect()
}

pub fn tanh_arch(d: usize, h: usize) -> Arch {
    Arch {
        input_dim: d,
        hidden_dim: h,
        activation: Activation::Tanh,
    }
}
