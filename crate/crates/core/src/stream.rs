//! Synthetic chronological data stream.
//!
//! Each generator adds its own signature direction to otherwise standard-normal
//! "real" features. Signatures are mutually orthogonal, so a detector that has
//! learned one generator carries no information about the others. Datasets are
//! selected newest-first with exponentially decaying probabilities.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, SimRng, Stream};

pub const DEFAULT_DIM: usize = 32;
pub const DEFAULT_STRENGTH: f64 = 3.0;
pub const DEFAULT_NOISE_SCALE: f64 = 0.5;
pub const DEFAULT_HORIZON_MONTHS: u32 = 80;
pub const DEFAULT_RELEASE_MONTHS: [u32; 6] = [0, 27, 29, 36, 60, 67];
pub const DEFAULT_BATCH_SIZE: usize = 16;
pub const ORTHOGONALITY_TOLERANCE: f64 = 0.05;

/// A synthetic deepfake generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub id: u32,
    pub release_month: u32,
    /// Unit-norm direction added to fakes.
    pub signature: Vec<f64>,
    pub strength: f64,
    pub noise_scale: f64,
}

impl GeneratorSpec {
    pub fn dim(&self) -> usize {
        self.signature.len()
    }
}

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Real,
    Generator(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: u8,
    pub origin: Origin,
}

impl LabeledSample {
    pub fn real(features: Vec<f64>) -> Self {
        Self {
            features,
            label: 0,
            origin: Origin::Real,
        }
    }

    pub fn fake(features: Vec<f64>, generator: u32) -> Self {
        Self {
            features,
            label: 1,
            origin: Origin::Generator(generator),
        }
    }

    pub fn target(&self) -> f64 {
        f64::from(self.label)
    }
}

/// A class-balanced training batch drawn from one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub samples: Vec<LabeledSample>,
    pub source_dataset: u32,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// How often the runner evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalCadence {
    /// At every release month plus the final month.
    #[default]
    PerRelease,
    /// At the end of every month.
    Monthly,
}

/// Timeline of generator releases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseSchedule {
    pub generators: Vec<GeneratorSpec>,
    pub horizon_months: u32,
    /// Months (sorted, unique) at whose end a full evaluation runs.
    pub eval_events: Vec<u32>,
}

impl ReleaseSchedule {
    pub fn new(
        generators: Vec<GeneratorSpec>,
        horizon_months: u32,
        cadence: EvalCadence,
    ) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one generator".into()));
        }
        for (i, w) in generators.windows(2).enumerate() {
            if w[1].release_month <= w[0].release_month {
                return Err(Error::InvalidArgument(format!(
                    "release months must strictly increase (generator {} at {} after {})",
                    i + 1,
                    w[1].release_month,
                    w[0].release_month
                )));
            }
        }
        for (i, g) in generators.iter().enumerate() {
            if g.id as usize != i {
                return Err(Error::InvalidArgument(format!(
                    "generator ids must be chronological indices, found {} at position {i}",
                    g.id
                )));
            }
        }
        let last_release = generators.last().map(|g| g.release_month).unwrap_or(0);
        if horizon_months <= last_release {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon_months} does not cover release month {last_release}"
            )));
        }
        let final_month = horizon_months - 1;
        let mut eval_events: Vec<u32> = match cadence {
            EvalCadence::PerRelease => generators.iter().map(|g| g.release_month).collect(),
            EvalCadence::Monthly => (generators[0].release_month..horizon_months).collect(),
        };
        eval_events.push(final_month);
        eval_events.sort_unstable();
        eval_events.dedup();
        Ok(Self {
            generators,
            horizon_months,
            eval_events,
        })
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn dim(&self) -> usize {
        self.generators[0].dim()
    }

    pub fn generator(&self, id: u32) -> Result<&GeneratorSpec> {
        self.generators
            .get(id as usize)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown generator id {id}")))
    }

    pub fn is_release_month(&self, month: u32) -> bool {
        self.generators.iter().any(|g| g.release_month == month)
    }

    /// Generators released by `month`, newest first.
    pub fn released_newest_first(&self, month: u32) -> Vec<u32> {
        self.generators
            .iter()
            .rev()
            .filter(|g| g.release_month <= month)
            .map(|g| g.id)
            .collect()
    }

    /// Index of the first evaluation event at which each generator counts as released.
    pub fn released_at(&self) -> Vec<usize> {
        self.generators
            .iter()
            .map(|g| {
                self.eval_events
                    .iter()
                    .position(|&m| m >= g.release_month)
                    .unwrap_or(self.eval_events.len())
            })
            .collect()
    }
}

fn gaussian_vec<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Builds `n_generators` generators with mutually orthogonal signatures.
///
/// Release months are spread evenly over the default horizon; schedules with
/// explicit months override them (see `runner::ScheduleSpec`).
pub fn build_registry(
    n_generators: usize,
    dim: usize,
    strength: f64,
    seed: u64,
) -> Result<Vec<GeneratorSpec>> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dim must be >= 2, got {dim}")));
    }
    if n_generators == 0 {
        return Err(Error::InvalidArgument("need at least one generator".into()));
    }
    if n_generators > dim {
        return Err(Error::InvalidArgument(format!(
            "{n_generators} orthogonal signatures do not fit in dimension {dim}"
        )));
    }
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(Error::InvalidArgument(format!("strength must be positive, got {strength}")));
    }
    let mut rng = stream_rng(seed, Stream::Registry);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n_generators);
    while basis.len() < n_generators {
        let mut v = gaussian_vec(dim, &mut rng);
        // Two Gram-Schmidt passes keep the residual overlap at rounding level.
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    let spacing = DEFAULT_HORIZON_MONTHS / n_generators as u32;
    Ok(basis
        .into_iter()
        .enumerate()
        .map(|(i, signature)| GeneratorSpec {
            id: i as u32,
            release_month: i as u32 * spacing.max(1),
            signature,
            strength,
            noise_scale: DEFAULT_NOISE_SCALE,
        })
        .collect())
}

pub fn sample_real<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> LabeledSample {
    LabeledSample::real(gaussian_vec(dim, rng))
}

/// Real draw, plus `strength * signature`, plus isotropic noise of scale `noise_scale`.
pub fn sample_fake<R: Rng + ?Sized>(generator: &GeneratorSpec, rng: &mut R) -> LabeledSample {
    let mut features = gaussian_vec(generator.dim(), rng);
    for (x, s) in features.iter_mut().zip(&generator.signature) {
        let noise: f64 = rng.sample(StandardNormal);
        *x += generator.strength * s + generator.noise_scale * noise;
    }
    LabeledSample::fake(features, generator.id)
}

/// Newest-first selection probabilities: P(i) = 0.5^(i+1) / sum_j 0.5^(j+1).
pub fn selection_probabilities(n_released: usize) -> Result<Vec<f64>> {
    if n_released == 0 {
        return Err(Error::InvalidArgument("no released datasets to select from".into()));
    }
    let weights: Vec<f64> = (0..n_released).map(|i| 0.5 * 0.5f64.powi(i as i32)).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Draws the dataset that supplies the next batch at `month`.
pub fn select_dataset<R: Rng + ?Sized>(
    month: u32,
    schedule: &ReleaseSchedule,
    rng: &mut R,
) -> Result<u32> {
    let released = schedule.released_newest_first(month);
    if released.is_empty() {
        return Err(Error::NothingReleased(month));
    }
    let probs = selection_probabilities(released.len())?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (id, p) in released.iter().zip(&probs) {
        acc += p;
        if u < acc {
            return Ok(*id);
        }
    }
    Ok(*released.last().expect("non-empty"))
}

pub fn extract_batch<R: Rng + ?Sized>(
    generator_id: u32,
    schedule: &ReleaseSchedule,
    batch_size: usize,
    rng: &mut R,
) -> Result<Batch> {
    if batch_size < 2 || !batch_size.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "batch size must be even and >= 2, got {batch_size}"
        )));
    }
    let generator = schedule.generator(generator_id)?;
    let half = batch_size / 2;
    let mut samples = Vec::with_capacity(batch_size);
    for _ in 0..half {
        samples.push(sample_real(generator.dim(), rng));
    }
    for _ in 0..half {
        samples.push(sample_fake(generator, rng));
    }
    Ok(Batch {
        samples,
        source_dataset: generator_id,
    })
}

/// Held-out test set for one generator, drawn from its reserved evaluation stream.
pub fn make_eval_set(
    generator: &GeneratorSpec,
    n_per_class: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    if n_per_class == 0 {
        return Err(Error::InvalidArgument("eval set needs at least one sample per class".into()));
    }
    let mut rng = stream_rng(seed, Stream::Eval(generator.id));
    Ok(draw_pool(generator, n_per_class, &mut rng))
}

pub(crate) fn draw_pool(
    generator: &GeneratorSpec,
    n_per_class: usize,
    rng: &mut SimRng,
) -> Vec<LabeledSample> {
    let mut out = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        out.push(sample_real(generator.dim(), rng));
    }
    for _ in 0..n_per_class {
        out.push(sample_fake(generator, rng));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule(months: &[u32], horizon: u32) -> ReleaseSchedule {
        let mut gens = build_registry(months.len(), 8, 1.0, 3).unwrap();
        for (g, m) in gens.iter_mut().zip(months) {
            g.release_month = *m;
        }
        ReleaseSchedule::new(gens, horizon, EvalCadence::PerRelease).unwrap()
    }

    #[test]
    fn single_generator_is_unit_norm() {
        let gens = build_registry(1, 8, 1.0, 0).unwrap();
        assert_eq!(gens.len(), 1);
        let norm = dot(&gens[0].signature, &gens[0].signature).sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn six_generators_are_near_orthogonal() {
        let gens = build_registry(6, 32, 1.0, 7).unwrap();
        assert_eq!(gens.len(), 6);
        let mut pairs = 0;
        for i in 0..6 {
            for j in (i + 1)..6 {
                let d = dot(&gens[i].signature, &gens[j].signature).abs();
                assert!(d <= ORTHOGONALITY_TOLERANCE, "pair ({i},{j}) dot {d}");
                pairs += 1;
            }
        }
        assert_eq!(pairs, 15);
    }

    #[test]
    fn registry_rejects_bad_arguments() {
        assert!(build_registry(9, 8, 1.0, 0).is_err());
        assert!(build_registry(1, 1, 1.0, 0).is_err());
        assert!(build_registry(1, 0, 1.0, 0).is_err());
        assert!(build_registry(2, 8, 0.0, 0).is_err());
        assert!(build_registry(2, 8, -1.0, 0).is_err());
    }

    #[test]
    fn real_samples_are_standard_normal() {
        let mut rng = stream_rng(1, Stream::Train);
        let dim = 4;
        let n = 10_000;
        let mut mean = vec![0.0; dim];
        for _ in 0..n {
            let s = sample_real(dim, &mut rng);
            assert_eq!(s.label, 0);
            assert_eq!(s.origin, Origin::Real);
            mean.iter_mut().zip(&s.features).for_each(|(m, x)| *m += x / n as f64);
        }
        assert!(mean.iter().all(|m| m.abs() < 0.05), "{mean:?}");
    }

    #[test]
    fn same_rng_state_gives_same_draw() {
        let a = sample_real(5, &mut stream_rng(4, Stream::Train));
        let b = sample_real(5, &mut stream_rng(4, Stream::Train));
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_generator_matches_real_draws() {
        let mut g = build_registry(1, 6, 1.0, 0).unwrap().remove(0);
        g.strength = 0.0;
        g.noise_scale = 0.0;
        let fake = sample_fake(&g, &mut stream_rng(2, Stream::Train));
        let real = sample_real(6, &mut stream_rng(2, Stream::Train));
        assert_eq!(fake.features, real.features);
        assert_eq!(fake.label, 1);
    }

    #[test]
    fn fake_projection_means() {
        let gens = build_registry(2, 16, 1.0, 11).unwrap();
        let mut rng = stream_rng(5, Stream::Train);
        let n = 10_000;
        let (mut own, mut other) = (0.0, 0.0);
        for _ in 0..n {
            let s = sample_fake(&gens[0], &mut rng);
            own += dot(&s.features, &gens[0].signature) / n as f64;
            other += dot(&s.features, &gens[1].signature) / n as f64;
        }
        assert!((own - 1.0).abs() < 0.05, "own projection {own}");
        assert!(other.abs() < 0.05, "cross projection {other}");
    }

    #[test]
    fn probabilities_small_cases() {
        assert_eq!(selection_probabilities(1).unwrap(), vec![1.0]);
        let p2 = selection_probabilities(2).unwrap();
        assert!((p2[0] - 2.0 / 3.0).abs() < 1e-15 && (p2[1] - 1.0 / 3.0).abs() < 1e-15);
        let p3 = selection_probabilities(3).unwrap();
        for (p, e) in p3.iter().zip([4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0]) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!(selection_probabilities(0).is_err());
    }

    #[test]
    fn select_dataset_edge_cases() {
        let s = schedule(&[3, 10], 20);
        let mut rng = stream_rng(0, Stream::Train);
        assert!(matches!(select_dataset(2, &s, &mut rng), Err(Error::NothingReleased(2))));
        for _ in 0..100 {
            assert_eq!(select_dataset(5, &s, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn batch_composition() {
        let s = schedule(&[0], 4);
        let mut rng = stream_rng(0, Stream::Train);
        let b = extract_batch(0, &s, 16, &mut rng).unwrap();
        assert_eq!(b.samples.iter().filter(|x| x.label == 0).count(), 8);
        assert_eq!(b.samples.iter().filter(|x| x.label == 1).count(), 8);
        let b = extract_batch(0, &s, 2, &mut rng).unwrap();
        assert_eq!(b.samples.iter().map(|x| x.label).collect::<Vec<_>>(), vec![0, 1]);
        assert!(extract_batch(0, &s, 15, &mut rng).is_err());
        assert!(extract_batch(0, &s, 0, &mut rng).is_err());
    }

    #[test]
    fn eval_sets() {
        let s = schedule(&[0], 4);
        let e = make_eval_set(&s.generators[0], 500, 1).unwrap();
        assert_eq!(e.len(), 1000);
        assert_eq!(e.iter().filter(|x| x.label == 1).count(), 500);
        assert_eq!(e, make_eval_set(&s.generators[0], 500, 1).unwrap());
        assert!(make_eval_set(&s.generators[0], 0, 1).is_err());
    }

    #[test]
    fn schedule_events_and_release_index() {
        let s = schedule(&[0, 27, 29, 36, 60, 67], 80);
        assert_eq!(s.eval_events, vec![0, 27, 29, 36, 60, 67, 79]);
        assert_eq!(s.released_at(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(s.released_newest_first(30), vec![2, 1, 0]);
        let mut gens = s.generators.clone();
        gens.swap(0, 1);
        assert!(ReleaseSchedule::new(gens, 80, EvalCadence::PerRelease).is_err());
        assert!(ReleaseSchedule::new(s.generators.clone(), 67, EvalCadence::PerRelease).is_err());
        let monthly = ReleaseSchedule::new(s.generators, 80, EvalCadence::Monthly).unwrap();
        assert_eq!(monthly.eval_events.len(), 80);
        assert_eq!(monthly.released_at(), vec![0, 27, 29, 36, 60, 67]);
    }
}
