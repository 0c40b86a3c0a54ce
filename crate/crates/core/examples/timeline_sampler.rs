//! Shows which dataset the timeline sampler feeds the learner month by month,
//! against the halving weights it draws from.
//!
//! cargo run --release --example timeline_sampler -- [seed]

use timeline_dil::rng::{stream_rng, Stream};
use timeline_dil::stream::{select_dataset, selection_probabilities};
use timeline_dil::SimulationConfig;

fn main() -> timeline_dil::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |a| a.parse().expect("seed"));
    let config = SimulationConfig { seed, ..SimulationConfig::default() };
    let schedule = config.schedule.build(seed)?;
    let mut rng = stream_rng(seed, Stream::Train);
    let draws = 2_000;

    let n = schedule.n_generators();
    println!("release months: {:?}", schedule.generators.iter().map(|g| g.release_month).collect::<Vec<_>>());
    println!("{:>5}  {:<48}  observed", "month", "expected (newest first)");
    let last = schedule.horizon_months - 1;
    for month in (0..schedule.horizon_months).filter(|m| schedule.is_release_month(*m) || *m == last) {
        let released = schedule.released_newest_first(month);
        let probs = selection_probabilities(released.len())?;
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            counts[select_dataset(month, &schedule, &mut rng)? as usize] += 1;
        }
        let expected: Vec<String> = released.iter().zip(&probs).map(|(id, p)| format!("{id}:{p:.3}")).collect();
        let observed: Vec<String> = released
            .iter()
            .map(|id| format!("{id}:{:.3}", counts[*id as usize] as f64 / draws as f64))
            .collect();
        println!("{month:>5}  {:<48}  {}", expected.join(" "), observed.join(" "));
    }
    Ok(())
}
