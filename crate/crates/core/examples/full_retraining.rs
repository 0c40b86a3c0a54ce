//! Full retraining at every release versus a continual learner: accuracy on
//! seen datasets and the compute counters of both.
//!
//! cargo run --release --example full_retraining -- [seed]

use timeline_dil::{run_full_retraining, run_simulation, SimulationConfig, StrategyKind};

fn main() -> timeline_dil::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(1, |a| a.parse().expect("seed"));
    let config = SimulationConfig::for_strategy(StrategyKind::Replay, 10, seed);

    let baseline = run_full_retraining(&config)?;
    let continual = run_simulation(&config)?;

    println!("{:>5} {:>6} {:>12} {:>12}", "event", "month", "retrain C", "Replay C");
    for (b, c) in baseline.events.iter().zip(&continual.events) {
        println!("{:>5} {:>6} {:>12.4} {:>12.4}", b.event, b.month, b.c_auc, c.c_auc);
    }
    for (name, r) in [("full retraining", &baseline), ("Replay", &continual)] {
        let l = r.ledger;
        println!(
            "{name:>16}: samples {:>9}  unique {:>7}  updates {:>6}  sample grads {:>9}  {:.2}s",
            l.samples_processed, l.unique_samples, l.parameter_updates, l.sample_gradients, r.wall_clock_secs
        );
    }
    println!(
        "sample ratio: {:.1}x",
        baseline.ledger.samples_processed as f64 / continual.ledger.samples_processed as f64
    );
    Ok(())
}
