//! Trains the MLP on one generator and tracks AUC on it and on a generator it
//! never saw.
//!
//! cargo run --release --example train_single_generator -- [batches] [seed]

use timeline_dil::metrics::evaluate_model;
use timeline_dil::model::ModelState;
use timeline_dil::rng::{stream_rng, Stream};
use timeline_dil::stream::{extract_batch, make_eval_set};
use timeline_dil::{Learner, SimulationConfig, StrategyKind};

fn main() -> timeline_dil::Result<()> {
    let mut args = std::env::args().skip(1);
    let batches: usize = args.next().map_or(200, |a| a.parse().expect("batches"));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));

    let config = SimulationConfig::for_strategy(StrategyKind::Naive, 10, seed);
    let schedule = config.schedule.build(seed)?;
    let arch = config.model.arch(schedule.dim());
    let model = ModelState::init(arch, &mut stream_rng(seed, Stream::Init));
    let opt = config.model.optimizer(arch.param_count(), config.strategy.lr);
    let exec = &config.execution;
    let mut learner = Learner::new(config.strategy.clone(), model, opt, exec.batch_size, 0, stream_rng(seed, Stream::Strategy))?;

    let eval: Vec<_> = schedule.generators[..2]
        .iter()
        .map(|g| make_eval_set(g, exec.eval_per_class, seed))
        .collect::<Result<_, _>>()?;
    let mut rng = stream_rng(seed, Stream::Train);
    println!("{:>6} {:>10} {:>10} {:>12}", "batch", "loss", "AUC gen 0", "AUC unseen");
    for i in 1..=batches {
        let batch = extract_batch(0, &schedule, exec.batch_size, &mut rng)?;
        let report = learner.step(&batch)?;
        if i % 20 == 0 || i == 1 {
            let aucs = evaluate_model(&learner.model, &eval)?;
            println!("{i:>6} {:>10.4} {:>10.4} {:>12.4}", report.loss, aucs[0], aucs[1]);
        }
    }
    Ok(())
}
