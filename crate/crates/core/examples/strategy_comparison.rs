//! Runs every strategy on the same seeds and prints final C-AUC, mean
//! FWT-AUC and the paired gain over Naive.
//!
//! cargo run --release --example strategy_comparison -- [monthly_batches] [seeds]

use timeline_dil::rng::derive_seed;
use timeline_dil::{expand_grid, run_sweep, GridSpec, StrategyKind};

fn main() -> timeline_dil::Result<()> {
    let mut args = std::env::args().skip(1);
    let mb: usize = args.next().map_or(50, |a| a.parse().expect("monthly_batches"));
    let seeds: usize = args.next().map_or(5, |a| a.parse().expect("seeds"));

    let grid = GridSpec {
        master_seed: 7,
        replicates: seeds,
        monthly_batches: vec![mb],
        ..GridSpec::default()
    };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let results = run_sweep(&expand_grid(&grid)?, threads)?;

    let final_c = |kind: StrategyKind, r: u64| {
        let seed = derive_seed(grid.master_seed, r);
        results
            .runs
            .iter()
            .find(|run| run.config.strategy.kind == kind && run.config.seed == seed)
            .and_then(|run| run.series.final_c_auc())
            .unwrap_or(f64::NAN)
    };

    println!("monthly_batches = {mb}, {seeds} paired seeds");
    println!("{:<10} {:>12} {:>12} {:>14}", "strategy", "final C-AUC", "mean FWT", "gain vs Naive");
    for kind in StrategyKind::ALL {
        let runs: Vec<_> = results.runs.iter().filter(|r| r.config.strategy.kind == kind).collect();
        let c = runs.iter().filter_map(|r| r.series.final_c_auc()).sum::<f64>() / runs.len() as f64;
        let f = runs.iter().filter_map(|r| r.series.mean_fwt_auc()).sum::<f64>() / runs.len() as f64;
        let gain = (0..seeds as u64).map(|r| final_c(kind, r) - final_c(StrategyKind::Naive, r)).sum::<f64>()
            / seeds as f64;
        println!("{:<10} {c:>12.4} {f:>12.4} {gain:>+14.4}", kind.name());
    }
    Ok(())
}
