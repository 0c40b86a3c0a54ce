//! Estimates peak transferability, its decay per release and the compounded
//! AUC expected k releases ahead. Reads a results directory when given one,
//! otherwise runs a small sweep first.
//!
//! cargo run --release --example hypothesis_analysis -- [results_dir]

use std::path::Path;

use timeline_dil::hypothesis::t_decay_with;
use timeline_dil::{analyze, expand_grid, run_sweep, GridSpec, ResultSet};

fn main() -> timeline_dil::Result<()> {
    let results = match std::env::args().nth(1) {
        Some(dir) => ResultSet::load(Path::new(&dir))?,
        None => {
            let grid = GridSpec { master_seed: 3, replicates: 4, monthly_batches: vec![10], ..GridSpec::default() };
            let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
            run_sweep(&expand_grid(&grid)?, threads)?
        }
    };
    let report = analyze(&results);
    let show = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));

    println!("continual-learning runs: {}", report.runs);
    println!("FWT-AUC: {} ± {}", show(report.fwt_mean), show(report.fwt_std));
    println!("t_max: {}", show(report.t_max));
    println!(
        "t_decay (final eval AUC >= {}): {} over {} pairs, {} excluded",
        report.filter_threshold,
        show(report.t_decay),
        report.eligible_pairs,
        report.excluded_pairs
    );
    println!("t_decay without the filter: {}", show(report.t_decay_unfiltered));
    for (k, v) in report.t_comp.iter().enumerate() {
        println!("  expected AUC {k} releases ahead: {v:.4}");
    }

    println!("filter sweep:");
    for th in [0.0, 0.6, 0.7, 0.75, 0.8, 0.85, 0.9] {
        match t_decay_with(&results, Some(th)) {
            Ok((d, n, _)) => println!("  {th:.2}: t_decay {d:.4} from {n} pairs"),
            Err(_) => println!("  {th:.2}: no eligible pairs"),
        }
    }
    Ok(())
}
