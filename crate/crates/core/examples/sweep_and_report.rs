//! Runs a grid file and writes the report files (per-event JSONL, CSV tables,
//! per-run AUC matrices and the hypothesis summary).
//!
//! cargo run --release --example sweep_and_report -- [grid.json] [out_dir]

use std::path::PathBuf;

use timeline_dil::{emit_reports, expand_grid, run_sweep, Error, GridSpec};

fn main() -> timeline_dil::Result<()> {
    let mut args = std::env::args().skip(1);
    let grid_path = PathBuf::from(args.next().unwrap_or_else(|| "examples/configs/grid.json".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sweep-out".into()));

    let text = std::fs::read_to_string(&grid_path).map_err(|e| Error::Io { path: grid_path.clone(), source: e })?;
    let grid: GridSpec = serde_json::from_str(&text)?;
    let jobs = expand_grid(&grid)?;
    println!("{} jobs from {}", jobs.len(), grid_path.display());

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let results = run_sweep(&jobs, threads)?.with_threshold(grid.filter_threshold)?;
    for f in &results.failures {
        println!("failed {} ({:?}): {}", f.run_id, f.method, f.error);
    }
    for path in emit_reports(&results, &out)? {
        if path.parent() == Some(out.as_path()) {
            println!("wrote {}", path.display());
        }
    }
    print!("{}", std::fs::read_to_string(out.join("summary.csv")).map_err(|e| Error::Io { path: out.join("summary.csv"), source: e })?);
    Ok(())
}
