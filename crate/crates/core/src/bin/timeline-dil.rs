use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use timeline_dil::runner::{run_job, ARTIFACTS};
use timeline_dil::{analyze, emit_reports, expand_grid, run_sweep, Error, GridSpec, Job, ResultSet, SimulationConfig};

#[derive(Parser)]
#[command(version, about = "Continual-learning timeline simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one continual-learning simulation.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full-retraining baseline.
    Baseline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configuration of a grid file.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the transferability statistics of a results directory.
    Analyze {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 0.75)]
        min_eval_auc: f64,
    },
    /// Regenerate report files and print the summary table.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn single(job: Job, out: &Path) -> timeline_dil::Result<()> {
    let record = run_job(&job)?;
    eprintln!("{} finished in {:.2}s", record.run_id, record.wall_clock_secs);
    emit_reports(&ResultSet::new(vec![record]), out)?;
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> timeline_dil::Result<SimulationConfig> {
    let mut cfg = SimulationConfig::from_json_file(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> timeline_dil::Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => single(Job::simulate(load_config(&config, seed)?), &out),
        Command::Baseline { config, seed, out } => single(Job::baseline(load_config(&config, seed)?), &out),
        Command::Sweep { grid, out, jobs } => {
            let text = std::fs::read_to_string(&grid).map_err(|e| Error::Io {
                path: grid.clone(),
                source: e,
            })?;
            let spec: GridSpec = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", grid.display())))?;
            let jobs_list = expand_grid(&spec)?;
            let results = run_sweep(&jobs_list, jobs)?.with_threshold(spec.filter_threshold)?;
            eprintln!("{} runs, {} failures", results.runs.len(), results.failures.len());
            for f in &results.failures {
                eprintln!("failed {}: {}", f.run_id, f.error);
            }
            emit_reports(&results, &out)?;
            Ok(())
        }
        Command::Analyze { results, min_eval_auc } => {
            let set = ResultSet::load(&results)?.with_threshold(min_eval_auc)?;
            println!("{}", serde_json::to_string_pretty(&analyze(&set))?);
            Ok(())
        }
        Command::Report { results, format } => {
            let set = ResultSet::load(&results)?;
            emit_reports(&set, &results)?;
            let name = match format {
                Format::Csv => ARTIFACTS[4],
                Format::Json => ARTIFACTS[3],
            };
            let path = results.join(name);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path, source: e })?;
            print!("{text}");
            Ok(())
        }
    }
}

fn fail(code: &str, message: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": code, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.code(), e.to_string()),
    }
}
