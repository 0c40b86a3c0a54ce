use std::collections::BTreeSet;

use proptest::prelude::*;
use timeline_dil::runner::{run_job, ARTIFACTS};
use timeline_dil::{
    emit_reports, expand_grid, run_full_retraining, run_simulation, run_sweep, GridSpec, Job,
    Method, ResultSet, SimulationConfig, StrategyKind,
};

fn small(kind: StrategyKind, seed: u64) -> SimulationConfig {
    let mut c = SimulationConfig::for_strategy(kind, 2, seed);
    c.schedule.n_generators = 3;
    c.schedule.dim = 8;
    c.schedule.release_months = vec![0, 4, 7];
    c.schedule.horizon_months = 10;
    c.model.hidden_dim = 6;
    c.execution.eval_per_class = 30;
    c.execution.retrain_iterations = 40;
    c.execution.retrain_pool_per_class = 60;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn samples_are_conserved(mb in 1usize..5, half in 1usize..5, horizon in 9u32..14, seed in any::<u64>(), k in 0usize..8) {
        let mut c = small(StrategyKind::ALL[k], seed);
        c.execution.monthly_batches = mb;
        c.execution.batch_size = 2 * half;
        c.schedule.horizon_months = horizon;
        c.strategy.buffer_capacity = 2;
        let r = run_simulation(&c).unwrap();
        let expected = (horizon as u64) * mb as u64 * 2 * half as u64;
        prop_assert_eq!(r.ledger.samples_processed, expected);
        prop_assert!(r.ledger.unique_samples <= r.ledger.samples_processed);
        prop_assert_eq!(r.events.len(), 4);
        for w in r.events.windows(2) {
            prop_assert!(w[1].ledger.samples_processed >= w[0].ledger.samples_processed);
            prop_assert!(w[1].ledger.parameter_updates >= w[0].ledger.parameter_updates);
        }
        r.matrix.validate().unwrap();
    }
}

#[test]
fn default_schedule_sample_counts() {
    for (mb, expected) in [(10, 12_800), (50, 64_000)] {
        let r = run_simulation(&SimulationConfig::for_strategy(StrategyKind::Naive, mb, 1)).unwrap();
        assert_eq!(r.ledger.samples_processed, expected);
        assert_eq!(r.ledger.unique_samples, expected);
        assert_eq!(r.events.len(), 7);
    }
}

#[test]
fn repeated_runs_are_identical() {
    for kind in StrategyKind::ALL {
        let c = small(kind, 21);
        let a = serde_json::to_string(&run_simulation(&c).unwrap()).unwrap();
        let b = serde_json::to_string(&run_simulation(&c).unwrap()).unwrap();
        assert_eq!(a, b, "{kind}");
    }
    let c = small(StrategyKind::Naive, 21);
    let a = run_full_retraining(&c).unwrap();
    let b = run_full_retraining(&c).unwrap();
    assert_eq!(a.matrix, b.matrix);
}

#[test]
fn single_generator_baseline_trains_once() {
    let mut c = small(StrategyKind::Naive, 3);
    c.schedule.n_generators = 1;
    c.schedule.release_months = vec![0];
    let r = run_full_retraining(&c).unwrap();
    assert_eq!(r.events.len(), 2);
    assert_eq!(r.ledger.parameter_updates, 40);
    assert_eq!(r.matrix.values[0], r.matrix.values[1]);
}

#[test]
fn baseline_is_the_rooftop() {
    let grid = GridSpec { master_seed: 11, replicates: 20, monthly_batches: vec![10], include_baseline: true, ..GridSpec::default() };
    let results = run_sweep(&expand_grid(&grid).unwrap(), 4).unwrap();
    assert!(results.failures.is_empty());
    let mean_final = |pred: &dyn Fn(&timeline_dil::RunRecord) -> bool| {
        let v: Vec<f64> = results.runs.iter().filter(|r| pred(r)).filter_map(|r| r.series.final_c_auc()).collect();
        assert_eq!(v.len(), 20);
        v.iter().sum::<f64>() / v.len() as f64
    };
    let baseline = mean_final(&|r| r.method == Method::FullRetraining);
    let best_cl = StrategyKind::ALL
        .iter()
        .map(|k| mean_final(&|r| r.method == Method::ContinualLearning && r.config.strategy.kind == *k))
        .fold(f64::MIN, f64::max);
    assert!(baseline >= best_cl - 0.05, "baseline {baseline} vs best {best_cl}");
}

#[test]
fn sweep_order_and_parallelism_do_not_matter() {
    let jobs: Vec<Job> = StrategyKind::ALL.iter().map(|k| Job::simulate(small(*k, 4))).collect();
    let a = run_sweep(&jobs, 1).unwrap();
    let mut reversed = jobs.clone();
    reversed.reverse();
    let b = run_sweep(&reversed, 3).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let one = run_sweep(&jobs[..1], 2).unwrap();
    assert_eq!(one.runs.len(), 1);
    assert!(run_sweep(&[], 1).is_err());
}

#[test]
fn failed_runs_are_recorded() {
    let mut bad = small(StrategyKind::Replay, 1);
    bad.execution.batch_size = 7;
    let good = small(StrategyKind::Replay, 2);
    let set = run_sweep(&[Job::simulate(bad.clone()), Job::simulate(good)], 2).unwrap();
    assert_eq!(set.runs.len(), 1);
    assert_eq!(set.failures.len(), 1);
    assert_eq!(set.failures[0].run_id, Job::simulate(bad).run_id());
}

#[test]
fn grid_expansion_pairs_seeds_across_strategies() {
    let grid = GridSpec { replicates: 3, include_baseline: true, ..GridSpec::default() };
    let jobs = expand_grid(&grid).unwrap();
    assert_eq!(jobs.len(), 3 * 3 * 9);
    let seeds: BTreeSet<u64> = jobs.iter().map(|j| j.config.seed).collect();
    assert_eq!(seeds.len(), 3);
    let ids: BTreeSet<String> = jobs.iter().map(Job::run_id).collect();
    assert_eq!(ids.len(), jobs.len());
    let full = GridSpec { replicates: 26, ..GridSpec::default() };
    assert_eq!(expand_grid(&full).unwrap().len(), 624);
}

fn parse_csv(text: &str) -> Vec<Vec<String>> {
    let rows: Vec<Vec<String>> = text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect();
    assert!(rows.iter().all(|r| r.len() == rows[0].len()));
    rows
}

#[test]
fn reports_are_complete_and_reproducible() {
    let jobs: Vec<Job> = [StrategyKind::Naive, StrategyKind::DERPP]
        .iter()
        .flat_map(|k| [2usize, 3].map(|mb| {
            let mut c = small(*k, 8);
            c.execution.monthly_batches = mb;
            Job::simulate(c)
        }))
        .collect();
    let results = run_sweep(&jobs, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&results, dir.path()).unwrap();
    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();

    let lines: Vec<serde_json::Value> = read(ARTIFACTS[0]).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4 * 4);
    for key in ["run_id", "event", "month", "eval_auc", "c_auc", "fwt_auc", "row", "ledger"] {
        assert!(lines[0].get(key).is_some(), "{key}");
    }
    assert!(lines.iter().any(|l| l["fwt_auc"].is_null()));
    assert_eq!(parse_csv(&read(ARTIFACTS[1])).len(), 1 + 4 * 4);
    assert_eq!(parse_csv(&read(ARTIFACTS[2])).len(), 1 + 4 * 4 * 3);
    let hyp: serde_json::Value = serde_json::from_str(&read(ARTIFACTS[3])).unwrap();
    assert!(hyp.get("t_comp").is_some());
    assert_eq!(parse_csv(&read(ARTIFACTS[4])).len(), 1 + 2 * 2);
    let reloaded = ResultSet::load(dir.path()).unwrap();
    assert_eq!(serde_json::to_string(&reloaded).unwrap(), serde_json::to_string(&results).unwrap());
    for r in &results.runs {
        assert!(dir.path().join("matrices").join(format!("{}.csv", r.run_id)).exists());
    }

    let again = tempfile::tempdir().unwrap();
    emit_reports(&reloaded, again.path()).unwrap();
    for name in ARTIFACTS {
        assert_eq!(read(name), std::fs::read_to_string(again.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn run_job_dispatches_on_method() {
    let c = small(StrategyKind::Naive, 5);
    assert_eq!(run_job(&Job::baseline(c.clone())).unwrap().method, Method::FullRetraining);
    assert_eq!(run_job(&Job::simulate(c)).unwrap().method, Method::ContinualLearning);
}
