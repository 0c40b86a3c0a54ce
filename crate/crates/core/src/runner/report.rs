use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{EventRecord, RunRecord};
use crate::error::{Error, Result};
use crate::hypothesis::{analyze, mean_std, ResultSet};

/// Files written by [`emit_reports`], besides `matrices/<run_id>.csv`.
pub const ARTIFACTS: [&str; 6] = [
    "runs.jsonl",
    "c_auc_timeseries.csv",
    "dataset_auc_by_event.csv",
    "hypothesis.json",
    "summary.csv",
    "results.json",
];

#[derive(Serialize)]
struct JsonlLine<'a> {
    run_id: &'a str,
    #[serde(flatten)]
    event: &'a EventRecord,
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

type Groups<'a> = BTreeMap<(&'static str, usize), Vec<&'a RunRecord>>;

fn groups(results: &ResultSet) -> Groups<'_> {
    let mut g: Groups<'_> = BTreeMap::new();
    for r in &results.runs {
        g.entry((r.label(), r.config.execution.monthly_batches)).or_default().push(r);
    }
    g
}

fn jsonl(results: &ResultSet) -> Result<String> {
    let mut out = String::new();
    for r in &results.runs {
        for e in &r.events {
            out.push_str(&serde_json::to_string(&JsonlLine { run_id: &r.run_id, event: e })?);
            out.push('\n');
        }
    }
    Ok(out)
}

fn c_auc_timeseries(groups: &Groups<'_>) -> String {
    let mut out = String::from("method,monthly_batches,event,month,runs,c_auc_mean,c_auc_std,eval_auc_mean\n");
    for ((label, mb), runs) in groups {
        let n_events = runs.iter().map(|r| r.events.len()).max().unwrap_or(0);
        for t in 0..n_events {
            let at: Vec<&EventRecord> = runs.iter().filter_map(|r| r.events.get(t)).collect();
            let c: Vec<f64> = at.iter().map(|e| e.c_auc).collect();
            let ev: Vec<f64> = at.iter().map(|e| e.eval_auc).collect();
            let (cm, cs) = mean_std(&c).unzip();
            let _ = writeln!(
                out,
                "{label},{mb},{t},{},{},{},{},{}",
                at[0].month,
                at.len(),
                fmt(cm),
                fmt(cs),
                fmt(mean_std(&ev).map(|m| m.0))
            );
        }
    }
    out
}

fn dataset_auc_by_event(groups: &Groups<'_>) -> String {
    let mut out = String::from("method,monthly_batches,event,month,dataset,released,runs,auc_mean,auc_std\n");
    for ((label, mb), runs) in groups {
        let n_events = runs.iter().map(|r| r.events.len()).max().unwrap_or(0);
        for t in 0..n_events {
            let at: Vec<&RunRecord> = runs.iter().filter(|r| r.events.len() > t).copied().collect();
            let m = &at[0].matrix;
            for d in 0..m.n_datasets() {
                let vals: Vec<f64> = at.iter().map(|r| r.matrix.values[t][d]).collect();
                let (mean, std) = mean_std(&vals).unzip();
                let _ = writeln!(
                    out,
                    "{label},{mb},{t},{},{d},{},{},{},{}",
                    m.event_months[t],
                    m.released_at[d] <= t,
                    vals.len(),
                    fmt(mean),
                    fmt(std)
                );
            }
        }
    }
    out
}

fn summary(groups: &Groups<'_>) -> String {
    let mut out = String::from("method,monthly_batches,runs,auc,auc_std,mean_c_auc,mean_fwt_auc\n");
    for ((label, mb), runs) in groups {
        let finals: Vec<f64> = runs.iter().filter_map(|r| r.series.final_eval_auc()).collect();
        let c: Vec<f64> = runs.iter().filter_map(|r| r.series.mean_c_auc()).collect();
        let f: Vec<f64> = runs.iter().filter_map(|r| r.series.mean_fwt_auc()).collect();
        let (auc, auc_std) = mean_std(&finals).unzip();
        let _ = writeln!(
            out,
            "{label},{mb},{},{},{},{},{}",
            runs.len(),
            fmt(auc),
            fmt(auc_std),
            fmt(mean_std(&c).map(|m| m.0)),
            fmt(mean_std(&f).map(|m| m.0))
        );
    }
    out
}

/// Writes every report artifact into `out_dir` and returns the paths.
/// Output depends only on `results`, so re-emitting is byte-identical.
pub fn emit_reports(results: &ResultSet, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if results.runs.is_empty() {
        return Err(Error::InvalidArgument("no successful runs to report".into()));
    }
    let matrices = out_dir.join("matrices");
    std::fs::create_dir_all(&matrices).map_err(|e| Error::io(&matrices, e))?;
    let groups = groups(results);
    let mut written = Vec::new();
    write(out_dir.join(ARTIFACTS[0]), &jsonl(results)?, &mut written)?;
    write(out_dir.join(ARTIFACTS[1]), &c_auc_timeseries(&groups), &mut written)?;
    write(out_dir.join(ARTIFACTS[2]), &dataset_auc_by_event(&groups), &mut written)?;
    let mut hyp = serde_json::to_string_pretty(&analyze(results))?;
    hyp.push('\n');
    write(out_dir.join(ARTIFACTS[3]), &hyp, &mut written)?;
    write(out_dir.join(ARTIFACTS[4]), &summary(&groups), &mut written)?;
    write(out_dir.join(ARTIFACTS[5]), &serde_json::to_string(results)?, &mut written)?;
    for r in &results.runs {
        write(matrices.join(format!("{}.csv", r.run_id)), &r.matrix.to_csv(), &mut written)?;
    }
    Ok(written)
}
