//! Seed sweeps and CSV export.
//!
//! Layout under the output directory:
//!
//! ```text
//! VERSION                 schema version
//! scenario.toml           resolved configuration
//! aggregate.csv           mean/stddev MCT per epoch and target
//! baseline.csv            tree baseline (when requested)
//! runs/<run_id>/coverage.csv
//! runs/<run_id>/summary.csv
//! runs/<run_id>/verifier.csv
//! runs/<run_id>/trace.log (when requested)
//! ```
//!
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::attest::RejectCause;
use crate::baseline::{run_tree_baseline, BaselineResult};
use crate::error::Result;
use crate::metrics::MetricsLedger;
use crate::netsim::Simulation;
use crate::scenario::{BaselineSpec, ScenarioConfig};
use crate::verifier::NodeClass;

/// Bumped whenever a CSV column changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Sentinel written in place of an MCT that was never reached.
pub const NOT_REACHED: &str = "not-reached";

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    /// Write a per-run event trace.
    pub trace: bool,
    /// Evaluate the tree baseline even if the scenario does not ask for it.
    pub baseline: bool,
}

#[derive(Debug)]
pub struct RunResult {
    pub seed: u64,
    pub run_id: String,
    /// The ledger, or the reason the run failed.
    pub ledger: std::result::Result<MetricsLedger, String>,
}

#[derive(Debug)]
pub struct BatchReport {
    pub out_dir: PathBuf,
    pub runs: Vec<RunResult>,
    pub baseline: Option<BaselineResult>,
}

impl BatchReport {
    pub fn all_succeeded(&self) -> bool {
        self.runs.iter().all(|r| r.ledger.is_ok())
    }
}

pub fn run_id(cfg: &ScenarioConfig, seed: u64) -> String {
    format!("{}-s{seed}", cfg.name)
}

/// Runs one simulation per seed and writes all result files. Per-run
/// failures, panics included, are reported in the result rather than
/// aborting the batch; errors here concern the output directory.
pub fn run_batch(cfg: &ScenarioConfig, out_dir: &Path, opts: &BatchOptions) -> Result<BatchReport> {
    let cfg = cfg.clone().validated()?;
    let baseline = if opts.baseline || cfg.baseline == BaselineSpec::NaiveTreeAggregation {
        Some(run_tree_baseline(&cfg)?)
    } else {
        None
    };
    fs::create_dir_all(out_dir.join("runs"))?;
    write_atomic(
        &out_dir.join("VERSION"),
        format!("{SCHEMA_VERSION}\n").as_bytes(),
    )?;
    write_atomic(
        &out_dir.join("scenario.toml"),
        cfg.to_toml_string().as_bytes(),
    )?;

    let runs: Vec<RunResult> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let id = run_id(&cfg, seed);
            let ledger =
                match catch_unwind(AssertUnwindSafe(|| execute(&cfg, seed, &id, out_dir, opts))) {
                    Ok(Ok(ledger)) => Ok(ledger),
                    Ok(Err(e)) => Err(e.to_string()),
                    Err(panic) => Err(panic_message(panic.as_ref())),
                };
            if let Err(e) = &ledger {
                log::error!("run {id} failed: {e}");
            }
            RunResult {
                seed,
                run_id: id,
                ledger,
            }
        })
        .collect();

    write_atomic(&out_dir.join("aggregate.csv"), &aggregate_csv(&cfg, &runs)?)?;
    if let Some(b) = &baseline {
        write_atomic(&out_dir.join("baseline.csv"), &baseline_csv(b)?)?;
    }
    Ok(BatchReport {
        out_dir: out_dir.to_path_buf(),
        runs,
        baseline,
    })
}

fn execute(
    cfg: &ScenarioConfig,
    seed: u64,
    id: &str,
    out_dir: &Path,
    opts: &BatchOptions,
) -> Result<MetricsLedger> {
    let dir = out_dir.join("runs").join(id);
    fs::create_dir_all(&dir)?;
    let mut sim = Simulation::new(cfg, seed)?;
    let trace_tmp = dir.join(".trace.log.tmp");
    if opts.trace {
        let file = fs::File::create(&trace_tmp)?;
        sim = sim.with_trace(Box::new(BufWriter::new(file)));
    }
    let ledger = sim.run().ledger;
    if opts.trace {
        fs::rename(&trace_tmp, dir.join("trace.log"))?;
    }
    write_atomic(&dir.join("coverage.csv"), &coverage_csv(cfg, id, &ledger)?)?;
    write_atomic(&dir.join("summary.csv"), &summary_csv(cfg, id, &ledger)?)?;
    write_atomic(&dir.join("verifier.csv"), &verifier_csv(id, &ledger)?)?;
    Ok(ledger)
}

fn panic_message(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = p.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".into()
    }
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
}

/// Distinct prover fractions among the targets, in first-seen order.
fn distinct_x(cfg: &ScenarioConfig) -> Vec<usize> {
    let mut seen: Vec<f64> = Vec::new();
    let mut idx = Vec::new();
    for (k, t) in cfg.targets.iter().enumerate() {
        if !seen.contains(&t.x) {
            seen.push(t.x);
            idx.push(k);
        }
    }
    idx
}

pub fn coverage_csv(cfg: &ScenarioConfig, id: &str, ledger: &MetricsLedger) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run_id", "epoch", "t_us", "x", "y"])?;
    for ep in &ledger.epochs {
        for &k in &distinct_x(cfg) {
            let s = &ep.series[k];
            for sample in &s.samples {
                w.write_record([
                    id.to_string(),
                    ep.index.to_string(),
                    sample.t.as_micros().to_string(),
                    s.x.to_string(),
                    s.y(sample).to_string(),
                ])?;
            }
        }
    }
    finish(w)
}

pub fn summary_csv(cfg: &ScenarioConfig, id: &str, ledger: &MetricsLedger) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "run_id".to_string(),
        "epoch".into(),
        "target".into(),
        "mct_us".into(),
        "reachable".into(),
        "broadcasts".into(),
        "frames".into(),
        "bytes".into(),
        "energy_total_j".into(),
    ];
    header.extend(
        RejectCause::ALL
            .iter()
            .map(|c| format!("rejected_{}", c.label())),
    );
    w.write_record(&header)?;
    let c = &ledger.counters;
    let energy = ledger.energy_total(&cfg.energy);
    for ep in &ledger.epochs {
        for (t, mct) in cfg.targets.iter().zip(&ep.mct) {
            let mut row = vec![
                id.to_string(),
                ep.index.to_string(),
                t.label(),
                mct.map_or(NOT_REACHED.to_string(), |m| m.as_micros().to_string()),
                ep.reachable_count().to_string(),
                c.broadcasts.to_string(),
                c.frames.to_string(),
                c.bytes.to_string(),
                energy.to_string(),
            ];
            row.extend(
                RejectCause::ALL
                    .iter()
                    .map(|&r| c.rejections_for(r).to_string()),
            );
            w.write_record(&row)?;
        }
    }
    finish(w)
}

pub fn verifier_csv(id: &str, ledger: &MetricsLedger) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "run_id",
        "epoch",
        "query",
        "t_us",
        "status",
        "queried_node",
        "r",
        "rho",
        "healthy",
        "compromised",
        "unknown",
        "suspected",
    ])?;
    for q in &ledger.queries {
        let mut row = vec![
            id.to_string(),
            q.epoch.to_string(),
            q.index.to_string(),
            q.t_query.as_micros().to_string(),
        ];
        match &q.outcome {
            Err(f) => {
                row.push(f.label().into());
                row.extend(std::iter::repeat_n(String::new(), 7));
            }
            Ok(o) => row.extend([
                "ok".to_string(),
                o.queried_node.to_string(),
                u8::from(o.accepted).to_string(),
                o.rho.to_string(),
                o.count(NodeClass::Healthy).to_string(),
                o.count(NodeClass::Compromised).to_string(),
                o.count(NodeClass::Unknown).to_string(),
                o.count(NodeClass::Suspected).to_string(),
            ]),
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// Mean and sample standard deviation.
pub fn mean_stddev(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}

pub fn aggregate_csv(cfg: &ScenarioConfig, runs: &[RunResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "epoch",
        "target",
        "runs",
        "reached",
        "mean_mct_us",
        "stddev_mct_us",
    ])?;
    let ok: Vec<&MetricsLedger> = runs.iter().filter_map(|r| r.ledger.as_ref().ok()).collect();
    for epoch in 0..cfg.protocol.epochs {
        for (k, t) in cfg.targets.iter().enumerate() {
            let mcts: Vec<f64> = ok
                .iter()
                .filter_map(|l| l.epochs.get(epoch).and_then(|e| e.mct[k]))
                .map(|m| m.as_micros() as f64)
                .collect();
            let (mean, sd) = match mean_stddev(&mcts) {
                Some((m, s)) => (m.to_string(), s.to_string()),
                None => (NOT_REACHED.to_string(), NOT_REACHED.to_string()),
            };
            w.write_record([
                epoch.to_string(),
                t.label(),
                ok.len().to_string(),
                mcts.len().to_string(),
                mean,
                sd,
            ])?;
        }
    }
    finish(w)
}

pub fn baseline_csv(b: &BaselineResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "kind",
        "n",
        "branching",
        "depth",
        "messages",
        "completion_us",
    ])?;
    w.write_record([
        "naive-tree-aggregation".to_string(),
        b.n.to_string(),
        b.branching.to_string(),
        b.depth.to_string(),
        b.messages.to_string(),
        b.completion.as_micros().to_string(),
    ])?;
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_sample_stddev() {
        assert_eq!(mean_stddev(&[]), None);
        assert_eq!(mean_stddev(&[4.0]), Some((4.0, 0.0)));
        let (m, s) = mean_stddev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"x\n").unwrap();
        write_atomic(&p, b"y\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"y\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn batch_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ScenarioConfig::with_n(16);
        cfg.seeds = vec![1, 2];
        cfg.horizon_s = 30.0;
        cfg.verifier.queries_ms = vec![0.0, 2000.0];
        let report = run_batch(&cfg, dir.path(), &BatchOptions::default()).unwrap();
        assert!(report.all_succeeded());
        let root = dir.path();
        assert_eq!(fs::read_to_string(root.join("VERSION")).unwrap(), "1\n");
        for f in ["coverage.csv", "summary.csv", "verifier.csv"] {
            assert!(root.join("runs/n16-s1").join(f).exists(), "{f}");
        }
        let agg = fs::read_to_string(root.join("aggregate.csv")).unwrap();
        assert!(agg.starts_with("epoch,target,runs,reached,mean_mct_us,stddev_mct_us\n0,C95=95,2,"));
        let back =
            ScenarioConfig::from_toml_str(&fs::read_to_string(root.join("scenario.toml")).unwrap())
                .unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unreachable_target_uses_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ScenarioConfig::from_toml_str(
            "n = 8\nhorizon_s = 5.0\n[[adversary]]\nkind = \"com\"\ndrop_rate = 1.0\n",
        )
        .unwrap();
        cfg.name = "drop".into();
        let report = run_batch(&cfg, dir.path(), &BatchOptions::default()).unwrap();
        assert!(report.all_succeeded());
        let summary = fs::read_to_string(dir.path().join("runs/drop-s1/summary.csv")).unwrap();
        assert!(summary.lines().nth(1).unwrap().contains(",not-reached,"));
    }
}
