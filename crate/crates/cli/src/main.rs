//! `pads-sim`: runs a scenario file over its seeds and writes CSV results.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pads::batch::{run_batch, BatchOptions, NOT_REACHED};
use pads::{parse_config, Error};

#[derive(Debug, Parser)]
#[command(
    name = "pads-sim",
    version,
    about = "Collective attestation swarm simulator"
)]
struct Args {
    /// Scenario file (TOML).
    scenario: PathBuf,

    /// Run only these seeds instead of the scenario's list.
    #[arg(long = "seed", value_name = "SEED")]
    seeds: Vec<u64>,

    /// Output directory; falls back to the scenario's `output`, then `results`.
    #[arg(long, short, env = "PADS_OUT_DIR")]
    out: Option<PathBuf>,

    /// Also evaluate the naive tree-aggregation baseline.
    #[arg(long)]
    baseline: bool,

    /// Write a per-run event trace.
    #[arg(long)]
    trace: bool,

    /// More log output; repeat for more.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::InvalidInput(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    let mut cfg = match parse_config(&args.scenario) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {}: {e}", args.scenario.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds.clone();
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let opts = BatchOptions {
        trace: args.trace,
        baseline: args.baseline,
    };
    let report = match run_batch(&cfg, &out, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };

    for run in &report.runs {
        match &run.ledger {
            Ok(ledger) => {
                let epochs: Vec<String> = ledger
                    .epochs
                    .iter()
                    .map(|ep| {
                        let mcts: Vec<String> = cfg
                            .targets
                            .iter()
                            .zip(&ep.mct)
                            .map(|(t, m)| match m {
                                Some(m) => format!("{} {:.3}s", t.label(), m.as_secs_f64()),
                                None => format!("{} {NOT_REACHED}", t.label()),
                            })
                            .collect();
                        format!("epoch {}: {}", ep.index, mcts.join(", "))
                    })
                    .collect();
                println!("{}: {}", run.run_id, epochs.join("; "));
            }
            Err(e) => println!("{}: failed: {e}", run.run_id),
        }
    }
    if let Some(b) = &report.baseline {
        println!(
            "naive tree aggregation (n={}, br={}): {:.3}s",
            b.n,
            b.branching,
            b.completion.as_secs_f64()
        );
    }
    println!("results in {}", report.out_dir.display());
    if report.all_succeeded() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}
