//! Whole-simulation invariants over randomly drawn scenarios.

use proptest::prelude::*;

use pads::attest::CellStatus;
use pads::metrics::coverage;
use pads::netsim::{run, RunOutcome};
use pads::scenario::{AdversaryPlan, PhaseMode, TopologySpec};
use pads::ScenarioConfig;

#[derive(Debug, Clone)]
struct Draw {
    n: usize,
    mobile: bool,
    branching: usize,
    compromised: f64,
    loss: f64,
    drop_rate: f64,
    tamper_rate: f64,
    queue: usize,
    aligned: bool,
    epochs: usize,
    seed: u64,
}

fn draws() -> impl Strategy<Value = Draw> {
    (
        2usize..40,
        any::<bool>(),
        2usize..5,
        0.0..0.5f64,
        0.0..0.3f64,
        0.0..0.3f64,
        0.0..0.2f64,
        1usize..20,
        any::<bool>(),
        1usize..3,
        any::<u64>(),
    )
        .prop_map(
            |(
                n,
                mobile,
                branching,
                compromised,
                loss,
                drop_rate,
                tamper_rate,
                queue,
                aligned,
                epochs,
                seed,
            )| Draw {
                n,
                mobile,
                branching,
                compromised,
                loss,
                drop_rate,
                tamper_rate,
                queue,
                aligned,
                epochs,
                seed,
            },
        )
}

fn config(d: &Draw) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::with_n(d.n);
    if d.mobile {
        cfg.arena.base_side_m = 300.0;
    } else {
        cfg.topology = TopologySpec::StaticTree {
            branching: d.branching,
        };
    }
    cfg.horizon_s = 25.0;
    cfg.compromised_fraction = d.compromised;
    cfg.radio.loss_prob = d.loss;
    cfg.protocol.queue_capacity = d.queue;
    cfg.protocol.epochs = d.epochs;
    if d.aligned {
        cfg.protocol.phase = PhaseMode::Aligned;
    }
    cfg.verifier.queries_ms = vec![700.0, 2500.0];
    cfg.adversaries.push(AdversaryPlan::Com {
        drop_rate: d.drop_rate,
        replay: true,
        forge: true,
        tamper_rate: d.tamper_rate,
        inject_period_ms: 200.0,
        inject_burst: 1,
        corrupt_queries: false,
        key_compromise: false,
    });
    cfg.validated().unwrap()
}

fn simulate(d: &Draw) -> (ScenarioConfig, RunOutcome) {
    let cfg = config(d);
    let out = run(&cfg, d.seed).unwrap();
    (cfg, out)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Whatever the channel does, a known cell is never wrong.
    #[test]
    fn known_cells_match_ground_truth(d in draws()) {
        let (_, out) = simulate(&d);
        let truth = &out.ledger.epochs.last().unwrap().ground_truth;
        for p in &out.provers {
            for (i, cell) in p.bitmask().cells().enumerate() {
                if cell.is_known() {
                    prop_assert_eq!(cell, CellStatus::from_attestation(truth[i]));
                }
            }
        }
        let c = &out.ledger.counters;
        prop_assert_eq!(c.forged_accepted, 0);
        prop_assert_eq!(c.stale_replays_accepted, 0);
        for q in &out.ledger.queries {
            prop_assert_eq!(q.false_claims(&out.ledger.epochs[q.epoch].ground_truth), 0);
        }
    }

    /// The incrementally tracked series agrees with a snapshot recomputation.
    #[test]
    fn final_coverage_matches_snapshot(d in draws()) {
        let (cfg, out) = simulate(&d);
        let epoch = out.ledger.epochs.last().unwrap();
        let masks: Vec<_> = out.provers.iter().map(|p| p.bitmask().clone()).collect();
        for (target, series) in cfg.targets.iter().zip(&epoch.series) {
            let snap = coverage(&masks, &epoch.reachable, target.x).unwrap();
            prop_assert!((snap - series.final_y()).abs() < 1e-12, "{} vs {}", snap, series.final_y());
        }
    }

    /// Energy totals follow from the counters and stay within the bound.
    #[test]
    fn energy_accounting(d in draws()) {
        let (cfg, out) = simulate(&d);
        let c = &cfg.energy;
        let bytes = (224 + 2 * d.n) as f64 / 8.0;
        let mut sends = 0;
        for e in &out.ledger.energy {
            let k = &e.counts;
            let by_hand = k.sends as f64 * bytes * c.send_j_per_byte
                + k.receptions as f64 * bytes * c.recv_j_per_byte
                + k.hmacs as f64 * c.hmac_j
                + k.mins as f64 * c.min_j
                + k.attestations as f64 * c.att_j;
            prop_assert!((by_hand - k.total(c, d.n)).abs() <= 1e-12 * by_hand.max(1.0));
            prop_assert_eq!(e.heard.len() as u64, k.sends + 1);
            sends += k.sends;
        }
        prop_assert_eq!(sends, out.ledger.counters.broadcasts);
        prop_assert!(out.ledger.energy_within_bounds(c));
    }
}
