//! Per-run record: counters, per-epoch coverage, energy and verifier
//! outcomes.

use super::coverage::CoverageSeries;
use super::energy::{energy_bound, EnergyConstants, EnergyCounts};
use crate::attest::{CellStatus, RejectCause};
use crate::time::SimTime;
use crate::verifier::QueryRecord;

/// Message and adversary counters. `bytes == frames * frame_size` and
/// `frames >= broadcasts` always hold for honest traffic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub broadcasts: u64,
    /// Broadcast ticks skipped because the previous signature was pending.
    pub broadcasts_skipped: u64,
    pub frames: u64,
    pub bytes: u64,
    /// Complete messages handed to a receiver.
    pub deliveries: u64,
    /// Receivers that lost at least one frame of a message.
    pub radio_losses: u64,
    pub channel_drops: u64,
    pub channel_tampered: u64,
    /// Arrivals discarded because the verification queue was full.
    pub queue_drops: u64,
    /// Queued messages replaced by a newer one from the same sender.
    pub coalesced: u64,
    /// Pending verifications discarded at an epoch boundary.
    pub flushed: u64,
    pub verified: u64,
    pub accepted: u64,
    pub rejections: [u64; 4],
    pub forged_injected: u64,
    pub forged_verified: u64,
    pub forged_accepted: u64,
    pub replays_injected: u64,
    /// Replays carrying an earlier epoch's `T_att`.
    pub stale_replays_verified: u64,
    pub stale_replays_accepted: u64,
}

impl Counters {
    pub fn reject(&mut self, cause: RejectCause) {
        self.rejections[cause as usize] += 1;
    }

    pub fn rejections_for(&self, cause: RejectCause) -> u64 {
        self.rejections[cause as usize]
    }

    pub fn total_rejections(&self) -> u64 {
        self.rejections.iter().sum()
    }
}

/// Operation counts of one prover plus the messages it heard per round,
/// as needed by the energy bound.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeEnergy {
    pub counts: EnergyCounts,
    /// `heard[0]` counts arrivals before the first own broadcast; each
    /// broadcast opens a new entry.
    pub heard: Vec<u32>,
}

impl NodeEnergy {
    pub fn new() -> Self {
        NodeEnergy {
            counts: EnergyCounts::default(),
            heard: vec![0],
        }
    }

    pub fn bound(&self, c: &EnergyConstants, n: usize) -> f64 {
        energy_bound(&self.heard, self.counts.attestations, c, n)
    }
}

/// One attestation epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub index: usize,
    pub t_att: SimTime,
    /// Last simulated instant of the epoch.
    pub end: SimTime,
    /// Self-attestation outcome of every prover at `t_att`.
    pub ground_truth: Vec<bool>,
    /// Provers that were within range of another prover during the epoch.
    pub reachable: Vec<bool>,
    /// One series per coverage target.
    pub series: Vec<CoverageSeries>,
    /// Offset from `t_att` at which each target was met.
    pub mct: Vec<Option<SimTime>>,
}

impl EpochRecord {
    pub fn reachable_count(&self) -> usize {
        self.reachable.iter().filter(|&&r| r).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsLedger {
    pub n: usize,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub counters: Counters,
    pub energy: Vec<NodeEnergy>,
    pub queries: Vec<QueryRecord>,
    /// Cell-wise meet of every prover's final view.
    pub final_classification: Vec<CellStatus>,
    pub end_time: SimTime,
}

impl MetricsLedger {
    pub fn energy_total(&self, c: &EnergyConstants) -> f64 {
        self.energy.iter().map(|e| e.counts.total(c, self.n)).sum()
    }

    /// Whether every prover's ledger total respects its analytic bound.
    pub fn energy_within_bounds(&self, c: &EnergyConstants) -> bool {
        self.energy
            .iter()
            .all(|e| e.counts.total(c, self.n) <= e.bound(c, self.n) * (1.0 + 1e-12))
    }
}
