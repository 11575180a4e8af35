//! Evaluation quantities: coverage, MCT, representativity, overheads and
//! energy, plus the per-run ledger that collects them.

mod coverage;
mod energy;
mod ledger;
mod overhead;

pub use coverage::{
    coverage, representativity, required_count, CoverageSample, CoverageSeries, KnowledgeHistogram,
};
pub use energy::{energy_bound, EnergyConstants, EnergyCounts};
pub use ledger::{Counters, EpochRecord, MetricsLedger, NodeEnergy};
pub use overhead::{memory_bits, message_bits};
