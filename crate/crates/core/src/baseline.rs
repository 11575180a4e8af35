//! Naive tree aggregation: a comparison baseline for static trees.
//!
//! The root floods a signed query down a complete tree; every node verifies
//! the query, forwards it (one signature) if it has children, and
//! self-attests. Reports then flow up: each parent verifies its children's
//! MAC'd reports one after another on its single CPU, signs an aggregate
//! and sends it on. The run completes when the root has verified every
//! child report. The model is lossless and evaluated in closed form.

use crate::attest::message_bytes;
use crate::error::{Error, Result};
use crate::scenario::{ScenarioConfig, TopologySpec};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeTiming {
    /// MAC computation or verification.
    pub hmac: SimTime,
    pub attest: SimTime,
    /// Airtime of one message over one hop.
    pub hop: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineResult {
    pub n: usize,
    pub branching: usize,
    pub depth: usize,
    /// Query plus report per tree edge.
    pub messages: u64,
    pub completion: SimTime,
}

/// Completion time of naive aggregation over a complete `branching`-ary
/// tree of `n` nodes in heap order.
pub fn tree_completion(n: usize, branching: usize, t: TreeTiming) -> SimTime {
    assert!(n >= 1 && branching >= 1);
    let children = |i: usize| (branching * i + 1)..(branching * i + branching + 1).min(n);
    // Query arrival, downwards in index order.
    let mut ready = vec![SimTime::ZERO; n];
    for i in 1..n {
        let parent = (i - 1) / branching;
        ready[i] = ready[parent] + t.hmac + t.hop + t.hmac;
    }
    // Report departure, upwards in reverse index order.
    let mut report = vec![SimTime::ZERO; n];
    let mut root_done = SimTime::ZERO;
    let mut arrivals = Vec::with_capacity(branching);
    for i in (0..n).rev() {
        let kids = children(i);
        let forwards = !kids.is_empty();
        let mut cpu = ready[i] + if forwards { t.hmac } else { SimTime::ZERO } + t.attest;
        arrivals.clear();
        arrivals.extend(kids.map(|c| report[c]));
        arrivals.sort_unstable();
        for &r in &arrivals {
            cpu = cpu.max(r) + t.hmac;
        }
        if i == 0 {
            root_done = cpu;
        } else {
            report[i] = cpu + t.hmac + t.hop;
        }
    }
    root_done
}

/// Depth of the deepest node of a complete tree in heap order.
pub fn tree_depth(n: usize, branching: usize) -> usize {
    let mut depth = 0;
    let mut i = n - 1;
    while i > 0 {
        i = (i - 1) / branching;
        depth += 1;
    }
    depth
}

/// Evaluates the baseline for a static-tree scenario.
pub fn run_tree_baseline(cfg: &ScenarioConfig) -> Result<BaselineResult> {
    let TopologySpec::StaticTree { branching } = cfg.topology else {
        return Err(Error::config(
            "topology.kind",
            "tree baseline requires a static-tree topology",
        ));
    };
    let radio = cfg.radio_model();
    let timing = TreeTiming {
        hmac: cfg.hmac_delay(),
        attest: cfg.attest_delay(),
        hop: radio.airtime(message_bytes(cfg.n as u64)),
    };
    Ok(BaselineResult {
        n: cfg.n,
        branching,
        depth: tree_depth(cfg.n, branching),
        messages: 2 * (cfg.n as u64 - 1),
        completion: tree_completion(cfg.n, branching, timing),
    })
}
