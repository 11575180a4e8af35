//! Verifier query: fetch one prover's snapshot, check it, classify nodes.

use std::fmt;

use crate::attest::{AttestationMessage, CellStatus, ProverState};
use crate::crypto::{PrngState, SymKey};
use crate::error::{Error, Result};
use crate::metrics::representativity;
use crate::time::SimTime;

/// Per-node verdict reported by the verifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Healthy,
    Compromised,
    Unknown,
    /// Unknown, reported as compromised under the conservative policy.
    Suspected,
}

impl NodeClass {
    pub fn from_cell(cell: CellStatus, conservative: bool) -> Self {
        match cell {
            CellStatus::Healthy => NodeClass::Healthy,
            CellStatus::Compromised => NodeClass::Compromised,
            CellStatus::Unknown if conservative => NodeClass::Suspected,
            CellStatus::Unknown => NodeClass::Unknown,
        }
    }
}

impl fmt::Display for NodeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeClass::Healthy => "healthy",
            NodeClass::Compromised => "compromised",
            NodeClass::Unknown => "unknown",
            NodeClass::Suspected => "suspected",
        })
    }
}

/// Accepted timestamps: `[t_att - delta, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryWindow {
    pub t_att: SimTime,
    pub delta: SimTime,
    pub t_max: SimTime,
}

impl QueryWindow {
    pub fn contains(&self, t_stamp_s: u32) -> bool {
        let stamp = SimTime::from_secs(t_stamp_s as u64);
        stamp + self.delta >= self.t_att && stamp <= self.t_max
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationOutcome {
    /// `r_V`: snapshot authentic and fresh.
    pub accepted: bool,
    /// Representativity; zero when rejected.
    pub rho: f64,
    /// Empty when rejected.
    pub classification: Vec<NodeClass>,
    pub queried_node: usize,
    pub t_query: SimTime,
}

impl VerificationOutcome {
    pub fn count(&self, class: NodeClass) -> usize {
        self.classification.iter().filter(|&&c| c == class).count()
    }
}

/// Checks a fetched snapshot against the shared key and query window.
pub fn check_snapshot(
    key: &SymKey,
    msg: &AttestationMessage,
    window: &QueryWindow,
    conservative: bool,
    queried_node: usize,
    t_query: SimTime,
) -> VerificationOutcome {
    let fresh = msg.t_att as u64 == window.t_att.whole_secs() && window.contains(msg.t_stamp);
    if !(msg.verify_tag(key) && fresh) {
        return VerificationOutcome {
            accepted: false,
            rho: 0.0,
            classification: Vec::new(),
            queried_node,
            t_query,
        };
    }
    VerificationOutcome {
        accepted: true,
        rho: representativity(&msg.bitmask),
        classification: msg
            .bitmask
            .cells()
            .map(|c| NodeClass::from_cell(c, conservative))
            .collect(),
        queried_node,
        t_query,
    }
}

/// Queries a prover drawn uniformly from `candidates` (the responsive
/// provers in the verifier's range). `channel` may alter the message in
/// transit.
#[allow(clippy::too_many_arguments)]
pub fn verify_query(
    key: &SymKey,
    provers: &[ProverState],
    candidates: &[usize],
    t_query: SimTime,
    window: &QueryWindow,
    conservative: bool,
    rng: &mut PrngState,
    channel: impl FnOnce(&mut AttestationMessage),
) -> Result<VerificationOutcome> {
    if candidates.is_empty() {
        return Err(Error::QueryFailed(format!(
            "no prover in range at t={t_query}"
        )));
    }
    let chosen = candidates[rng.below(candidates.len() as u64) as usize];
    let mut msg = provers[chosen].build_message(t_query)?;
    channel(&mut msg);
    Ok(check_snapshot(
        key,
        &msg,
        window,
        conservative,
        chosen,
        t_query,
    ))
}

/// Why a scheduled query produced no outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryFailure {
    NoProverInRange,
    /// The next attestation epoch had already begun.
    EpochOver,
}

impl QueryFailure {
    pub fn label(self) -> &'static str {
        match self {
            QueryFailure::NoProverInRange => "no-prover-in-range",
            QueryFailure::EpochOver => "epoch-over",
        }
    }
}

/// One scheduled query as logged in the run ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub epoch: usize,
    pub index: usize,
    pub t_query: SimTime,
    pub outcome: std::result::Result<VerificationOutcome, QueryFailure>,
}

impl QueryRecord {
    /// Healthy/Compromised claims contradicting `ground_truth`.
    pub fn false_claims(&self, ground_truth: &[bool]) -> usize {
        let Some(o) = self.outcome.as_ref().ok().filter(|o| o.accepted) else {
            return 0;
        };
        o.classification
            .iter()
            .zip(ground_truth)
            .filter(|(c, &ok)| match c {
                NodeClass::Healthy => !ok,
                NodeClass::Compromised => ok,
                _ => false,
            })
            .count()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::crypto::{mac_keygen, measure, HashAlg};

    fn network(n: usize) -> (SymKey, Vec<ProverState>) {
        let key = mac_keygen(160, HashAlg::Sha1, &mut PrngState::new(9)).unwrap();
        let image = vec![7u8; 64];
        let good = Arc::new(vec![measure(HashAlg::Sha1, &image).unwrap()]);
        let provers = (0..n)
            .map(|i| ProverState::new(i, n, key.clone(), good.clone(), image.clone()))
            .collect();
        (key, provers)
    }

    fn window(t_att: SimTime) -> QueryWindow {
        QueryWindow {
            t_att,
            delta: SimTime::from_secs(1),
            t_max: t_att + SimTime::from_secs(100),
        }
    }

    #[test]
    fn query_at_attestation_instant() {
        let (key, mut provers) = network(8);
        let t = SimTime::from_secs(4);
        for p in &mut provers {
            p.self_attest(t);
        }
        let o = verify_query(
            &key,
            &provers,
            &[3],
            t,
            &window(t),
            false,
            &mut PrngState::new(1),
            |_| {},
        )
        .unwrap();
        assert!(o.accepted);
        assert_eq!(o.rho, 1.0 / 8.0);
        assert_eq!(o.classification[3], NodeClass::Healthy);
        assert_eq!(o.count(NodeClass::Unknown), 7);
    }

    #[test]
    fn corrupted_tag_yields_zero() {
        let (key, mut provers) = network(4);
        let t = SimTime::from_secs(2);
        provers[0].self_attest(t);
        let o = verify_query(
            &key,
            &provers,
            &[0],
            t,
            &window(t),
            false,
            &mut PrngState::new(1),
            |m| m.tag.0[0] ^= 1,
        )
        .unwrap();
        assert!(!o.accepted);
        assert!(o.classification.is_empty());
    }

    #[test]
    fn late_or_foreign_epoch_snapshot_rejected() {
        let (key, mut provers) = network(4);
        let t = SimTime::from_secs(2);
        provers[0].self_attest(t);
        let late = t + SimTime::from_secs(200);
        let o = verify_query(
            &key,
            &provers,
            &[0],
            late,
            &window(t),
            false,
            &mut PrngState::new(1),
            |_| {},
        )
        .unwrap();
        assert!(!o.accepted);
        let other = window(SimTime::from_secs(3));
        let o = verify_query(
            &key,
            &provers,
            &[0],
            t,
            &other,
            false,
            &mut PrngState::new(1),
            |_| {},
        )
        .unwrap();
        assert!(!o.accepted);
    }

    #[test]
    fn no_candidate_is_query_failure() {
        let (key, provers) = network(2);
        let t = SimTime::ZERO;
        let r = verify_query(
            &key,
            &provers,
            &[],
            t,
            &window(t),
            false,
            &mut PrngState::new(1),
            |_| {},
        );
        assert!(matches!(r, Err(Error::QueryFailed(_))));
    }

    #[test]
    fn conservative_policy_flags_unknown() {
        let (key, mut provers) = network(3);
        let t = SimTime::from_secs(1);
        provers[1].self_attest(t);
        let o = verify_query(
            &key,
            &provers,
            &[1],
            t,
            &window(t),
            true,
            &mut PrngState::new(1),
            |_| {},
        )
        .unwrap();
        assert_eq!(o.count(NodeClass::Suspected), 2);
        assert_eq!(o.count(NodeClass::Unknown), 0);
    }

    #[test]
    fn false_claims_against_ground_truth() {
        let rec = QueryRecord {
            epoch: 0,
            index: 0,
            t_query: SimTime::ZERO,
            outcome: Ok(VerificationOutcome {
                accepted: true,
                rho: 1.0,
                classification: vec![
                    NodeClass::Healthy,
                    NodeClass::Compromised,
                    NodeClass::Unknown,
                ],
                queried_node: 0,
                t_query: SimTime::ZERO,
            }),
        };
        assert_eq!(rec.false_claims(&[true, false, true]), 0);
        assert_eq!(rec.false_claims(&[false, true, false]), 2);
    }
}
