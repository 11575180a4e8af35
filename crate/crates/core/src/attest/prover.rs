//! Prover state machine: self-attestation, message construction and
//! validated minimum-consensus updates.

use std::sync::Arc;

use super::bitmask::ObservationBitmask;
use super::cell::CellStatus;
use super::message::AttestationMessage;
use crate::crypto::{measure, HashAlg, Measurement, SymKey};
use crate::error::ProtocolError;
use crate::time::SimTime;

/// Acceptance interval for message timestamps: `[T_att - delta, now]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidityWindow {
    pub delta: SimTime,
}

impl ValidityWindow {
    pub fn contains(&self, t_stamp_s: u32, t_att: SimTime, upper: SimTime) -> bool {
        let stamp = SimTime::from_secs(t_stamp_s as u64);
        stamp + self.delta >= t_att && stamp <= upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectCause {
    /// MAC did not verify under the shared key.
    BadTag,
    /// Message bound to a different attestation epoch (or receiver has none).
    WrongEpoch,
    /// Timestamp outside the validity window.
    StaleTimestamp,
    /// Wrong length or reserved cell code.
    Malformed,
}

impl RejectCause {
    pub const ALL: [RejectCause; 4] = [
        RejectCause::BadTag,
        RejectCause::WrongEpoch,
        RejectCause::StaleTimestamp,
        RejectCause::Malformed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RejectCause::BadTag => "bad_tag",
            RejectCause::WrongEpoch => "wrong_epoch",
            RejectCause::StaleTimestamp => "stale_timestamp",
            RejectCause::Malformed => "malformed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Message fused; `newly_known` cells left the Unknown state.
    Accepted {
        newly_known: usize,
    },
    Rejected(RejectCause),
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted { .. })
    }
}

/// One prover's protocol state.
#[derive(Debug, Clone)]
pub struct ProverState {
    id: usize,
    key: SymKey,
    good_configs: Arc<Vec<Measurement>>,
    hash: HashAlg,
    bitmask: ObservationBitmask,
    region: Vec<u8>,
    self_result: Option<bool>,
    t_att: Option<SimTime>,
    compromised: bool,
}

impl ProverState {
    pub fn new(
        id: usize,
        n: usize,
        key: SymKey,
        good_configs: Arc<Vec<Measurement>>,
        region: Vec<u8>,
    ) -> Self {
        assert!(id < n, "prover id {id} out of range for n={n}");
        let hash = key.alg();
        ProverState {
            id,
            key,
            good_configs,
            hash,
            bitmask: ObservationBitmask::unknown(n),
            region,
            self_result: None,
            t_att: None,
            compromised: false,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn n(&self) -> usize {
        self.bitmask.len()
    }

    pub fn bitmask(&self) -> &ObservationBitmask {
        &self.bitmask
    }

    pub fn self_result(&self) -> Option<bool> {
        self.self_result
    }

    /// Attestation time of the current epoch, if any.
    pub fn t_att(&self) -> Option<SimTime> {
        self.t_att
    }

    pub fn is_compromised(&self) -> bool {
        self.compromised
    }

    pub fn region(&self) -> &[u8] {
        &self.region
    }

    pub fn key(&self) -> &SymKey {
        &self.key
    }

    /// Overwrites part of the attested region. Used by the software
    /// adversary; the key and protocol code stay out of reach.
    pub fn tamper_region(&mut self, offset: usize, len: usize) {
        let start = offset.min(self.region.len());
        let end = (offset + len).min(self.region.len());
        for b in &mut self.region[start..end] {
            *b = !*b;
        }
        self.compromised = end > start;
    }

    /// Whether the current region measures to a good configuration.
    pub fn region_is_good(&self) -> bool {
        measure(self.hash, &self.region)
            .map(|h| self.good_configs.contains(&h))
            .unwrap_or(false)
    }

    /// Runs self-attestation at the epoch instant `now`.
    ///
    /// Starts a fresh snapshot: foreign cells go back to Unknown and the own
    /// cell records the local verdict.
    pub fn self_attest(&mut self, now: SimTime) {
        let ok = self.region_is_good();
        self.self_result = Some(ok);
        self.t_att = Some(now);
        self.bitmask.clear();
        self.bitmask.set(self.id, CellStatus::from_attestation(ok));
    }

    pub fn build_message(&self, now: SimTime) -> Result<AttestationMessage, ProtocolError> {
        let t_att = self
            .t_att
            .ok_or(ProtocolError::NotAttested { node: self.id })?;
        Ok(AttestationMessage::sign(
            &self.key,
            self.bitmask.clone(),
            now.whole_secs() as u32,
            t_att.whole_secs() as u32,
        ))
    }

    /// Validates `msg` and fuses it into the local view.
    ///
    /// Checks, in order: tag, epoch binding, timestamp window, shape. Any
    /// failure leaves the state untouched.
    pub fn handle_message(
        &mut self,
        msg: &AttestationMessage,
        now: SimTime,
        window: ValidityWindow,
    ) -> Verdict {
        if !msg.verify_tag(&self.key) {
            return Verdict::Rejected(RejectCause::BadTag);
        }
        let Some(t_att) = self.t_att else {
            return Verdict::Rejected(RejectCause::WrongEpoch);
        };
        if msg.t_att as u64 != t_att.whole_secs() {
            return Verdict::Rejected(RejectCause::WrongEpoch);
        }
        if !window.contains(msg.t_stamp, t_att, now) {
            return Verdict::Rejected(RejectCause::StaleTimestamp);
        }
        match self.bitmask.meet_assign(&msg.bitmask) {
            Ok(newly_known) => Verdict::Accepted { newly_known },
            Err(_) => Verdict::Rejected(RejectCause::Malformed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{mac_keygen, PrngState};

    const N: usize = 6;

    fn setup() -> (SymKey, Arc<Vec<Measurement>>, Vec<u8>) {
        let key = mac_keygen(160, HashAlg::Sha1, &mut PrngState::new(1)).unwrap();
        let image = vec![0x42u8; 128];
        let h = measure(HashAlg::Sha1, &image).unwrap();
        (key, Arc::new(vec![h]), image)
    }

    fn prover(id: usize) -> ProverState {
        let (k, h, img) = setup();
        ProverState::new(id, N, k, h, img)
    }

    fn window() -> ValidityWindow {
        ValidityWindow {
            delta: SimTime::from_secs(1),
        }
    }

    #[test]
    fn healthy_self_attestation() {
        let mut p = prover(2);
        assert!(p.bitmask().cells().all(|c| c == CellStatus::Unknown));
        p.self_attest(SimTime::from_secs(5));
        assert_eq!(p.self_result(), Some(true));
        assert_eq!(p.bitmask().get(2), CellStatus::Healthy);
        let unknown = p
            .bitmask()
            .cells()
            .filter(|c| *c == CellStatus::Unknown)
            .count();
        assert_eq!(unknown, N - 1);
    }

    #[test]
    fn tampered_region_attests_compromised() {
        let mut p = prover(0);
        p.tamper_region(10, 3);
        p.self_attest(SimTime::from_secs(5));
        assert_eq!(p.self_result(), Some(false));
        assert_eq!(p.bitmask().get(0), CellStatus::Compromised);
    }

    #[test]
    fn message_before_attestation_is_an_error() {
        let p = prover(1);
        assert_eq!(
            p.build_message(SimTime::ZERO),
            Err(ProtocolError::NotAttested { node: 1 })
        );
    }

    #[test]
    fn compromise_propagates_through_min() {
        let t = SimTime::from_secs(5);
        let mut a = prover(0);
        let mut b = prover(1);
        b.tamper_region(0, 1);
        a.self_attest(t);
        b.self_attest(t);
        let msg = b.build_message(t + SimTime::from_millis(300)).unwrap();
        let v = a.handle_message(&msg, t + SimTime::from_millis(400), window());
        assert_eq!(v, Verdict::Accepted { newly_known: 1 });
        assert_eq!(a.bitmask().get(1), CellStatus::Compromised);
    }

    #[test]
    fn forged_tag_leaves_state_unchanged() {
        let t = SimTime::from_secs(5);
        let mut a = prover(0);
        a.self_attest(t);
        let before = a.bitmask().clone();
        let other_key = mac_keygen(160, HashAlg::Sha1, &mut PrngState::new(2)).unwrap();
        let mut forged_mask = ObservationBitmask::unknown(N);
        forged_mask.set(3, CellStatus::Compromised);
        let msg = AttestationMessage::sign(&other_key, forged_mask, 5, 5);
        assert_eq!(
            a.handle_message(&msg, t, window()),
            Verdict::Rejected(RejectCause::BadTag)
        );
        assert_eq!(a.bitmask(), &before);
    }

    #[test]
    fn prior_epoch_replay_is_rejected() {
        let mut a = prover(0);
        let mut b = prover(1);
        let e1 = SimTime::from_secs(5);
        let e2 = SimTime::from_secs(9);
        a.self_attest(e1);
        b.self_attest(e1);
        let old = b.build_message(e1 + SimTime::from_millis(200)).unwrap();
        a.self_attest(e2);
        let before = a.bitmask().clone();
        assert_eq!(
            a.handle_message(&old, e2 + SimTime::from_millis(10), window()),
            Verdict::Rejected(RejectCause::WrongEpoch)
        );
        assert_eq!(a.bitmask(), &before);
    }

    #[test]
    fn timestamp_window_is_enforced() {
        let (k, _, _) = setup();
        let t = SimTime::from_secs(100);
        let mut a = prover(0);
        a.self_attest(t);
        let future = AttestationMessage::sign(&k, ObservationBitmask::unknown(N), 101, 100);
        assert_eq!(
            a.handle_message(&future, t + SimTime::from_millis(500), window()),
            Verdict::Rejected(RejectCause::StaleTimestamp)
        );
        let early = AttestationMessage::sign(&k, ObservationBitmask::unknown(N), 98, 100);
        assert_eq!(
            a.handle_message(&early, t, window()),
            Verdict::Rejected(RejectCause::StaleTimestamp)
        );
        let edge = AttestationMessage::sign(&k, ObservationBitmask::unknown(N), 99, 100);
        assert!(a.handle_message(&edge, t, window()).is_accepted());
    }

    #[test]
    fn length_mismatch_is_malformed() {
        let (k, _, _) = setup();
        let t = SimTime::from_secs(3);
        let mut a = prover(0);
        a.self_attest(t);
        let msg = AttestationMessage::sign(&k, ObservationBitmask::unknown(N + 1), 3, 3);
        assert_eq!(
            a.handle_message(&msg, t, window()),
            Verdict::Rejected(RejectCause::Malformed)
        );
    }
}
