//! Attacker behaviours: the channel adversary (drop, tamper, forge,
//! replay), the software adversary overwriting attested memory, and the
//! mobile adversary's evasion policy (see [`mob_evade`]).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::attest::signed_bytes;
use crate::attest::{AttestationMessage, CellStatus, ObservationBitmask, ProverState};
use crate::crypto::{mac_sign, MacTag, PrngState, SymKey, MAC_TAG_BYTES};

pub use crate::netsim::mob_evade;

/// Captured messages kept per epoch for replay.
const ARCHIVE_PER_EPOCH: usize = 16;

/// Bytes of attested memory a software compromise overwrites.
pub const TAMPER_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Interception {
    Deliver,
    Drop,
    /// Altered in flight; the tag is left untouched.
    Replace(AttestationMessage),
}

/// Settings of one channel adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct ComSettings {
    pub drop_rate: f64,
    pub replay: bool,
    pub forge: bool,
    pub tamper_rate: f64,
    pub inject_burst: usize,
    pub corrupt_queries: bool,
    pub key_compromise: bool,
}

/// Channel adversary with its own random stream and capture archive.
#[derive(Debug, Clone)]
pub struct ComAdversary {
    pub settings: ComSettings,
    rng: PrngState,
    archive: BTreeMap<u32, Vec<Arc<AttestationMessage>>>,
}

impl ComAdversary {
    pub fn new(settings: ComSettings, rng: PrngState) -> Self {
        ComAdversary {
            settings,
            rng,
            archive: BTreeMap::new(),
        }
    }

    /// Records a message seen on the channel for later replay.
    pub fn capture(&mut self, msg: &Arc<AttestationMessage>) {
        if !self.settings.replay {
            return;
        }
        let bin = self.archive.entry(msg.t_att).or_default();
        if bin.len() < ARCHIVE_PER_EPOCH {
            bin.push(msg.clone());
        }
    }

    /// Picks a captured message, preferring epochs older than `current_t_att`.
    pub fn pick_replay(&mut self, current_t_att: u32) -> Option<Arc<AttestationMessage>> {
        let older: Vec<&Arc<AttestationMessage>> = self
            .archive
            .range(..current_t_att)
            .flat_map(|(_, v)| v.iter())
            .collect();
        let pool = if older.is_empty() {
            self.archive.get(&current_t_att)?.iter().collect()
        } else {
            older
        };
        if pool.is_empty() {
            return None;
        }
        let k = self.rng.below(pool.len() as u64) as usize;
        Some(pool[k].clone())
    }

    /// A forged report claiming every prover is healthy. Without the key
    /// the tag is random; with `key_compromise` it is valid.
    pub fn forge(
        &mut self,
        n: usize,
        t_att: u32,
        t_stamp: u32,
        key: &SymKey,
    ) -> AttestationMessage {
        let cells = vec![CellStatus::Healthy; n];
        let bitmask = ObservationBitmask::from_cells(&cells);
        let tag = if self.settings.key_compromise {
            mac_sign(key, &signed_bytes(&bitmask, t_stamp, t_att))
        } else {
            let mut t = [0u8; MAC_TAG_BYTES];
            self.rng.fill_bytes(&mut t);
            MacTag(t)
        };
        AttestationMessage {
            bitmask,
            t_att,
            t_stamp,
            tag,
        }
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        self.rng.below(bound)
    }

    /// Corrupts a snapshot on its way to the verifier.
    pub fn corrupt_query(&mut self, msg: &mut AttestationMessage) {
        if self.settings.corrupt_queries {
            let byte = self.rng.below(MAC_TAG_BYTES as u64) as usize;
            msg.tag.0[byte] ^= 1 << self.rng.below(8);
        }
    }
}

/// Decides the fate of one in-flight message.
pub fn com_intercept(adv: &mut ComAdversary, msg: &AttestationMessage) -> Interception {
    // Both draws always happen so the stream does not depend on outcomes.
    let drop = adv.rng.chance(adv.settings.drop_rate);
    let tamper = adv.rng.chance(adv.settings.tamper_rate);
    let cell = adv.rng.below(msg.n().max(1) as u64) as usize;
    if drop {
        return Interception::Drop;
    }
    if tamper && msg.n() > 0 {
        let mut altered = msg.clone();
        let flipped = match altered.bitmask.get(cell) {
            CellStatus::Healthy => CellStatus::Compromised,
            _ => CellStatus::Healthy,
        };
        altered.bitmask.set(cell, flipped);
        return Interception::Replace(altered);
    }
    Interception::Deliver
}

/// Software compromise: overwrites part of the victim's attested memory.
/// The key and the protocol code are out of reach, so the victim keeps
/// signing its true view.
pub fn soft_compromise(state: &mut ProverState, rng: &mut PrngState) {
    let len = state.region().len();
    let span = TAMPER_BYTES.min(len);
    let offset = rng.below((len - span + 1) as u64) as usize;
    state.tamper_region(offset, span);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attest::{RejectCause, ValidityWindow, Verdict};
    use crate::crypto::{mac_keygen, measure, HashAlg};
    use crate::time::SimTime;

    fn settings() -> ComSettings {
        ComSettings {
            drop_rate: 0.0,
            replay: true,
            forge: true,
            tamper_rate: 0.0,
            inject_burst: 1,
            corrupt_queries: false,
            key_compromise: false,
        }
    }

    fn prover(n: usize) -> (SymKey, ProverState) {
        let key = mac_keygen(160, HashAlg::Sha1, &mut PrngState::new(3)).unwrap();
        let image = vec![1u8; 64];
        let good = Arc::new(vec![measure(HashAlg::Sha1, &image).unwrap()]);
        let p = ProverState::new(0, n, key.clone(), good, image);
        (key, p)
    }

    fn window() -> ValidityWindow {
        ValidityWindow {
            delta: SimTime::from_secs(1),
        }
    }

    #[test]
    fn forgeries_rejected_by_tag() {
        let (key, mut p) = prover(8);
        let t = SimTime::from_secs(5);
        p.self_attest(t);
        let mut adv = ComAdversary::new(settings(), PrngState::new(4));
        for _ in 0..2000 {
            let f = adv.forge(8, 5, 5, &key);
            assert_eq!(
                p.handle_message(&f, t, window()),
                Verdict::Rejected(RejectCause::BadTag)
            );
        }
    }

    #[test]
    fn key_compromise_forgery_is_accepted() {
        let (key, mut p) = prover(4);
        let t = SimTime::from_secs(5);
        p.self_attest(t);
        let mut s = settings();
        s.key_compromise = true;
        let mut adv = ComAdversary::new(s, PrngState::new(4));
        let f = adv.forge(4, 5, 5, &key);
        assert!(p.handle_message(&f, t, window()).is_accepted());
    }

    #[test]
    fn replay_prefers_older_epochs() {
        let (key, mut p) = prover(4);
        p.self_attest(SimTime::from_secs(3));
        let old = Arc::new(p.build_message(SimTime::from_secs(3)).unwrap());
        p.self_attest(SimTime::from_secs(9));
        let cur = Arc::new(p.build_message(SimTime::from_secs(9)).unwrap());
        let mut adv = ComAdversary::new(settings(), PrngState::new(1));
        adv.capture(&old);
        adv.capture(&cur);
        let r = adv.pick_replay(9).unwrap();
        assert_eq!(r.t_att, 3);
        let _ = key;
        assert_eq!(
            p.handle_message(&r, SimTime::from_secs(9), window()),
            Verdict::Rejected(RejectCause::WrongEpoch)
        );
    }

    #[test]
    fn full_drop_and_tamper() {
        let (_, mut p) = prover(4);
        p.self_attest(SimTime::from_secs(1));
        let m = p.build_message(SimTime::from_secs(1)).unwrap();
        let mut s = settings();
        s.drop_rate = 1.0;
        let mut adv = ComAdversary::new(s.clone(), PrngState::new(2));
        assert_eq!(com_intercept(&mut adv, &m), Interception::Drop);
        s.drop_rate = 0.0;
        s.tamper_rate = 1.0;
        let mut adv = ComAdversary::new(s, PrngState::new(2));
        match com_intercept(&mut adv, &m) {
            Interception::Replace(t) => {
                assert_ne!(t.bitmask, m.bitmask);
                assert_eq!(t.tag, m.tag);
                assert_eq!(
                    p.handle_message(&t, SimTime::from_secs(1), window()),
                    Verdict::Rejected(RejectCause::BadTag)
                );
            }
            other => panic!("expected replacement, got {other:?}"),
        }
    }

    #[test]
    fn soft_compromise_fails_next_attestation() {
        let (_, mut p) = prover(4);
        soft_compromise(&mut p, &mut PrngState::new(8));
        p.self_attest(SimTime::from_secs(2));
        assert_eq!(p.self_result(), Some(false));
        assert_eq!(p.bitmask().get(0), CellStatus::Compromised);
    }
}
