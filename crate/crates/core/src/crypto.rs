//! Keyed MAC, seeded PRNG and configuration measurement.
//!
//! Tags and measurements are 160 bits regardless of the hash backing them;
//! SHA-256 output is truncated (left-most bytes) when selected.

use std::fmt;

use hmac::{Hmac, KeyInit, Mac};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tag length in bytes (160 bits).
pub const MAC_TAG_BYTES: usize = 20;
/// Measurement digest length in bytes (160 bits).
pub const MEASUREMENT_BYTES: usize = 20;
/// Key lengths accepted by [`mac_keygen`].
pub const SUPPORTED_KEY_BITS: [u32; 3] = [128, 160, 256];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashAlg {
    #[default]
    Sha1,
    Sha256,
}

/// Shared attestation key.
#[derive(Clone, PartialEq, Eq)]
pub struct SymKey {
    bytes: Vec<u8>,
    alg: HashAlg,
}

impl SymKey {
    pub fn from_bytes(bytes: Vec<u8>, alg: HashAlg) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::InvalidInput("empty key".into()));
        }
        Ok(SymKey { bytes, alg })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bits(&self) -> u32 {
        self.bytes.len() as u32 * 8
    }

    pub fn alg(&self) -> HashAlg {
        self.alg
    }
}

impl fmt::Debug for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymKey({} bits, {:?})", self.bits(), self.alg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacTag(pub [u8; MAC_TAG_BYTES]);

impl MacTag {
    pub fn as_bytes(&self) -> &[u8; MAC_TAG_BYTES] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Measurement(pub [u8; MEASUREMENT_BYTES]);

/// Counter-based deterministic generator.
///
/// Wraps ChaCha8 keyed by `(seed, stream)`; the word position is the step
/// counter, so identical `(seed, stream, steps)` always yield the same
/// output.
#[derive(Clone, PartialEq, Eq)]
pub struct PrngState {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl PrngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream derived from the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        PrngState { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn steps(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Value-style step: returns the output and the advanced state.
    pub fn advance(mut self) -> (u32, PrngState) {
        let v = self.next_u32();
        (v, self)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, bound)`. `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        // Lemire's multiply-shift with rejection.
        let mut x = self.next_u64();
        let mut m = (x as u128) * (bound as u128);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                x = self.next_u64();
                m = (x as u128) * (bound as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Bernoulli trial with probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            false
        } else if p >= 1.0 {
            true
        } else {
            self.next_f64() < p
        }
    }

    pub fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest);
    }
}

impl fmt::Debug for PrngState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrngState")
            .field("seed", &self.seed)
            .field("stream", &self.stream)
            .field("steps", &self.steps())
            .finish()
    }
}

/// Draws a fresh key of `security_param` bits from `rng`.
pub fn mac_keygen(security_param: u32, alg: HashAlg, rng: &mut PrngState) -> Result<SymKey> {
    if !SUPPORTED_KEY_BITS.contains(&security_param) {
        return Err(Error::config(
            "crypto.key_bits",
            format!(
                "unsupported key length {security_param}, expected one of {SUPPORTED_KEY_BITS:?}"
            ),
        ));
    }
    let mut bytes = vec![0u8; security_param as usize / 8];
    rng.fill_bytes(&mut bytes);
    Ok(SymKey { bytes, alg })
}

pub fn mac_sign(key: &SymKey, message: &[u8]) -> MacTag {
    let mut out = [0u8; MAC_TAG_BYTES];
    match key.alg {
        HashAlg::Sha1 => {
            let mut mac = <Hmac<Sha1> as KeyInit>::new_from_slice(&key.bytes)
                .expect("HMAC accepts any key length");
            mac.update(message);
            out.copy_from_slice(&mac.finalize().into_bytes()[..MAC_TAG_BYTES]);
        }
        HashAlg::Sha256 => {
            let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(&key.bytes)
                .expect("HMAC accepts any key length");
            mac.update(message);
            out.copy_from_slice(&mac.finalize().into_bytes()[..MAC_TAG_BYTES]);
        }
    }
    MacTag(out)
}

/// Constant-time tag check.
pub fn mac_verify(key: &SymKey, tag: &MacTag, message: &[u8]) -> bool {
    match key.alg {
        HashAlg::Sha1 => {
            let mut mac = <Hmac<Sha1> as KeyInit>::new_from_slice(&key.bytes)
                .expect("HMAC accepts any key length");
            mac.update(message);
            mac.verify_truncated_left(&tag.0).is_ok()
        }
        HashAlg::Sha256 => {
            let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(&key.bytes)
                .expect("HMAC accepts any key length");
            mac.update(message);
            mac.verify_truncated_left(&tag.0).is_ok()
        }
    }
}

/// Hash of an attested memory region.
pub fn measure(alg: HashAlg, region: &[u8]) -> Result<Measurement> {
    if region.is_empty() {
        return Err(Error::InvalidInput("empty attestation region".into()));
    }
    let mut out = [0u8; MEASUREMENT_BYTES];
    match alg {
        HashAlg::Sha1 => out.copy_from_slice(&Sha1::digest(region)[..MEASUREMENT_BYTES]),
        HashAlg::Sha256 => out.copy_from_slice(&Sha256::digest(region)[..MEASUREMENT_BYTES]),
    }
    Ok(Measurement(out))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    fn key(seed: u64) -> SymKey {
        mac_keygen(160, HashAlg::Sha1, &mut PrngState::new(seed)).unwrap()
    }

    #[test]
    fn keygen_lengths() {
        let mut rng = PrngState::new(1);
        assert_eq!(
            mac_keygen(160, HashAlg::Sha1, &mut rng)
                .unwrap()
                .as_bytes()
                .len(),
            20
        );
        assert_eq!(
            mac_keygen(128, HashAlg::Sha1, &mut rng)
                .unwrap()
                .as_bytes()
                .len(),
            16
        );
        assert_eq!(
            mac_keygen(256, HashAlg::Sha1, &mut rng)
                .unwrap()
                .as_bytes()
                .len(),
            32
        );
        assert!(matches!(
            mac_keygen(100, HashAlg::Sha1, &mut rng),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn keygen_replays_with_run_seed() {
        assert_eq!(key(42).as_bytes(), key(42).as_bytes());
        assert_ne!(key(42).as_bytes(), key(43).as_bytes());
    }

    #[test]
    fn hmac_sha1_known_answer() {
        // RFC 2202 test case 2.
        let k = SymKey::from_bytes(b"Jefe".to_vec(), HashAlg::Sha1).unwrap();
        let tag = mac_sign(&k, b"what do ya want for nothing?");
        let hex: String = tag.0.iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, "effcdf6ae5eb2fa2d27416d5f184df9c259a7c79");
    }

    #[test]
    fn sign_is_deterministic_and_round_trips() {
        for alg in [HashAlg::Sha1, HashAlg::Sha256] {
            let k = mac_keygen(160, alg, &mut PrngState::new(9)).unwrap();
            let m = b"bitmask||stamp||t_att";
            assert_eq!(mac_sign(&k, m), mac_sign(&k, m));
            assert!(mac_verify(&k, &mac_sign(&k, m), m));
        }
    }

    #[test]
    fn message_collision_scan() {
        let k = key(7);
        let mut rng = PrngState::with_stream(7, 1);
        let mut tags = HashSet::new();
        let mut msgs = HashSet::new();
        for _ in 0..10_000 {
            let mut m = vec![0u8; 40];
            rng.fill_bytes(&mut m);
            if msgs.insert(m.clone()) {
                assert!(tags.insert(mac_sign(&k, &m)), "tag collision");
            }
        }
    }

    #[test]
    fn key_collision_scan() {
        let m = b"fixed message";
        let mut tags = HashSet::new();
        for seed in 0..10_000u64 {
            assert!(tags.insert(mac_sign(&key(seed), m)));
        }
    }

    #[test]
    fn every_single_bit_flip_is_rejected() {
        let k = key(3);
        let m: Vec<u8> = (0..60u8).collect();
        let tag = mac_sign(&k, &m);
        for byte in 0..m.len() {
            for bit in 0..8 {
                let mut t = m.clone();
                t[byte] ^= 1 << bit;
                assert!(!mac_verify(&k, &tag, &t), "flip at {byte}:{bit} accepted");
            }
        }
    }

    #[test]
    fn wrong_key_is_rejected() {
        let m = b"observation";
        let tag = mac_sign(&key(1), m);
        for seed in 2..500 {
            assert!(!mac_verify(&key(seed), &tag, m));
        }
    }

    #[test]
    fn prng_replay_and_divergence() {
        let mut a = PrngState::new(5);
        let mut b = PrngState::new(5);
        let xs: Vec<u32> = (0..5).map(|_| a.next_u32()).collect();
        let ys: Vec<u32> = (0..5).map(|_| b.next_u32()).collect();
        assert_eq!(xs, ys);
        assert_eq!(a.steps(), 5);

        for s in 0..100u64 {
            let mut p = PrngState::new(2 * s);
            let mut q = PrngState::new(2 * s + 1);
            let same = (0..4).all(|_| p.next_u32() == q.next_u32());
            assert!(
                !same,
                "seeds {} and {} agree on 4 outputs",
                2 * s,
                2 * s + 1
            );
        }
    }

    #[test]
    fn prng_no_immediate_repeats() {
        let mut p = PrngState::new(11);
        let mut prev = p.next_u32();
        for _ in 0..10_000 {
            let v = p.next_u32();
            assert_ne!(v, prev);
            prev = v;
        }
    }

    #[test]
    fn advance_matches_next() {
        let mut a = PrngState::new(8);
        let (v, b) = PrngState::new(8).advance();
        assert_eq!(v, a.next_u32());
        assert_eq!(a, b);
    }

    #[test]
    fn below_stays_in_range() {
        let mut p = PrngState::new(1);
        for bound in [1u64, 2, 3, 7, 1000] {
            for _ in 0..1000 {
                assert!(p.below(bound) < bound);
            }
        }
    }

    #[test]
    fn measure_rules() {
        assert!(measure(HashAlg::Sha1, &[]).is_err());
        let region = vec![0xA5u8; 256];
        let h = measure(HashAlg::Sha1, &region).unwrap();
        assert_eq!(h, measure(HashAlg::Sha1, &region).unwrap());
        for i in 0..region.len() {
            let mut r = region.clone();
            r[i] ^= 0x01;
            assert_ne!(measure(HashAlg::Sha1, &r).unwrap(), h);
        }
    }
}
