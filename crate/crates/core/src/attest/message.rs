//! Attestation message and its bit-exact wire format.
//!
//! Layout, as one little-endian bit stream (bit `k` of a byte is stream
//! position `8 * byte + k`, multi-bit fields are written LSB first):
//!
//! | field     | bits |
//! |-----------|------|
//! | bitmask   | 2n   |
//! | t_stamp   | 32   |
//! | t_att     | 32   |
//! | tag       | 160  |
//!
//! Total `2n + 224` bits, zero-padded to a whole byte. The tag covers the
//! first three fields encoded the same way (zero-padded to a byte).

use super::bitmask::ObservationBitmask;
use crate::crypto::{mac_sign, mac_verify, MacTag, SymKey, MAC_TAG_BYTES};
use crate::error::ProtocolError;

/// Fixed per-message overhead: two 32-bit times plus a 160-bit tag.
pub const HEADER_BITS: u64 = 32 + 32 + 8 * MAC_TAG_BYTES as u64;

/// Serialized size of one message for a network of `n` provers.
pub const fn message_bits(n: u64) -> u64 {
    2 * n + HEADER_BITS
}

pub const fn message_bytes(n: u64) -> u64 {
    message_bits(n).div_ceil(8)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationMessage {
    pub bitmask: ObservationBitmask,
    /// Attestation epoch, whole seconds since scenario start.
    pub t_att: u32,
    /// Send time, whole seconds since scenario start.
    pub t_stamp: u32,
    pub tag: MacTag,
}

impl AttestationMessage {
    pub fn sign(key: &SymKey, bitmask: ObservationBitmask, t_stamp: u32, t_att: u32) -> Self {
        let tag = mac_sign(key, &signed_bytes(&bitmask, t_stamp, t_att));
        AttestationMessage {
            bitmask,
            t_att,
            t_stamp,
            tag,
        }
    }

    pub fn verify_tag(&self, key: &SymKey) -> bool {
        mac_verify(
            key,
            &self.tag,
            &signed_bytes(&self.bitmask, self.t_stamp, self.t_att),
        )
    }

    pub fn n(&self) -> usize {
        self.bitmask.len()
    }

    pub fn wire_bits(&self) -> u64 {
        message_bits(self.n() as u64)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = BitWriter::with_capacity_bits(self.wire_bits());
        write_body(&mut w, &self.bitmask, self.t_stamp, self.t_att);
        w.write_bytes(self.tag.as_bytes());
        debug_assert_eq!(w.bit_len(), self.wire_bits());
        w.finish()
    }

    /// Decodes a message for a network of `n` provers.
    pub fn decode(bytes: &[u8], n: usize) -> Result<Self, ProtocolError> {
        let bits = message_bits(n as u64);
        let expected = bits.div_ceil(8) as usize;
        if bytes.len() != expected {
            return Err(ProtocolError::WireLength {
                expected,
                found: bytes.len(),
            });
        }
        let mut r = BitReader::new(bytes);
        let mut mask_bytes = vec![0u8; (2 * n).div_ceil(8)];
        let full = (2 * n) / 8;
        for b in mask_bytes.iter_mut().take(full) {
            *b = r.read(8) as u8;
        }
        if !(2 * n).is_multiple_of(8) {
            mask_bytes[full] = r.read(((2 * n) % 8) as u32) as u8;
        }
        let bitmask = ObservationBitmask::from_bytes(&mask_bytes, n)?;
        let t_stamp = r.read(32) as u32;
        let t_att = r.read(32) as u32;
        let mut tag = [0u8; MAC_TAG_BYTES];
        for b in tag.iter_mut() {
            *b = r.read(8) as u8;
        }
        let pad = (8 - bits % 8) % 8;
        if pad != 0 && r.read(pad as u32) != 0 {
            return Err(ProtocolError::NonZeroPadding);
        }
        Ok(AttestationMessage {
            bitmask,
            t_att,
            t_stamp,
            tag: MacTag(tag),
        })
    }
}

/// Bytes covered by the MAC: `bitmask || t_stamp || t_att`.
pub fn signed_bytes(bitmask: &ObservationBitmask, t_stamp: u32, t_att: u32) -> Vec<u8> {
    let mut w = BitWriter::with_capacity_bits(2 * bitmask.len() as u64 + 64);
    write_body(&mut w, bitmask, t_stamp, t_att);
    w.finish()
}

fn write_body(w: &mut BitWriter, bitmask: &ObservationBitmask, t_stamp: u32, t_att: u32) {
    let n = bitmask.len();
    let mut remaining = 2 * n as u64;
    for &word in bitmask.words() {
        let take = remaining.min(64);
        w.write(word, take as u32);
        remaining -= take;
    }
    w.write(t_stamp as u64, 32);
    w.write(t_att as u64, 32);
}

struct BitWriter {
    bytes: Vec<u8>,
    bits: u64,
}

impl BitWriter {
    fn with_capacity_bits(bits: u64) -> Self {
        BitWriter {
            bytes: Vec::with_capacity(bits.div_ceil(8) as usize),
            bits: 0,
        }
    }

    fn write(&mut self, value: u64, nbits: u32) {
        for k in 0..nbits {
            let bit = ((value >> k) & 1) as u8;
            let off = (self.bits % 8) as u32;
            if off == 0 {
                self.bytes.push(0);
            }
            *self.bytes.last_mut().unwrap() |= bit << off;
            self.bits += 1;
        }
    }

    fn write_bytes(&mut self, data: &[u8]) {
        for &b in data {
            self.write(b as u64, 8);
        }
    }

    fn bit_len(&self) -> u64 {
        self.bits
    }

    fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    fn read(&mut self, nbits: u32) -> u64 {
        let mut v = 0u64;
        for k in 0..nbits {
            let byte = self.bytes[(self.pos / 8) as usize];
            let bit = (byte >> (self.pos % 8)) & 1;
            v |= (bit as u64) << k;
            self.pos += 1;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::attest::CellStatus;
    use crate::crypto::{mac_keygen, HashAlg, PrngState};

    fn key() -> SymKey {
        mac_keygen(160, HashAlg::Sha1, &mut PrngState::new(1)).unwrap()
    }

    #[test]
    fn payload_sizes() {
        assert_eq!(message_bits(128), 480);
        assert_eq!(message_bytes(128), 60);
        assert_eq!(message_bits(1024), 2272);
        assert_eq!(message_bytes(1024), 284);
        assert_eq!(message_bits(1), 226);
        assert_eq!(message_bytes(1), 29);
    }

    #[test]
    fn encoded_length_is_exact() {
        for n in [1usize, 2, 3, 4, 5, 127, 128, 1024] {
            let m = AttestationMessage::sign(&key(), ObservationBitmask::unknown(n), 3, 2);
            assert_eq!(m.encode().len() as u64, message_bytes(n as u64), "n={n}");
        }
    }

    #[test]
    fn layout_is_bitmask_then_stamp_then_epoch_then_tag() {
        let mut b = ObservationBitmask::unknown(4);
        b.set(0, CellStatus::Healthy);
        b.set(1, CellStatus::Compromised);
        let m = AttestationMessage::sign(&key(), b, 0x0403_0201, 0x0807_0605);
        let bytes = m.encode();
        // cells: 10, 00, 11, 11 -> 0b11_11_00_10
        assert_eq!(bytes[0], 0b1111_0010);
        assert_eq!(&bytes[1..5], &[1, 2, 3, 4]);
        assert_eq!(&bytes[5..9], &[5, 6, 7, 8]);
        assert_eq!(&bytes[9..29], m.tag.as_bytes());
    }

    #[test]
    fn unaligned_fields_straddle_bytes() {
        // n = 1: the bitmask is 2 bits, so t_stamp starts at bit 2.
        let m = AttestationMessage::sign(&key(), ObservationBitmask::unknown(1), 1, 0);
        let bytes = m.encode();
        assert_eq!(bytes[0], 0b0000_0111);
        assert_eq!(AttestationMessage::decode(&bytes, 1).unwrap(), m);
    }

    #[test]
    fn decode_rejects_wrong_length_and_padding() {
        let m = AttestationMessage::sign(&key(), ObservationBitmask::unknown(1), 1, 0);
        let mut bytes = m.encode();
        assert!(matches!(
            AttestationMessage::decode(&bytes[..bytes.len() - 1], 1),
            Err(ProtocolError::WireLength { .. })
        ));
        *bytes.last_mut().unwrap() |= 0x80;
        assert_eq!(
            AttestationMessage::decode(&bytes, 1),
            Err(ProtocolError::NonZeroPadding)
        );
    }

    #[test]
    fn tag_binds_every_field() {
        let k = key();
        let m = AttestationMessage::sign(&k, ObservationBitmask::unknown(8), 10, 7);
        assert!(m.verify_tag(&k));
        let mut e = m.clone();
        e.t_att = 6;
        assert!(!e.verify_tag(&k));
        let mut s = m.clone();
        s.t_stamp = 11;
        assert!(!s.verify_tag(&k));
        let mut b = m.clone();
        b.bitmask.set(3, CellStatus::Healthy);
        assert!(!b.verify_tag(&k));
    }

    proptest! {
        #[test]
        fn wire_round_trip(n in 1usize..300, seed in any::<u64>(), ts in any::<u32>(), ta in any::<u32>()) {
            let mut rng = PrngState::new(seed);
            let cells: Vec<_> = (0..n).map(|_| CellStatus::ALL[rng.below(3) as usize]).collect();
            let m = AttestationMessage::sign(&key(), ObservationBitmask::from_cells(&cells), ts, ta);
            let bytes = m.encode();
            prop_assert_eq!(bytes.len() as u64 * 8 - message_bits(n as u64), (8 - message_bits(n as u64) % 8) % 8);
            prop_assert_eq!(AttestationMessage::decode(&bytes, n).unwrap(), m);
        }
    }
}
