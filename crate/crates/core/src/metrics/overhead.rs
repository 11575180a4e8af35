//! Static per-prover overheads.

pub use crate::attest::message_bits;

/// Persistent state per prover, in bits: key, bitmask and the 160-bit
/// digests of the good configurations.
pub const fn memory_bits(key_len_bits: u64, n: u64, good_configs: u64) -> u64 {
    key_len_bits + 2 * n + 160 * good_configs
}
