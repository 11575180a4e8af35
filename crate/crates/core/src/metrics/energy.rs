//! Energy accounting from operation counts.
//!
//! Totals are always recomputed as `constant × count`, never accumulated as
//! floats, so the ledger total is exactly the weighted operation count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-operation energy costs. Defaults are placeholder radio/MCU
/// magnitudes, not measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConstants {
    /// Joules per byte sent.
    #[serde(default = "d_send")]
    pub send_j_per_byte: f64,
    /// Joules per byte received.
    #[serde(default = "d_recv")]
    pub recv_j_per_byte: f64,
    /// Joules per HMAC computation.
    #[serde(default = "d_hmac")]
    pub hmac_j: f64,
    /// Joules per consensus update.
    #[serde(default = "d_min")]
    pub min_j: f64,
    /// Joules per self-attestation.
    #[serde(default = "d_att")]
    pub att_j: f64,
}

fn d_send() -> f64 {
    0.6e-6
}
fn d_recv() -> f64 {
    0.67e-6
}
fn d_hmac() -> f64 {
    50e-6
}
fn d_min() -> f64 {
    1e-6
}
fn d_att() -> f64 {
    200e-6
}

impl Default for EnergyConstants {
    fn default() -> Self {
        EnergyConstants {
            send_j_per_byte: d_send(),
            recv_j_per_byte: d_recv(),
            hmac_j: d_hmac(),
            min_j: d_min(),
            att_j: d_att(),
        }
    }
}

impl EnergyConstants {
    pub(crate) fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("energy.send_j_per_byte", self.send_j_per_byte),
            ("energy.recv_j_per_byte", self.recv_j_per_byte),
            ("energy.hmac_j", self.hmac_j),
            ("energy.min_j", self.min_j),
            ("energy.att_j", self.att_j),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(k, "must be a non-negative number"));
            }
        }
        Ok(())
    }

    /// Bytes charged per message: `28 + 2n/8`.
    pub fn message_bytes(n: usize) -> f64 {
        28.0 + 2.0 * n as f64 / 8.0
    }

    pub fn per_send(&self, n: usize) -> f64 {
        self.send_j_per_byte * Self::message_bytes(n)
    }

    pub fn per_receive(&self, n: usize) -> f64 {
        self.recv_j_per_byte * Self::message_bytes(n)
    }
}

/// Operation counts of one prover.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnergyCounts {
    pub sends: u64,
    pub receptions: u64,
    pub hmacs: u64,
    pub mins: u64,
    pub attestations: u64,
}

impl EnergyCounts {
    pub fn total(&self, c: &EnergyConstants, n: usize) -> f64 {
        self.sends as f64 * c.per_send(n)
            + self.receptions as f64 * c.per_receive(n)
            + self.hmacs as f64 * c.hmac_j
            + self.mins as f64 * c.min_j
            + self.attestations as f64 * c.att_j
    }
}

/// Upper bound on one prover's consumption:
/// `E_att·atts + Σ_rounds [E_hmac + E_send^i + heard_t·(E_hmac + E_recv^i + E_min)]`,
/// where `heard[t]` counts messages delivered to the prover in round `t`.
pub fn energy_bound(heard: &[u32], attestations: u64, c: &EnergyConstants, n: usize) -> f64 {
    let per_round = c.hmac_j + c.per_send(n);
    let per_heard = c.hmac_j + c.per_receive(n) + c.min_j;
    let rounds = heard.len().saturating_sub(1) as f64;
    let heard_total: u64 = heard.iter().map(|&h| h as u64).sum();
    attestations as f64 * c.att_j + rounds * per_round + heard_total as f64 * per_heard
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_send_for_128_provers() {
        let c = EnergyConstants::default();
        assert!((c.per_send(128) - 36e-6).abs() < 1e-18);
        assert!((c.per_receive(128) - 0.67e-6 * 60.0).abs() < 1e-18);
    }

    #[test]
    fn zero_rounds_costs_one_attestation() {
        let c = EnergyConstants::default();
        let counts = EnergyCounts {
            attestations: 1,
            ..Default::default()
        };
        assert_eq!(counts.total(&c, 64), c.att_j);
        assert_eq!(energy_bound(&[0], 1, &c, 64), c.att_j);
    }

    #[test]
    fn total_is_weighted_count() {
        let c = EnergyConstants::default();
        let k = EnergyCounts {
            sends: 3,
            receptions: 5,
            hmacs: 8,
            mins: 5,
            attestations: 1,
        };
        let expected = 3.0 * c.per_send(16)
            + 5.0 * c.per_receive(16)
            + 8.0 * c.hmac_j
            + 5.0 * c.min_j
            + c.att_j;
        assert_eq!(k.total(&c, 16), expected);
        // Every reception verified and fused: the bound is tight.
        assert!((energy_bound(&[0, 2, 2, 1], 1, &c, 16) - expected).abs() < 1e-15);
    }
}
