//! 802.15.4-style link model: fixed-size frames, no contention, optional
//! independent per-frame loss.

use crate::crypto::PrngState;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioModel {
    pub range_m: f64,
    pub data_rate_bps: u64,
    pub frame_size: u32,
    pub frame_payload: u32,
    pub loss_prob: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        RadioModel {
            range_m: 75.0,
            data_rate_bps: 250_000,
            frame_size: 127,
            frame_payload: 102,
            loss_prob: 0.0,
        }
    }
}

impl RadioModel {
    pub fn frames_for(&self, payload_bytes: u64) -> u64 {
        payload_bytes.div_ceil(self.frame_payload as u64).max(1)
    }

    /// Airtime of one full frame, rounded up to the microsecond.
    pub fn frame_airtime(&self) -> SimTime {
        SimTime((self.frame_size as u64 * 8 * 1_000_000).div_ceil(self.data_rate_bps))
    }

    pub fn airtime(&self, payload_bytes: u64) -> SimTime {
        self.frame_airtime().times(self.frames_for(payload_bytes))
    }
}

/// Outcome of one broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastPlan {
    pub frames: u64,
    /// Time the last frame leaves the air.
    pub arrival: SimTime,
    /// Neighbours that received every frame.
    pub delivered: Vec<usize>,
    /// Neighbours that lost at least one frame.
    pub lost: Vec<usize>,
}

/// Plans a broadcast started at `t`: the sender first spends `mac_delay`
/// computing the tag, then transmits `ceil(payload / frame_payload)` frames.
/// Every neighbour draws an independent loss trial per frame.
pub fn schedule_broadcast(
    radio: &RadioModel,
    payload_bytes: u64,
    t: SimTime,
    mac_delay: SimTime,
    neighbors: &[usize],
    rng: &mut PrngState,
) -> BroadcastPlan {
    let frames = radio.frames_for(payload_bytes);
    let arrival = t + mac_delay + radio.frame_airtime().times(frames);
    let mut delivered = Vec::with_capacity(neighbors.len());
    let mut lost = Vec::new();
    for &j in neighbors {
        let mut ok = true;
        for _ in 0..frames {
            // Draw every frame so the RNG stream does not depend on early exits.
            if rng.chance(radio.loss_prob) {
                ok = false;
            }
        }
        if ok {
            delivered.push(j);
        } else {
            lost.push(j);
        }
    }
    BroadcastPlan {
        frames,
        arrival,
        delivered,
        lost,
    }
}
