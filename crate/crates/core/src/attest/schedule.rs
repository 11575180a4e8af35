use crate::crypto::PrngState;
use crate::time::SimTime;

/// Next attestation instant: `current + 1 + (prng mod delta_t_max)` seconds.
///
/// The gap is always in `(0, delta_t_max]` seconds, and provers sharing the
/// seed compute identical sequences.
pub fn next_attestation_time(
    mut prng: PrngState,
    current_t_att: SimTime,
    delta_t_max_s: u32,
) -> (SimTime, PrngState) {
    assert!(delta_t_max_s > 0, "delta_t_max must be positive");
    let gap = 1 + (prng.next_u32() % delta_t_max_s) as u64;
    (current_t_att + SimTime::from_secs(gap), prng)
}

/// Shared pseudo-random sequence of attestation times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttestationSchedule {
    prng: PrngState,
    delta_t_max_s: u32,
    last: SimTime,
}

impl AttestationSchedule {
    /// Starts the sequence at `origin`; the first call to
    /// [`next_instant`](Self::next_instant) yields the first attestation time after it.
    pub fn new(seed_att: u64, delta_t_max_s: u32, origin: SimTime) -> Self {
        AttestationSchedule {
            prng: PrngState::with_stream(seed_att, SCHEDULE_STREAM),
            delta_t_max_s,
            last: origin,
        }
    }

    pub fn delta_t_max_s(&self) -> u32 {
        self.delta_t_max_s
    }

    pub fn next_instant(&mut self) -> SimTime {
        let (t, prng) = next_attestation_time(self.prng.clone(), self.last, self.delta_t_max_s);
        self.prng = prng;
        self.last = t;
        t
    }
}

const SCHEDULE_STREAM: u64 = 0x5eed_a77e;
