//! Coverage `C_X = Y` and Minimum Coverage Time.
//!
//! Both fractions are taken over the reachable population `R`: coverage is
//! the largest `Y` such that at least `ceil(X·|R|)` reachable provers each
//! hold a non-Unknown cell for at least `ceil(Y·|R|)` reachable provers.

use crate::attest::ObservationBitmask;
use crate::error::{Error, Result};
use crate::time::SimTime;

// Absorbs binary rounding in products such as 0.95 * 100.
const EPS: f64 = 1e-9;

/// Smallest integer count reaching `frac` of `total`, at least 1.
pub fn required_count(frac: f64, total: usize) -> usize {
    ((frac * total as f64 - EPS).ceil().max(1.0)) as usize
}

/// Coverage of a network snapshot for prover fraction `x`.
pub fn coverage(bitmasks: &[ObservationBitmask], reachable: &[bool], x: f64) -> Result<f64> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "coverage fraction {x} outside (0, 1]"
        )));
    }
    if bitmasks.len() != reachable.len() {
        return Err(Error::InvalidInput(
            "one reachability flag per prover required".into(),
        ));
    }
    let members: Vec<usize> = (0..reachable.len()).filter(|&i| reachable[i]).collect();
    if members.is_empty() {
        return Err(Error::InvalidInput(
            "coverage over an empty reachable set".into(),
        ));
    }
    let r = members.len();
    let mut known: Vec<usize> = members
        .iter()
        .map(|&i| {
            members
                .iter()
                .filter(|&&j| bitmasks[i].get(j).is_known())
                .count()
        })
        .collect();
    known.sort_unstable_by(|a, b| b.cmp(a));
    let m = required_count(x, r);
    Ok(known[m - 1] as f64 / r as f64)
}

/// Fraction of the network a snapshot reports on.
pub fn representativity(bitmask: &ObservationBitmask) -> f64 {
    if bitmask.is_empty() {
        return 0.0;
    }
    bitmask.known_count() as f64 / bitmask.len() as f64
}

/// Tracks, for a fixed prover quota `m`, the largest knowledge count `k`
/// held by at least `m` provers. Counts only grow, so `k` only grows.
#[derive(Debug, Clone)]
pub struct KnowledgeHistogram {
    /// `at_least[k]` = provers whose count is `>= k`.
    at_least: Vec<usize>,
    quotas: Vec<(usize, usize)>,
}

impl KnowledgeHistogram {
    /// `counts` are the starting knowledge counts of the tracked provers.
    pub fn new(
        max_count: usize,
        counts: impl IntoIterator<Item = usize>,
        quotas: &[usize],
    ) -> Self {
        let mut h = KnowledgeHistogram {
            at_least: vec![0; max_count + 2],
            quotas: quotas.iter().map(|&m| (m, 0)).collect(),
        };
        for c in counts {
            for k in 0..=c.min(max_count) {
                h.at_least[k] += 1;
            }
        }
        h.settle();
        h
    }

    pub fn raise(&mut self, from: usize, to: usize) {
        let cap = self.at_least.len() - 2;
        for k in from.min(cap) + 1..=to.min(cap) {
            self.at_least[k] += 1;
        }
        self.settle();
    }

    fn settle(&mut self) {
        for (m, k) in &mut self.quotas {
            while *k + 1 < self.at_least.len() && self.at_least[*k + 1] >= *m {
                *k += 1;
            }
        }
    }

    /// Current `k` for quota index `q`.
    pub fn level(&self, q: usize) -> usize {
        self.quotas[q].1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverageSample {
    /// Offset from the attestation instant.
    pub t: SimTime,
    /// Knowledge count reached by the quota; `Y = known / |R|`.
    pub known: usize,
}

/// Step function `Y(t)` for one prover fraction `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSeries {
    pub x: f64,
    pub reachable: usize,
    pub samples: Vec<CoverageSample>,
}

impl CoverageSeries {
    /// Replays knowledge-count increases of the reachable provers.
    ///
    /// `initial[i]` is prover `i`'s count at the attestation instant and each
    /// event `(t, i, count)` raises it. Non-reachable provers are ignored.
    pub fn from_events(
        x: f64,
        reachable: &[bool],
        initial: &[usize],
        events: &[(SimTime, usize, usize)],
    ) -> Option<Self> {
        let r = reachable.iter().filter(|&&b| b).count();
        if r == 0 {
            return None;
        }
        let m = required_count(x, r);
        let mut counts: Vec<usize> = initial.iter().map(|&c| c.min(r)).collect();
        let mut hist = KnowledgeHistogram::new(
            r,
            (0..counts.len())
                .filter(|&i| reachable[i])
                .map(|i| counts[i]),
            &[m],
        );
        let mut samples = vec![CoverageSample {
            t: SimTime::ZERO,
            known: hist.level(0),
        }];
        for &(t, i, c) in events {
            if !reachable[i] {
                continue;
            }
            let c = c.min(r);
            if c <= counts[i] {
                continue;
            }
            hist.raise(counts[i], c);
            counts[i] = c;
            let level = hist.level(0);
            let last = samples.last_mut().unwrap();
            if level != last.known {
                if last.t == t {
                    last.known = level;
                } else {
                    samples.push(CoverageSample { t, known: level });
                }
            }
        }
        Some(CoverageSeries {
            x,
            reachable: r,
            samples,
        })
    }

    pub fn y(&self, sample: &CoverageSample) -> f64 {
        sample.known as f64 / self.reachable as f64
    }

    pub fn final_y(&self) -> f64 {
        self.y(self.samples.last().unwrap())
    }

    /// Coverage at offset `t`.
    pub fn y_at(&self, t: SimTime) -> f64 {
        let idx = self.samples.partition_point(|s| s.t <= t);
        self.y(&self.samples[idx.saturating_sub(1)])
    }

    /// Earliest offset at which coverage reaches `y_target`, if ever.
    pub fn mct(&self, y_target: f64) -> Option<SimTime> {
        let need = required_count(y_target, self.reachable);
        self.samples.iter().find(|s| s.known >= need).map(|s| s.t)
    }
}
