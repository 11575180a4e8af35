//! Packed 2-bit-per-prover observation vector.

use std::fmt;

use super::cell::CellStatus;
use crate::error::ProtocolError;

const CELLS_PER_WORD: usize = 32;
const LOW_BITS: u64 = 0x5555_5555_5555_5555;

/// A prover's view of the whole network: one [`CellStatus`] per prover.
///
/// Cell `i` lives in bits `2i` (low) and `2i + 1` (high) of a little-endian
/// bit stream. Padding cells past `n` are held at `11` so that word-wise AND
/// and unknown-counting never see garbage.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ObservationBitmask {
    n: usize,
    words: Vec<u64>,
}

impl ObservationBitmask {
    /// All cells Unknown.
    pub fn unknown(n: usize) -> Self {
        ObservationBitmask {
            n,
            words: vec![u64::MAX; n.div_ceil(CELLS_PER_WORD)],
        }
    }

    pub fn from_cells(cells: &[CellStatus]) -> Self {
        let mut b = Self::unknown(cells.len());
        for (i, &c) in cells.iter().enumerate() {
            b.set(i, c);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize) -> CellStatus {
        assert!(i < self.n, "cell {i} out of range for n={}", self.n);
        let code = (self.words[i / CELLS_PER_WORD] >> (2 * (i % CELLS_PER_WORD))) & 0b11;
        CellStatus::from_bits(code as u8).expect("bitmask holds only valid codes")
    }

    pub fn set(&mut self, i: usize, status: CellStatus) {
        assert!(i < self.n, "cell {i} out of range for n={}", self.n);
        let shift = 2 * (i % CELLS_PER_WORD);
        let w = &mut self.words[i / CELLS_PER_WORD];
        *w = (*w & !(0b11 << shift)) | ((status.bits() as u64) << shift);
    }

    pub fn cells(&self) -> impl Iterator<Item = CellStatus> + '_ {
        (0..self.n).map(move |i| self.get(i))
    }

    /// Resets every cell to Unknown.
    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = u64::MAX);
    }

    /// Number of cells that are not Unknown.
    pub fn known_count(&self) -> usize {
        let unknown_including_padding: usize = self
            .words
            .iter()
            .map(|&w| (w & (w >> 1) & LOW_BITS).count_ones() as usize)
            .sum();
        let padding = self.words.len() * CELLS_PER_WORD - self.n;
        self.n - (unknown_including_padding - padding)
    }

    /// In-place cell-wise minimum, computed as bitwise AND.
    ///
    /// Returns the number of cells that left the Unknown state.
    pub fn meet_assign(&mut self, other: &ObservationBitmask) -> Result<usize, ProtocolError> {
        if other.n != self.n {
            return Err(ProtocolError::LengthMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        let before = self.known_count();
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= *b;
        }
        Ok(self.known_count() - before)
    }

    /// True when `self[l] <= other[l]` for every cell.
    pub fn le_cellwise(&self, other: &ObservationBitmask) -> bool {
        self.n == other.n && (0..self.n).all(|i| self.get(i) <= other.get(i))
    }

    /// Packed little-endian bytes, `ceil(2n / 8)` long, zero past `2n` bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = (2 * self.n).div_ceil(8);
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(nbytes);
        let rem_bits = (2 * self.n) % 8;
        if rem_bits != 0 {
            *out.last_mut().unwrap() &= (1u8 << rem_bits) - 1;
        }
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes). Rejects `01` cells.
    pub fn from_bytes(bytes: &[u8], n: usize) -> Result<Self, ProtocolError> {
        let expected = (2 * n).div_ceil(8);
        if bytes.len() != expected {
            return Err(ProtocolError::WireLength {
                expected,
                found: bytes.len(),
            });
        }
        let mut b = Self::unknown(n);
        for (i, c) in bytes.iter().enumerate() {
            for q in 0..4 {
                let idx = 4 * i + q;
                let code = (c >> (2 * q)) & 0b11;
                if idx >= n {
                    if code != 0 {
                        return Err(ProtocolError::NonZeroPadding);
                    }
                    continue;
                }
                match CellStatus::from_bits(code) {
                    Some(s) => b.set(idx, s),
                    None => return Err(ProtocolError::MalformedCell { index: idx }),
                }
            }
        }
        Ok(b)
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Debug for ObservationBitmask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObservationBitmask[")?;
        for (i, c) in self.cells().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str("]")
    }
}

/// Minimum-consensus fusion of `own` with every received observation.
///
/// Result cell `l` is `min(own[l], r[l] for r in received)`; with the codes
/// restricted to `{00, 10, 11}` that minimum is a plain bitwise AND.
pub fn combine<'a, I>(
    own: &ObservationBitmask,
    received: I,
) -> Result<ObservationBitmask, ProtocolError>
where
    I: IntoIterator<Item = &'a ObservationBitmask>,
{
    let mut out = own.clone();
    for r in received {
        out.meet_assign(r)?;
    }
    Ok(out)
}
