use std::fmt;

/// Two-bit attestation status of one prover.
///
/// Codes compare as unsigned integers: `Compromised (00) < Healthy (10) <
/// Unknown (11)`. The code `01` is reserved and never constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum CellStatus {
    Compromised = 0b00,
    Healthy = 0b10,
    Unknown = 0b11,
}

impl CellStatus {
    pub const ALL: [CellStatus; 3] = [
        CellStatus::Compromised,
        CellStatus::Healthy,
        CellStatus::Unknown,
    ];

    pub const fn bits(self) -> u8 {
        self as u8
    }

    /// Decodes a 2-bit code; `01` (and anything wider) yields `None`.
    pub const fn from_bits(code: u8) -> Option<CellStatus> {
        match code {
            0b00 => Some(CellStatus::Compromised),
            0b10 => Some(CellStatus::Healthy),
            0b11 => Some(CellStatus::Unknown),
            _ => None,
        }
    }

    pub const fn from_attestation(ok: bool) -> CellStatus {
        if ok {
            CellStatus::Healthy
        } else {
            CellStatus::Compromised
        }
    }

    pub const fn is_known(self) -> bool {
        !matches!(self, CellStatus::Unknown)
    }
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellStatus::Compromised => "00",
            CellStatus::Healthy => "10",
            CellStatus::Unknown => "11",
        })
    }
}
