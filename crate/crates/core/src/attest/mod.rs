//! Prover-side protocol: observation bitmask, minimum-consensus fusion,
//! authenticated messages and the shared attestation schedule.

mod bitmask;
mod cell;
mod message;
mod prover;
mod schedule;

pub use bitmask::{combine, ObservationBitmask};
pub use cell::CellStatus;
pub use message::{message_bits, message_bytes, signed_bytes, AttestationMessage, HEADER_BITS};
pub use prover::{ProverState, RejectCause, ValidityWindow, Verdict};
pub use schedule::{next_attestation_time, AttestationSchedule};
