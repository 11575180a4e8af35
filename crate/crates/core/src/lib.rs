//! Collective remote attestation by minimum consensus over authenticated
//! broadcasts, with a deterministic discrete-event simulator to evaluate it.
//!
//! Geometry and mobility are generic over the scalar type; the aliases
//! below fix it to `f64`, which the engine uses.

pub mod adversary;
pub mod attest;
pub mod baseline;
pub mod batch;
pub mod crypto;
pub mod error;
pub mod metrics;
pub mod netsim;
pub mod num;
pub mod scenario;
pub mod time;
pub mod verifier;

pub use error::{Error, ProtocolError, Result};
pub use scenario::{parse_config, ScenarioConfig};
pub use time::SimTime;

pub type Vec2 = netsim::Vec2<f64>;
pub type Arena = netsim::Arena<f64>;
pub type NodePose = netsim::NodePose<f64>;
pub type MobilityParams = netsim::MobilityParams<f64>;
