//! Discrete-event network simulation: geometry and mobility, radio links,
//! static topologies, the event queue and the engine.

mod engine;
mod event;
mod geometry;
mod mobility;
mod radio;
mod topology;

pub use engine::{run, view_of, RunOutcome, Simulation};
pub use event::{EventKind, EventQueue, Origin, SimEvent};
pub use geometry::{Arena, Vec2};
pub use mobility::{mob_evade, mobility_step, MobilityParams, NodePose};
pub use radio::{schedule_broadcast, BroadcastPlan, RadioModel};
pub use topology::{Adjacency, RangeGrid};
