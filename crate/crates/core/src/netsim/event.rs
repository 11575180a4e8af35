use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::attest::AttestationMessage;
use crate::time::SimTime;

/// Where a message on the channel came from. Simulation bookkeeping only;
/// receivers never see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Honest {
        sender: usize,
    },
    Forged,
    /// Re-injected copy of a captured message bound to epoch `t_att_s`.
    Replayed {
        t_att_s: u32,
    },
    /// In-flight message altered by the channel adversary.
    Tampered {
        sender: usize,
    },
}

#[derive(Debug, Clone)]
pub enum EventKind {
    AttestTrigger {
        epoch: usize,
    },
    BroadcastStart {
        node: usize,
        epoch: usize,
    },
    /// The node's CPU finished job `job`.
    CpuDone {
        node: usize,
        job: u64,
    },
    FrameDelivery {
        to: usize,
        msg: Arc<AttestationMessage>,
        origin: Origin,
    },
    MobilityTick,
    VerifierQuery {
        epoch: usize,
        index: usize,
    },
    AdversaryAction {
        action: usize,
    },
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::AttestTrigger { .. } => "attest",
            EventKind::BroadcastStart { .. } => "broadcast",
            EventKind::CpuDone { .. } => "cpu_done",
            EventKind::FrameDelivery { .. } => "delivery",
            EventKind::MobilityTick => "mobility",
            EventKind::VerifierQuery { .. } => "query",
            EventKind::AdversaryAction { .. } => "adversary",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimEvent {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Time-ordered queue; ties resolve by insertion order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
