//! The discrete-event loop.
//!
//! Each node owns a single CPU that runs one job at a time: the 187 ms
//! self-attestation at every epoch instant, a 48 ms signature before each
//! broadcast, and a 48 ms verification per received message. Signatures
//! jump the queue; verifications wait in a bounded FIFO where a newer
//! message from the same sender replaces a queued older one.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use super::event::{EventKind, EventQueue, Origin};
use super::geometry::{Arena, Vec2};
use super::mobility::{mob_evade, mobility_step, MobilityParams, NodePose};
use super::radio::{schedule_broadcast, RadioModel};
use super::topology::{Adjacency, RangeGrid};
use crate::adversary::{com_intercept, soft_compromise, ComAdversary, ComSettings, Interception};
use crate::attest::{
    message_bytes, AttestationMessage, AttestationSchedule, CellStatus, ObservationBitmask,
    ProverState, ValidityWindow, Verdict,
};
use crate::crypto::{mac_keygen, measure, PrngState, SymKey};
use crate::error::Result;
use crate::metrics::{
    required_count, Counters, CoverageSeries, EpochRecord, KnowledgeHistogram, MetricsLedger,
    NodeEnergy,
};
use crate::scenario::{ms, secs, AdversaryPlan, PhaseMode, ScenarioConfig, TopologySpec};
use crate::time::SimTime;
use crate::verifier::{verify_query, QueryFailure, QueryRecord, QueryWindow};

// Independent random streams derived from the run seed.
const STREAM_KEY: u64 = 1;
const STREAM_IMAGE: u64 = 2;
const STREAM_COMPROMISE: u64 = 3;
const STREAM_PLACEMENT: u64 = 4;
const STREAM_MOBILITY: u64 = 5;
const STREAM_RADIO: u64 = 6;
const STREAM_PHASE: u64 = 7;
const STREAM_VERIFIER: u64 = 8;
const STREAM_SOFT: u64 = 9;
const STREAM_COM_BASE: u64 = 0x100;

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub ledger: MetricsLedger,
    pub provers: Vec<ProverState>,
    /// Final poses; empty for static topologies.
    pub poses: Vec<NodePose<f64>>,
}

#[derive(Debug)]
enum Job {
    Attest,
    Sign,
    Verify {
        msg: Arc<AttestationMessage>,
        origin: Origin,
    },
}

#[derive(Debug, Default)]
struct Cpu {
    running: Option<(u64, Job)>,
    queue: VecDeque<Job>,
    next_id: u64,
    sign_queued: bool,
}

impl Cpu {
    fn pending_verifications(&self) -> usize {
        self.queue.len() - usize::from(self.sign_queued)
    }
}

enum Links {
    Static(Adjacency),
    Mobile {
        arena: Arena<f64>,
        params: MobilityParams<f64>,
        tick: SimTime,
        poses: Vec<NodePose<f64>>,
        positions: Vec<Vec2<f64>>,
        grid: RangeGrid,
        /// Evasion speed of each mobile adversary.
        evaders: Vec<Option<f64>>,
    },
}

struct EpochState {
    index: usize,
    t_att: SimTime,
    ground_truth: Vec<bool>,
    contact: Vec<bool>,
    known: Vec<usize>,
    events: Vec<(SimTime, usize, usize)>,
    hist: KnowledgeHistogram,
    queries_left: usize,
}

/// One simulation run.
pub struct Simulation {
    cfg: ScenarioConfig,
    seed: u64,
    n: usize,
    key: SymKey,
    provers: Vec<ProverState>,
    cpus: Vec<Cpu>,
    links: Links,
    radio: RadioModel,
    msg_bytes: u64,
    period: SimTime,
    hmac: SimTime,
    attest: SimTime,
    window: ValidityWindow,
    phases: Vec<SimTime>,
    attest_times: Vec<SimTime>,
    queue: EventQueue,
    now: SimTime,
    end: SimTime,
    stopped: bool,
    epoch: Option<EpochState>,
    records: Vec<EpochRecord>,
    counters: Counters,
    energy: Vec<NodeEnergy>,
    queries: Vec<QueryRecord>,
    coms: Vec<Option<ComAdversary>>,
    mobility_rng: PrngState,
    radio_rng: PrngState,
    verifier_rng: PrngState,
    soft_rng: PrngState,
    verifier_pos: Vec2<f64>,
    target_quota: Vec<usize>,
    target_need: Vec<usize>,
    trace: Option<Box<dyn Write + Send>>,
    scratch: Vec<usize>,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        let cfg = cfg.clone().validated()?;
        let n = cfg.n;

        let key = mac_keygen(
            cfg.crypto.key_bits,
            cfg.crypto.hash,
            &mut PrngState::with_stream(seed, STREAM_KEY),
        )?;
        let mut image_rng = PrngState::with_stream(seed, STREAM_IMAGE);
        let mut image = vec![0u8; cfg.protocol.region_bytes];
        image_rng.fill_bytes(&mut image);
        let mut good = vec![measure(cfg.crypto.hash, &image)?];
        let mut other = vec![0u8; cfg.protocol.region_bytes];
        for _ in 1..cfg.protocol.good_configs {
            image_rng.fill_bytes(&mut other);
            good.push(measure(cfg.crypto.hash, &other)?);
        }
        let good = Arc::new(good);
        let mut provers: Vec<ProverState> = (0..n)
            .map(|i| ProverState::new(i, n, key.clone(), good.clone(), image.clone()))
            .collect();

        // Initially compromised provers, plus every mobile adversary.
        let mut comp_rng = PrngState::with_stream(seed, STREAM_COMPROMISE);
        let k = (cfg.compromised_fraction * n as f64).round() as usize;
        let mut order: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + comp_rng.below((n - i) as u64) as usize;
            order.swap(i, j);
        }
        let mut initially: Vec<usize> = order[..k].to_vec();
        let top_speed = match cfg.topology {
            TopologySpec::RandomMobility { speed_max_mps, .. } => speed_max_mps,
            _ => 0.0,
        };
        let mut evaders: Vec<Option<f64>> = vec![None; n];
        for plan in &cfg.adversaries {
            if let AdversaryPlan::Mob { victims, speed_mps } = plan {
                for &v in victims {
                    evaders[v] = Some(speed_mps.unwrap_or(top_speed));
                    initially.push(v);
                }
            }
        }
        initially.sort_unstable();
        initially.dedup();
        for v in initially {
            soft_compromise(&mut provers[v], &mut comp_rng);
        }

        let radio = cfg.radio_model();
        let arena = cfg.arena();
        let links = match &cfg.topology {
            TopologySpec::RandomMobility {
                speed_min_mps,
                speed_max_mps,
                tick_ms,
            } => {
                let params = MobilityParams {
                    speed_min: *speed_min_mps,
                    speed_max: *speed_max_mps,
                };
                let mut place = PrngState::with_stream(seed, STREAM_PLACEMENT);
                let poses: Vec<NodePose<f64>> = (0..n)
                    .map(|_| NodePose::random(&arena, &params, &mut place))
                    .collect();
                let positions: Vec<Vec2<f64>> = poses.iter().map(|p| p.position).collect();
                let mut grid = RangeGrid::new(arena.width, arena.height, radio.range_m);
                grid.rebuild(&positions);
                Links::Mobile {
                    arena,
                    params,
                    tick: ms(*tick_ms),
                    poses,
                    positions,
                    grid,
                    evaders,
                }
            }
            TopologySpec::StaticTree { branching } => {
                Links::Static(Adjacency::complete_tree(n, *branching))
            }
            TopologySpec::StaticGraph { edges } => Links::Static(Adjacency::from_edges(n, edges)?),
        };

        let period = cfg.broadcast_period();
        let mut phase_rng = PrngState::with_stream(seed, STREAM_PHASE);
        let phases = (0..n)
            .map(|_| match cfg.protocol.phase {
                PhaseMode::Random => SimTime(phase_rng.below(period.as_micros().max(1))),
                PhaseMode::Aligned => SimTime::ZERO,
            })
            .collect();

        let mut schedule =
            AttestationSchedule::new(seed, cfg.protocol.delta_t_max_s, SimTime::ZERO);
        let attest_times: Vec<SimTime> = (0..cfg.protocol.epochs)
            .map(|_| schedule.next_instant())
            .collect();
        let end = *attest_times.last().unwrap() + cfg.horizon();

        let coms = cfg
            .adversaries
            .iter()
            .enumerate()
            .map(|(k, plan)| match plan {
                AdversaryPlan::Com {
                    drop_rate,
                    replay,
                    forge,
                    tamper_rate,
                    inject_burst,
                    corrupt_queries,
                    key_compromise,
                    ..
                } => Some(ComAdversary::new(
                    ComSettings {
                        drop_rate: *drop_rate,
                        replay: *replay,
                        forge: *forge,
                        tamper_rate: *tamper_rate,
                        inject_burst: *inject_burst,
                        corrupt_queries: *corrupt_queries,
                        key_compromise: *key_compromise,
                    },
                    PrngState::with_stream(seed, STREAM_COM_BASE + k as u64),
                )),
                _ => None,
            })
            .collect();

        let verifier_pos = cfg
            .verifier
            .position
            .map(|(x, y)| Vec2::new(x, y))
            .unwrap_or_else(|| arena.center());
        let target_quota = cfg.targets.iter().map(|t| required_count(t.x, n)).collect();
        let target_need = cfg.targets.iter().map(|t| required_count(t.y, n)).collect();

        let mut sim = Simulation {
            n,
            seed,
            key,
            provers,
            cpus: (0..n).map(|_| Cpu::default()).collect(),
            links,
            msg_bytes: message_bytes(n as u64),
            radio,
            period,
            hmac: cfg.hmac_delay(),
            attest: cfg.attest_delay(),
            window: ValidityWindow {
                delta: cfg.validity_window(),
            },
            phases,
            attest_times,
            queue: EventQueue::new(),
            now: SimTime::ZERO,
            end,
            stopped: false,
            epoch: None,
            records: Vec::new(),
            counters: Counters::default(),
            energy: (0..n).map(|_| NodeEnergy::new()).collect(),
            queries: Vec::new(),
            coms,
            mobility_rng: PrngState::with_stream(seed, STREAM_MOBILITY),
            radio_rng: PrngState::with_stream(seed, STREAM_RADIO),
            verifier_rng: PrngState::with_stream(seed, STREAM_VERIFIER),
            soft_rng: PrngState::with_stream(seed, STREAM_SOFT),
            verifier_pos,
            target_quota,
            target_need,
            trace: None,
            scratch: Vec::new(),
            cfg,
        };
        sim.seed_events();
        Ok(sim)
    }

    /// Writes one line per processed event to `out`.
    pub fn with_trace(mut self, out: Box<dyn Write + Send>) -> Self {
        self.trace = Some(out);
        self
    }

    fn seed_events(&mut self) {
        for (k, &t) in self.attest_times.iter().enumerate() {
            self.queue.push(t, EventKind::AttestTrigger { epoch: k });
            for index in 0..self.cfg.verifier.queries_ms.len() {
                let at = t + ms(self.cfg.verifier.queries_ms[index]);
                self.queue
                    .push(at, EventKind::VerifierQuery { epoch: k, index });
            }
        }
        if let Links::Mobile { tick, .. } = &self.links {
            self.queue.push(*tick, EventKind::MobilityTick);
        }
        let first = self.attest_times[0];
        for (action, plan) in self.cfg.adversaries.iter().enumerate() {
            match plan {
                AdversaryPlan::Soft { tamper_s, .. } => {
                    self.queue
                        .push(secs(*tamper_s), EventKind::AdversaryAction { action });
                }
                AdversaryPlan::Com { forge, replay, .. } if *forge || *replay => {
                    self.queue
                        .push(first, EventKind::AdversaryAction { action });
                }
                _ => {}
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn provers(&self) -> &[ProverState] {
        &self.provers
    }

    pub fn attest_times(&self) -> &[SimTime] {
        &self.attest_times
    }

    /// Current neighbours of node `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        match &self.links {
            Links::Static(g) => g.neighbors(i).to_vec(),
            Links::Mobile {
                positions, grid, ..
            } => {
                let mut out = Vec::new();
                grid.within(i, positions, self.radio.range_m, &mut out);
                out
            }
        }
    }

    /// Processes the next event. Returns `false` once the run is over.
    pub fn step(&mut self) -> bool {
        if self.stopped {
            return false;
        }
        match self.queue.peek_time() {
            Some(t) if t <= self.end => {}
            _ => return false,
        }
        let ev = self.queue.pop().expect("peeked");
        self.now = ev.time;
        if self.trace.is_some() {
            self.trace_event(&ev.kind);
        }
        match ev.kind {
            EventKind::AttestTrigger { epoch } => self.on_attest(epoch),
            EventKind::BroadcastStart { node, epoch } => self.on_broadcast(node, epoch),
            EventKind::CpuDone { node, job } => self.on_cpu_done(node, job),
            EventKind::FrameDelivery { to, msg, origin } => self.on_delivery(to, msg, origin),
            EventKind::MobilityTick => self.on_mobility(),
            EventKind::VerifierQuery { epoch, index } => self.on_query(epoch, index),
            EventKind::AdversaryAction { action } => self.on_adversary(action),
        }
        !self.stopped
    }

    /// Runs to completion.
    pub fn run(mut self) -> RunOutcome {
        while self.step() {}
        if !self.stopped {
            self.now = self.end;
        }
        self.finish_epoch();
        if let Some(t) = self.trace.as_mut() {
            let _ = t.flush();
        }
        let mut meet = ObservationBitmask::unknown(self.n);
        for p in &self.provers {
            meet.meet_assign(p.bitmask())
                .expect("uniform bitmask length");
        }
        let poses = match self.links {
            Links::Mobile { poses, .. } => poses,
            Links::Static(_) => Vec::new(),
        };
        RunOutcome {
            ledger: MetricsLedger {
                n: self.n,
                seed: self.seed,
                epochs: self.records,
                counters: self.counters,
                energy: self.energy,
                queries: self.queries,
                final_classification: meet.cells().collect(),
                end_time: self.now,
            },
            provers: self.provers,
            poses,
        }
    }

    fn trace_event(&mut self, kind: &EventKind) {
        let detail = match kind {
            EventKind::AttestTrigger { epoch } => format!("epoch={epoch}"),
            EventKind::BroadcastStart { node, .. } => format!("node={node}"),
            EventKind::CpuDone { node, .. } => format!("node={node}"),
            EventKind::FrameDelivery { to, origin, .. } => format!("to={to} origin={origin:?}"),
            EventKind::MobilityTick => String::new(),
            EventKind::VerifierQuery { epoch, index } => format!("epoch={epoch} index={index}"),
            EventKind::AdversaryAction { action } => format!("action={action}"),
        };
        let line = format!("{} {} {}", self.now.as_micros(), kind.label(), detail);
        if let Err(e) = writeln!(self.trace.as_mut().unwrap(), "{}", line.trim_end()) {
            log::warn!("event trace disabled: {e}");
            self.trace = None;
        }
    }

    fn on_attest(&mut self, index: usize) {
        self.finish_epoch();
        let now = self.now;
        for i in 0..self.n {
            let cpu = &mut self.cpus[i];
            let pending = cpu.pending_verifications()
                + usize::from(matches!(cpu.running, Some((_, Job::Verify { .. }))));
            self.counters.flushed += pending as u64;
            cpu.queue.clear();
            cpu.sign_queued = false;
            cpu.next_id += 1;
            let id = cpu.next_id;
            cpu.running = Some((id, Job::Attest));
            self.queue
                .push(now + self.attest, EventKind::CpuDone { node: i, job: id });
            self.provers[i].self_attest(now);
            self.energy[i].counts.attestations += 1;
            self.queue.push(
                now + self.attest + self.phases[i],
                EventKind::BroadcastStart {
                    node: i,
                    epoch: index,
                },
            );
        }
        let ground_truth: Vec<bool> = self
            .provers
            .iter()
            .map(|p| p.self_result() == Some(true))
            .collect();
        let hist =
            KnowledgeHistogram::new(self.n, std::iter::repeat_n(1, self.n), &self.target_quota);
        self.epoch = Some(EpochState {
            index,
            t_att: now,
            ground_truth,
            contact: vec![false; self.n],
            known: vec![1; self.n],
            events: Vec::new(),
            hist,
            queries_left: self.cfg.verifier.queries_ms.len(),
        });
        self.check_stop();
    }

    fn finish_epoch(&mut self) {
        let Some(ep) = self.epoch.take() else {
            return;
        };
        let mut reachable = ep.contact.clone();
        if !reachable.iter().any(|&r| r) {
            // Nobody met anybody: every prover counts as reachable.
            reachable.iter_mut().for_each(|r| *r = true);
        }
        let initial = vec![1; self.n];
        let mut series = Vec::with_capacity(self.cfg.targets.len());
        let mut mct = Vec::with_capacity(self.cfg.targets.len());
        for t in &self.cfg.targets {
            let s = CoverageSeries::from_events(t.x, &reachable, &initial, &ep.events)
                .expect("reachable set is non-empty");
            mct.push(s.mct(t.y));
            series.push(s);
        }
        self.records.push(EpochRecord {
            index: ep.index,
            t_att: ep.t_att,
            end: self.now,
            ground_truth: ep.ground_truth,
            reachable,
            series,
            mct,
        });
    }

    fn is_current(&self, epoch: usize) -> bool {
        self.epoch.as_ref().is_some_and(|e| e.index == epoch)
    }

    fn check_stop(&mut self) {
        if !self.cfg.stop_at_target {
            return;
        }
        let Some(ep) = self.epoch.as_ref() else {
            return;
        };
        if ep.index + 1 != self.attest_times.len() || ep.queries_left > 0 {
            return;
        }
        let met = self
            .target_need
            .iter()
            .enumerate()
            .all(|(q, &need)| ep.hist.level(q) >= need);
        if met {
            self.stopped = true;
        }
    }

    fn on_broadcast(&mut self, node: usize, epoch: usize) {
        if !self.is_current(epoch) {
            return;
        }
        self.queue.push(
            self.now + self.period,
            EventKind::BroadcastStart { node, epoch },
        );
        let cpu = &mut self.cpus[node];
        if cpu.sign_queued || matches!(cpu.running, Some((_, Job::Sign))) {
            self.counters.broadcasts_skipped += 1;
            return;
        }
        cpu.sign_queued = true;
        cpu.queue.push_front(Job::Sign);
        self.try_start(node);
    }

    fn try_start(&mut self, node: usize) {
        if self.cpus[node].running.is_some() {
            return;
        }
        let Some(job) = self.cpus[node].queue.pop_front() else {
            return;
        };
        if let Job::Sign = job {
            self.cpus[node].sign_queued = false;
            self.transmit(node);
        }
        let cpu = &mut self.cpus[node];
        cpu.next_id += 1;
        let id = cpu.next_id;
        cpu.running = Some((id, job));
        self.queue
            .push(self.now + self.hmac, EventKind::CpuDone { node, job: id });
    }

    /// Signs the current view and schedules its delivery to every
    /// neighbour in range now.
    fn transmit(&mut self, node: usize) {
        let msg = match self.provers[node].build_message(self.now) {
            Ok(m) => Arc::new(m),
            Err(e) => {
                log::debug!("node {node} cannot broadcast: {e}");
                return;
            }
        };
        let mut nbrs = std::mem::take(&mut self.scratch);
        match &self.links {
            Links::Static(g) => {
                nbrs.clear();
                nbrs.extend_from_slice(g.neighbors(node));
            }
            Links::Mobile {
                positions, grid, ..
            } => grid.within(node, positions, self.radio.range_m, &mut nbrs),
        }
        let plan = schedule_broadcast(
            &self.radio,
            self.msg_bytes,
            self.now,
            self.hmac,
            &nbrs,
            &mut self.radio_rng,
        );
        let c = &mut self.counters;
        c.broadcasts += 1;
        c.frames += plan.frames;
        c.bytes += plan.frames * self.radio.frame_size as u64;
        c.radio_losses += plan.lost.len() as u64;
        let e = &mut self.energy[node];
        e.counts.sends += 1;
        e.counts.hmacs += 1;
        e.heard.push(0);
        if !nbrs.is_empty() {
            if let Some(ep) = self.epoch.as_mut() {
                ep.contact[node] = true;
                for &j in &nbrs {
                    ep.contact[j] = true;
                }
            }
        }
        for &j in &plan.delivered {
            self.queue.push(
                plan.arrival,
                EventKind::FrameDelivery {
                    to: j,
                    msg: msg.clone(),
                    origin: Origin::Honest { sender: node },
                },
            );
        }
        self.scratch = nbrs;
    }

    fn on_delivery(&mut self, to: usize, mut msg: Arc<AttestationMessage>, mut origin: Origin) {
        if self.epoch.is_none() {
            return;
        }
        if let Origin::Honest { sender } = origin {
            for adv in self.coms.iter_mut().flatten() {
                adv.capture(&msg);
                match com_intercept(adv, &msg) {
                    Interception::Deliver => {}
                    Interception::Drop => {
                        self.counters.channel_drops += 1;
                        return;
                    }
                    Interception::Replace(m) => {
                        self.counters.channel_tampered += 1;
                        msg = Arc::new(m);
                        origin = Origin::Tampered { sender };
                    }
                }
            }
        }
        self.counters.deliveries += 1;
        let e = &mut self.energy[to];
        e.counts.receptions += 1;
        *e.heard.last_mut().expect("heard starts non-empty") += 1;

        let cap = self.cfg.protocol.queue_capacity;
        let cpu = &mut self.cpus[to];
        if let Origin::Honest { sender } = origin {
            let queued = cpu.queue.iter_mut().find_map(|job| match job {
                Job::Verify {
                    msg: m,
                    origin: Origin::Honest { sender: s },
                } if *s == sender => Some(m),
                _ => None,
            });
            if let Some(slot) = queued {
                *slot = msg;
                self.counters.coalesced += 1;
                return;
            }
        }
        if cpu.pending_verifications() >= cap {
            self.counters.queue_drops += 1;
            return;
        }
        cpu.queue.push_back(Job::Verify { msg, origin });
        self.try_start(to);
    }

    fn on_cpu_done(&mut self, node: usize, job: u64) {
        let cpu = &mut self.cpus[node];
        match &cpu.running {
            Some((id, _)) if *id == job => {}
            _ => return,
        }
        let (_, finished) = cpu.running.take().expect("matched above");
        if let Job::Verify { msg, origin } = finished {
            self.verify(node, &msg, origin);
        }
        self.try_start(node);
    }

    fn verify(&mut self, node: usize, msg: &AttestationMessage, origin: Origin) {
        self.counters.verified += 1;
        self.energy[node].counts.hmacs += 1;
        let verdict = self.provers[node].handle_message(msg, self.now, self.window);
        let accepted = verdict.is_accepted();
        let current_s = self.epoch.as_ref().map(|e| e.t_att.whole_secs() as u32);
        match origin {
            Origin::Forged => {
                self.counters.forged_verified += 1;
                self.counters.forged_accepted += u64::from(accepted);
            }
            Origin::Replayed { t_att_s } if Some(t_att_s) != current_s => {
                self.counters.stale_replays_verified += 1;
                self.counters.stale_replays_accepted += u64::from(accepted);
            }
            _ => {}
        }
        match verdict {
            Verdict::Rejected(cause) => self.counters.reject(cause),
            Verdict::Accepted { newly_known } => {
                self.counters.accepted += 1;
                self.energy[node].counts.mins += 1;
                if newly_known > 0 {
                    let count = self.provers[node].bitmask().known_count();
                    if let Some(ep) = self.epoch.as_mut() {
                        let old = ep.known[node];
                        ep.known[node] = count;
                        ep.events
                            .push((self.now.saturating_sub(ep.t_att), node, count));
                        ep.hist.raise(old, count);
                    }
                    self.check_stop();
                }
            }
        }
    }

    fn on_mobility(&mut self) {
        let Links::Mobile {
            arena,
            params,
            tick,
            poses,
            positions,
            grid,
            evaders,
        } = &mut self.links
        else {
            return;
        };
        let dt = tick.as_secs_f64();
        let honest: Vec<Vec2<f64>> = if evaders.iter().any(Option::is_some) {
            (0..poses.len())
                .filter(|&i| evaders[i].is_none())
                .map(|i| positions[i])
                .collect()
        } else {
            Vec::new()
        };
        for i in 0..poses.len() {
            poses[i] = match evaders[i] {
                Some(speed) => mob_evade(poses[i], &honest, speed, dt, arena),
                None => mobility_step(poses[i], dt, &mut self.mobility_rng, arena, params),
            };
            positions[i] = poses[i].position;
        }
        grid.rebuild(positions);
        let next = self.now + *tick;
        if next <= self.end {
            self.queue.push(next, EventKind::MobilityTick);
        }
    }

    fn on_query(&mut self, epoch: usize, index: usize) {
        let now = self.now;
        let mut record = QueryRecord {
            epoch,
            index,
            t_query: now,
            outcome: Err(QueryFailure::EpochOver),
        };
        if !self.is_current(epoch) {
            log::debug!("query {index} of epoch {epoch} falls outside its epoch");
            self.queries.push(record);
            return;
        }
        let candidates: Vec<usize> = match &self.links {
            Links::Static(_) => (0..self.n).collect(),
            Links::Mobile { positions, .. } => {
                let r2 = self.radio.range_m * self.radio.range_m;
                (0..self.n)
                    .filter(|&i| positions[i].distance_sq(self.verifier_pos) <= r2)
                    .collect()
            }
        };
        let ep = self.epoch.as_mut().expect("current epoch");
        let t_max = match self.cfg.verifier.t_max_s {
            Some(t) => ep.t_att + secs(t),
            None => ep.t_att + self.cfg.horizon(),
        };
        let window = QueryWindow {
            t_att: ep.t_att,
            delta: self.window.delta,
            t_max,
        };
        let coms = &mut self.coms;
        let result = verify_query(
            &self.key,
            &self.provers,
            &candidates,
            now,
            &window,
            self.cfg.verifier.conservative,
            &mut self.verifier_rng,
            |m| {
                for adv in coms.iter_mut().flatten() {
                    adv.corrupt_query(m);
                }
            },
        );
        record.outcome = match result {
            Ok(o) => Ok(o),
            Err(e) => {
                log::debug!("{e}");
                Err(QueryFailure::NoProverInRange)
            }
        };
        self.queries.push(record);
        ep.queries_left -= 1;
        self.check_stop();
    }

    fn on_adversary(&mut self, action: usize) {
        match &self.cfg.adversaries[action] {
            AdversaryPlan::Soft { victims, .. } => {
                for &v in victims {
                    soft_compromise(&mut self.provers[v], &mut self.soft_rng);
                }
            }
            AdversaryPlan::Com {
                inject_period_ms, ..
            } => {
                let period = ms(*inject_period_ms);
                self.inject(action);
                let next = self.now + period;
                if next <= self.end {
                    self.queue.push(next, EventKind::AdversaryAction { action });
                }
            }
            AdversaryPlan::Mob { .. } => {}
        }
    }

    /// Puts forged or replayed messages on the channel, each addressed to a
    /// uniformly chosen prover.
    fn inject(&mut self, action: usize) {
        let Some(ep) = self.epoch.as_ref() else {
            return;
        };
        let t_att_s = ep.t_att.whole_secs() as u32;
        let now_s = self.now.whole_secs() as u32;
        let arrival = self.now + self.radio.airtime(self.msg_bytes);
        let n = self.n;
        let adv = self.coms[action].as_mut().expect("channel adversary");
        for _ in 0..adv.settings.inject_burst {
            if adv.settings.forge {
                let to = adv.below(n as u64) as usize;
                let msg = Arc::new(adv.forge(n, t_att_s, now_s, &self.key));
                self.counters.forged_injected += 1;
                self.queue.push(
                    arrival,
                    EventKind::FrameDelivery {
                        to,
                        msg,
                        origin: Origin::Forged,
                    },
                );
            }
            if adv.settings.replay {
                if let Some(msg) = adv.pick_replay(t_att_s) {
                    let to = adv.below(n as u64) as usize;
                    self.counters.replays_injected += 1;
                    let origin = Origin::Replayed { t_att_s: msg.t_att };
                    self.queue
                        .push(arrival, EventKind::FrameDelivery { to, msg, origin });
                }
            }
        }
    }
}

/// Runs `cfg` with `seed` to completion.
pub fn run(cfg: &ScenarioConfig, seed: u64) -> Result<RunOutcome> {
    Ok(Simulation::new(cfg, seed)?.run())
}

/// Cell status of `node` as seen by every prover.
pub fn view_of(provers: &[ProverState], node: usize) -> Vec<CellStatus> {
    provers.iter().map(|p| p.bitmask().get(node)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::CoverageTarget;

    fn two_node_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::with_n(2);
        cfg.topology = TopologySpec::StaticGraph {
            edges: vec![(0, 1)],
        };
        cfg.protocol.broadcast_period_ms = Some(500.0);
        cfg.targets = vec![CoverageTarget { x: 1.0, y: 1.0 }];
        cfg
    }

    #[test]
    fn two_node_exchange() {
        let out = run(&two_node_cfg(), 7).unwrap();
        for p in &out.provers {
            assert_eq!(
                p.bitmask().cells().collect::<Vec<_>>(),
                vec![CellStatus::Healthy; 2]
            );
        }
        // Worst case: the later phase offset, then sign, airtime, verify.
        let mct = out.ledger.epochs[0].mct[0].unwrap();
        let bound = SimTime::from_millis(187 + 500 + 48 + 48) + SimTime::from_micros(4_064);
        assert!(mct <= bound, "{mct} > {bound}");
        assert_eq!(out.ledger.counters.total_rejections(), 0);
    }

    #[test]
    fn single_node_covers_itself_at_attestation() {
        let cfg = ScenarioConfig::with_n(1);
        let out = run(&cfg, 3).unwrap();
        assert_eq!(out.ledger.epochs[0].mct[0], Some(SimTime::ZERO));
        assert_eq!(out.ledger.end_time, out.ledger.epochs[0].t_att);
    }

    #[test]
    fn identical_seeds_identical_ledgers() {
        let mut cfg = ScenarioConfig::with_n(48);
        cfg.horizon_s = 20.0;
        let a = run(&cfg, 11).unwrap();
        let b = run(&cfg, 11).unwrap();
        assert_eq!(a.ledger, b.ledger);
        assert_eq!(a.poses, b.poses);
    }

    #[test]
    fn counters_are_consistent() {
        let mut cfg = ScenarioConfig::with_n(64);
        cfg.horizon_s = 15.0;
        cfg.radio.loss_prob = 0.1;
        let out = run(&cfg, 5).unwrap();
        let c = &out.ledger.counters;
        assert!(c.frames >= c.broadcasts);
        assert_eq!(c.bytes, c.frames * 127);
        assert!(c.verified <= c.deliveries);
        assert_eq!(c.accepted + c.total_rejections(), c.verified);
        assert!(out.ledger.energy_within_bounds(&cfg.energy));
    }

    #[test]
    fn unreachable_node_stays_unknown() {
        let mut cfg = ScenarioConfig::with_n(4);
        // Node 3 has no links.
        cfg.topology = TopologySpec::StaticGraph {
            edges: vec![(0, 1), (1, 2)],
        };
        cfg.horizon_s = 5.0;
        let out = run(&cfg, 2).unwrap();
        for p in &out.provers[..3] {
            assert_eq!(p.bitmask().get(3), CellStatus::Unknown);
        }
        let ep = &out.ledger.epochs[0];
        assert_eq!(ep.reachable, vec![true, true, true, false]);
        assert!(ep.mct[0].is_some());
    }

    #[test]
    fn static_tree_neighbours() {
        let mut cfg = ScenarioConfig::with_n(7);
        cfg.topology = TopologySpec::StaticTree { branching: 2 };
        let sim = Simulation::new(&cfg, 1).unwrap();
        assert_eq!(sim.neighbors(0), vec![1, 2]);
        assert_eq!(sim.neighbors(5), vec![2]);
    }

    #[test]
    fn trace_lines_are_written() {
        use std::sync::Mutex;
        #[derive(Clone, Default)]
        struct Sink(Arc<Mutex<Vec<u8>>>);
        impl Write for Sink {
            fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(b);
                Ok(b.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let sink = Sink::default();
        let sim = Simulation::new(&two_node_cfg(), 1)
            .unwrap()
            .with_trace(Box::new(sink.clone()));
        sim.run();
        let text = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
        assert!(text.lines().next().unwrap().ends_with("attest epoch=0"));
        assert!(text.contains(" delivery to=1 "));
    }
}
