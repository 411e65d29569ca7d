//! Deterministic discrete-event network simulator.
//!
//! Events run in `(time, seq)` order with `seq` assigned at scheduling time,
//! so a run is a pure function of its configuration and script. Every directed
//! link draws its faults from its own generator seeded from the master seed
//! and the link endpoints. A link never loses more than `max_loss_streak`
//! copies in a row, which turns eventual delivery into a bound.
//!
//! The harness gives each application message a per-sender logical id used
//! in the trace. Engines without native multicast receive a multi-destination
//! send as consecutive unicasts that share one logical id.

pub mod config;
pub mod scenario;
pub mod trace;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{Action, EngineKind, Occupancy, Protocol};
use crate::sps_optimal::OptProcessState;
use crate::wire::{MessageId, ProcessId, WireBody, WireKind, WireMessage};

pub use config::{ConfigError, Latency, LinkConfig, NetConfig};
pub use scenario::{AppSend, Scenario, ScenarioError};
pub use trace::{TraceError, TraceEvent, TraceLog, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// No event in flight and every protocol buffer empty.
    Quiescent,
    /// The tick limit passed with work outstanding: a liveness failure.
    TickLimit,
}

/// Counters gathered during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Protocol steps summed over processes.
    pub steps: u64,
    /// Wire messages emitted plus wire messages handled.
    pub wire_events: u64,
    /// Emitted wire messages by kind.
    pub sent_by_kind: BTreeMap<WireKind, u64>,
    /// Distinct MSG metadata sizes seen.
    pub msg_metadata_sizes: BTreeSet<usize>,
    /// Largest occupancy seen per component, sampled after every handler.
    pub max_occupancy: Occupancy,
    /// Inputs the engines rejected as impossible.
    pub anomalies: u64,
    /// Copies dropped by the loss model.
    pub lost: u64,
    /// Extra copies created by the duplication model.
    pub duplicated: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: Outcome,
    /// Tick of the last processed event.
    pub end_tick: u64,
    pub trace: TraceLog,
    pub stats: RunStats,
    /// Final occupancy per process.
    pub residual: Vec<(ProcessId, Occupancy)>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug)]
enum EventKind {
    Deliver(WireMessage),
    Timer(usize),
    App(usize),
}

struct LinkState {
    rng: ChaCha8Rng,
    loss_streak: u32,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the generator for link `from -> to`.
pub fn link_seed(seed: u64, from: ProcessId, to: ProcessId) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ from.0) ^ to.0.rotate_left(32))
}

pub struct Simulator<'a> {
    cfg: &'a NetConfig,
    script: &'a [AppSend],
    native_multicast: bool,
    ids: Vec<ProcessId>,
    index: HashMap<ProcessId, usize>,
    engines: Vec<Box<dyn Protocol>>,
    links: HashMap<(ProcessId, ProcessId), LinkState>,
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    events: HashMap<u64, EventKind>,
    seq: u64,
    now: u64,
    /// Undelivered copies plus unfired application sends.
    pending: u64,
    next_logical: Vec<MessageId>,
    logical: HashMap<(ProcessId, MessageId), MessageId>,
    trace: TraceLog,
    stats: RunStats,
    actions: Vec<Action>,
}

impl<'a> Simulator<'a> {
    pub fn new(scenario: &'a Scenario, engine: EngineKind) -> Result<Self, SimError> {
        Self::build(scenario, engine, false)
    }

    /// Like [`Simulator::new`], but engines re-verify their internal
    /// invariants after every handler (slow).
    pub fn checked(scenario: &'a Scenario, engine: EngineKind) -> Result<Self, SimError> {
        Self::build(scenario, engine, true)
    }

    fn build(scenario: &'a Scenario, engine: EngineKind, checked: bool) -> Result<Self, SimError> {
        scenario.validate()?;
        let ids = scenario.processes.clone();
        let index = ids.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let engines = ids
            .iter()
            .map(|&id| -> Box<dyn Protocol> {
                if checked && engine == EngineKind::SpsOptimal {
                    Box::new(OptProcessState::new(id).with_checking())
                } else {
                    engine.build(id)
                }
            })
            .collect();
        let mut sim = Self {
            cfg: &scenario.net,
            script: &scenario.sends,
            native_multicast: engine.native_multicast(),
            next_logical: vec![1; ids.len()],
            ids,
            index,
            engines,
            links: HashMap::new(),
            queue: BinaryHeap::new(),
            events: HashMap::new(),
            seq: 0,
            now: 0,
            pending: 0,
            logical: HashMap::new(),
            trace: TraceLog::new(),
            stats: RunStats::default(),
            actions: Vec::new(),
        };
        for (k, a) in scenario.sends.iter().enumerate() {
            sim.schedule(a.tick, EventKind::App(k));
            sim.pending += 1;
        }
        for p in 0..sim.ids.len() {
            sim.schedule(sim.cfg.timer_period, EventKind::Timer(p));
        }
        Ok(sim)
    }

    fn schedule(&mut self, time: u64, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse((time, seq)));
        self.events.insert(seq, kind);
    }

    fn quiescent(&self) -> bool {
        self.pending == 0 && self.engines.iter().all(|e| e.is_quiescent())
    }

    pub fn run(mut self) -> RunResult {
        let outcome = loop {
            if self.quiescent() {
                break Outcome::Quiescent;
            }
            let Some(Reverse((time, seq))) = self.queue.pop() else {
                unreachable!("timers keep the queue non-empty");
            };
            if time > self.cfg.tick_limit {
                break Outcome::TickLimit;
            }
            self.now = time;
            let kind = self.events.remove(&seq).expect("scheduled event");
            self.handle(kind);
        };
        for e in &self.engines {
            self.stats.steps += e.steps();
            self.stats.anomalies += e.anomalies();
        }
        RunResult {
            outcome,
            end_tick: self.now,
            residual: self
                .ids
                .iter()
                .zip(&self.engines)
                .map(|(p, e)| (*p, e.occupancy()))
                .collect(),
            trace: self.trace,
            stats: self.stats,
        }
    }

    fn handle(&mut self, kind: EventKind) {
        let mut out = std::mem::take(&mut self.actions);
        let p = match kind {
            EventKind::Deliver(w) => {
                self.pending -= 1;
                self.stats.wire_events += 1;
                let p = self.index[&w.dst];
                if let WireBody::Msg(m) = &w.body {
                    let mid = self.logical_id(w.src, m.mid);
                    self.record(w.dst, TraceEvent::R, mid, w.src);
                }
                self.engines[p].on_message(w, &mut out);
                p
            }
            EventKind::Timer(p) => {
                self.schedule(self.now + self.cfg.timer_period, EventKind::Timer(p));
                self.engines[p].on_timer(&mut out);
                p
            }
            EventKind::App(k) => {
                self.pending -= 1;
                let a = &self.script[k];
                let p = self.index[&a.src];
                let logical = self.next_logical[p];
                self.next_logical[p] += 1;
                for d in &a.dsts {
                    self.record(a.src, TraceEvent::C, logical, *d);
                }
                let mut payload = logical.to_be_bytes().to_vec();
                payload.extend_from_slice(a.tag.as_bytes());
                if self.native_multicast || a.dsts.len() == 1 {
                    let mid = self.engines[p]
                        .causal_send(&a.dsts, payload, &mut out)
                        .expect("validated script");
                    self.logical.insert((a.src, mid), logical);
                } else {
                    for d in &a.dsts {
                        let mid = self.engines[p]
                            .causal_send(&[*d], payload.clone(), &mut out)
                            .expect("validated script");
                        self.logical.insert((a.src, mid), logical);
                    }
                }
                p
            }
        };
        let src = self.ids[p];
        for a in out.drain(..) {
            match a {
                Action::Send(w) => self.emit(w),
                Action::Deliver(d) => {
                    let mid = MessageId::from_be_bytes(
                        d.payload[..8].try_into().expect("harness payload"),
                    );
                    debug_assert_eq!(Some(&mid), self.logical.get(&(d.from, d.mid)));
                    self.record(src, TraceEvent::D, mid, d.from);
                }
            }
        }
        self.actions = out;
        let occ = self.engines[p].occupancy();
        let m = &mut self.stats.max_occupancy;
        m.send_buffer = m.send_buffer.max(occ.send_buffer);
        m.unacked = m.unacked.max(occ.unacked);
        m.receive_buffer = m.receive_buffer.max(occ.receive_buffer);
        m.permits = m.permits.max(occ.permits);
    }

    fn logical_id(&self, sender: ProcessId, mid: MessageId) -> MessageId {
        self.logical.get(&(sender, mid)).copied().unwrap_or(0)
    }

    fn record(&mut self, process: ProcessId, event: TraceEvent, mid: MessageId, peer: ProcessId) {
        self.trace.push(TraceRecord {
            tick: self.now,
            process,
            event,
            mid,
            peer,
        });
    }

    fn emit(&mut self, w: WireMessage) {
        self.stats.wire_events += 1;
        *self.stats.sent_by_kind.entry(w.kind()).or_default() += 1;
        let (event, mid) = match &w.body {
            WireBody::Msg(m) => {
                self.stats.msg_metadata_sizes.insert(w.metadata_len());
                (TraceEvent::S, self.logical_id(w.src, m.mid))
            }
            WireBody::Ack(n) => (TraceEvent::Ack, self.logical_id(w.dst, *n)),
            WireBody::Permit(n) => (TraceEvent::Permit, self.logical_id(w.src, *n)),
            WireBody::Yct => (TraceEvent::Yct, 0),
        };
        self.record(w.src, event, mid, w.dst);
        for t in self.inject(&w) {
            self.pending += 1;
            self.schedule(t, EventKind::Deliver(w.clone()));
        }
    }

    /// Arrival ticks of the copies of `w` that survive the fault model.
    fn inject(&mut self, w: &WireMessage) -> Vec<u64> {
        let cfg = self.cfg;
        let latency = cfg.link_latency(w.src, w.dst);
        let link = self
            .links
            .entry((w.src, w.dst))
            .or_insert_with(|| LinkState {
                rng: ChaCha8Rng::seed_from_u64(link_seed(cfg.seed, w.src, w.dst)),
                loss_streak: 0,
            });
        let copies = if cfg.dup_prob > 0.0 && link.rng.random_bool(cfg.dup_prob) {
            self.stats.duplicated += 1;
            2
        } else {
            1
        };
        let mut arrivals = Vec::with_capacity(copies);
        for _ in 0..copies {
            if cfg.loss_prob > 0.0
                && link.rng.random_bool(cfg.loss_prob)
                && link.loss_streak < cfg.max_loss_streak
            {
                link.loss_streak += 1;
                self.stats.lost += 1;
                continue;
            }
            link.loss_streak = 0;
            let jitter = if cfg.reorder_jitter > 0 {
                link.rng.random_range(0..=cfg.reorder_jitter)
            } else {
                0
            };
            arrivals.push(self.now + latency.sample(&mut link.rng) + jitter);
        }
        arrivals
    }
}

/// Runs `scenario` under `engine`.
pub fn run(scenario: &Scenario, engine: EngineKind) -> Result<RunResult, SimError> {
    Ok(Simulator::new(scenario, engine)?.run())
}

/// Runs `scenario` under `engine` with engine self-checks enabled.
pub fn run_checked(scenario: &Scenario, engine: EngineKind) -> Result<RunResult, SimError> {
    Ok(Simulator::checked(scenario, engine)?.run())
}
