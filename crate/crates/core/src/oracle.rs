//! Trace-level verification of causal delivery.
//!
//! Happens-before between application messages is rebuilt from `c` and `d`
//! records only, using vector clocks: a message's clock is its sender's
//! clock at the causal-send, so `m1 -> m2` iff `clock(m1) < clock(m2)`.
//! [`brute_force_hb`] computes the same relation by explicit transitive
//! closure for cross-checking.
//!
//! Network-level records (`s`, `r`, control messages) are ignored.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::netsim::{TraceEvent, TraceLog};
use crate::wire::{MessageId, ProcessId};

/// `(sender, mid)`.
pub type MsgKey = (ProcessId, MessageId);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("delivery of {}:{} at tick {tick} precedes its causal-send", .key.0, .key.1)]
    DeliveryBeforeSend { key: MsgKey, tick: u64 },
    #[error("{}:{} delivered at {dest}, which is not a destination", .key.0, .key.1)]
    NotADestination { key: MsgKey, dest: ProcessId },
    #[error("trace has {0} messages, above the brute-force limit of {BRUTE_FORCE_LIMIT}")]
    TooLarge(usize),
}

pub const BRUTE_FORCE_LIMIT: usize = 200;

/// Vector clocks of every causal-sent message.
#[derive(Debug, Clone)]
pub struct Stamps {
    processes: Vec<ProcessId>,
    clocks: HashMap<MsgKey, Vec<u64>>,
    /// Messages in causal-send order.
    order: Vec<MsgKey>,
}

impl Stamps {
    pub fn processes(&self) -> &[ProcessId] {
        &self.processes
    }

    pub fn messages(&self) -> &[MsgKey] {
        &self.order
    }

    pub fn clock(&self, m: MsgKey) -> Option<&[u64]> {
        self.clocks.get(&m).map(Vec::as_slice)
    }

    /// `a -> b`.
    pub fn happened_before(&self, a: MsgKey, b: MsgKey) -> bool {
        match (self.clocks.get(&a), self.clocks.get(&b)) {
            (Some(x), Some(y)) => x != y && x.iter().zip(y).all(|(p, q)| p <= q),
            _ => false,
        }
    }

    /// All `(a, b)` with `a -> b`. Quadratic.
    pub fn relation(&self) -> BTreeSet<(MsgKey, MsgKey)> {
        let mut rel = BTreeSet::new();
        for &a in &self.order {
            for &b in &self.order {
                if self.happened_before(a, b) {
                    rel.insert((a, b));
                }
            }
        }
        rel
    }
}

fn process_index(t: &TraceLog) -> (Vec<ProcessId>, HashMap<ProcessId, usize>) {
    let set: BTreeSet<ProcessId> = t
        .iter()
        .filter(|r| matches!(r.event, TraceEvent::C | TraceEvent::D))
        .flat_map(|r| [r.process, r.peer])
        .collect();
    let procs: Vec<ProcessId> = set.into_iter().collect();
    let idx = procs.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    (procs, idx)
}

/// Assigns each message the vector clock of its causal-send.
///
/// A clock component advances only on that process's `c` and `d` events. The
/// several `c` records of one multi-destination send are one event.
pub fn stamp_trace(t: &TraceLog) -> Result<Stamps, OracleError> {
    let (processes, idx) = process_index(t);
    let n = processes.len();
    let mut vc = vec![vec![0u64; n]; n];
    let mut clocks: HashMap<MsgKey, Vec<u64>> = HashMap::new();
    let mut order = Vec::new();
    for r in t.iter() {
        match r.event {
            TraceEvent::C => {
                let key = (r.process, r.mid);
                if clocks.contains_key(&key) {
                    continue;
                }
                let p = idx[&r.process];
                vc[p][p] += 1;
                clocks.insert(key, vc[p].clone());
                order.push(key);
            }
            TraceEvent::D => {
                let key = (r.peer, r.mid);
                let stamp = clocks
                    .get(&key)
                    .ok_or(OracleError::DeliveryBeforeSend { key, tick: r.tick })?;
                let p = idx[&r.process];
                for (mine, theirs) in vc[p].iter_mut().zip(stamp) {
                    *mine = (*mine).max(*theirs);
                }
                vc[p][p] += 1;
            }
            _ => {}
        }
    }
    Ok(Stamps {
        processes,
        clocks,
        order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationKind {
    /// An earlier message from another sender delivered later (or never).
    Causal,
    /// An earlier message from the same sender delivered later (or never).
    Fifo,
    /// Delivered twice at the same destination.
    Duplicate,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Causal => "causal",
            ViolationKind::Fifo => "fifo",
            ViolationKind::Duplicate => "duplicate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Violation {
    pub dest: ProcessId,
    pub earlier: MsgKey,
    pub later: MsgKey,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\tdest={}\tearlier={}:{}\tlater={}:{}",
            self.kind, self.dest, self.earlier.0, self.earlier.1, self.later.0, self.later.1
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
    /// `(message, destination)` pairs causal-sent but never delivered.
    pub undelivered: Vec<(MsgKey, ProcessId)>,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.violations.is_empty() && self.undelivered.is_empty()
    }

    pub fn causal_violations(&self) -> usize {
        self.violations
            .iter()
            .filter(|v| v.kind == ViolationKind::Causal)
            .count()
    }

    /// `ok`, or one line per violation and undelivered message.
    pub fn to_text(&self) -> String {
        if self.ok() {
            return "ok\n".to_string();
        }
        let mut s = String::new();
        for v in &self.violations {
            s.push_str(&format!("{v}\n"));
        }
        for ((snd, mid), dest) in &self.undelivered {
            s.push_str(&format!("undelivered\tdest={dest}\tmsg={snd}:{mid}\n"));
        }
        s
    }
}

/// Checks every destination's delivery order against happens-before.
///
/// The messages a sender `s` addressed to `q` that happened before `m` form a
/// prefix of `s`'s causal-send order (those whose own clock component is at
/// most `clock(m)[s]`), so each delivery is checked with one binary search
/// and a prefix maximum per sender.
pub fn check(t: &TraceLog) -> Result<Verdict, OracleError> {
    let stamps = stamp_trace(t)?;
    let pidx: HashMap<ProcessId, usize> = stamps
        .processes
        .iter()
        .enumerate()
        .map(|(i, p)| (*p, i))
        .collect();
    let own = |m: MsgKey| stamps.clocks[&m][pidx[&m.0]];

    // per destination: per sender, messages in send order
    let mut inbound: HashMap<ProcessId, HashMap<ProcessId, Vec<MsgKey>>> = HashMap::new();
    let mut addressed: BTreeSet<(ProcessId, MsgKey)> = BTreeSet::new();
    for r in t.iter().filter(|r| r.event == TraceEvent::C) {
        let key = (r.process, r.mid);
        if addressed.insert((r.peer, key)) {
            inbound
                .entry(r.peer)
                .or_default()
                .entry(r.process)
                .or_default()
                .push(key);
        }
    }
    // delivery position per (destination, message)
    let mut pos: HashMap<(ProcessId, MsgKey), usize> = HashMap::new();
    let mut deliveries: Vec<(ProcessId, MsgKey)> = Vec::new();
    let mut verdict = Verdict::default();
    for (i, r) in t.iter().filter(|r| r.event == TraceEvent::D).enumerate() {
        let key = (r.peer, r.mid);
        if !addressed.contains(&(r.process, key)) {
            return Err(OracleError::NotADestination {
                key,
                dest: r.process,
            });
        }
        if pos.insert((r.process, key), i).is_some() {
            verdict.violations.push(Violation {
                dest: r.process,
                earlier: key,
                later: key,
                kind: ViolationKind::Duplicate,
            });
            continue;
        }
        deliveries.push((r.process, key));
    }

    // prefix argmax of delivery positions (usize::MAX = never delivered)
    let mut prefix: HashMap<(ProcessId, ProcessId), Vec<(usize, MsgKey)>> = HashMap::new();
    for (dest, senders) in &inbound {
        for (snd, msgs) in senders {
            let mut best: Option<(usize, MsgKey)> = None;
            let v = msgs
                .iter()
                .map(|m| {
                    let p = pos.get(&(*dest, *m)).copied().unwrap_or(usize::MAX);
                    if best.is_none_or(|(bp, _)| p > bp) {
                        best = Some((p, *m));
                    }
                    best.unwrap()
                })
                .collect();
            prefix.insert((*dest, *snd), v);
        }
    }

    for (dest, m) in deliveries {
        let my_pos = pos[&(dest, m)];
        let clock = &stamps.clocks[&m];
        for (snd, msgs) in &inbound[&dest] {
            let bound = clock[pidx[snd]];
            // messages from snd with own component <= bound, excluding m
            let mut len = msgs.partition_point(|x| own(*x) <= bound);
            if *snd == m.0 {
                len -= 1;
                debug_assert_eq!(msgs[len], m);
            }
            if len == 0 {
                continue;
            }
            let (p, earlier) = prefix[&(dest, *snd)][len - 1];
            if p > my_pos {
                verdict.violations.push(Violation {
                    dest,
                    earlier,
                    later: m,
                    kind: if *snd == m.0 {
                        ViolationKind::Fifo
                    } else {
                        ViolationKind::Causal
                    },
                });
            }
        }
    }
    for (dest, key) in addressed {
        if !pos.contains_key(&(dest, key)) {
            verdict.undelivered.push((key, dest));
        }
    }
    verdict.violations.sort();
    Ok(verdict)
}

/// Happens-before by explicit closure: rule 1 (delivered at `p` before `p`
/// causal-sends) and rule 2 (same sender, earlier causal-send), then
/// Warshall's algorithm.
pub fn brute_force_hb(t: &TraceLog) -> Result<BTreeSet<(MsgKey, MsgKey)>, OracleError> {
    let mut msgs: Vec<MsgKey> = Vec::new();
    let mut id: HashMap<MsgKey, usize> = HashMap::new();
    for r in t.iter().filter(|r| r.event == TraceEvent::C) {
        let key = (r.process, r.mid);
        if let Entry::Vacant(v) = id.entry(key) {
            v.insert(msgs.len());
            msgs.push(key);
        }
    }
    let n = msgs.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(OracleError::TooLarge(n));
    }
    let mut edge = vec![vec![false; n]; n];
    // events seen so far at each process: sent and delivered messages
    let mut sent: HashMap<ProcessId, Vec<usize>> = HashMap::new();
    let mut delivered: HashMap<ProcessId, Vec<usize>> = HashMap::new();
    let mut seen_c: BTreeSet<MsgKey> = BTreeSet::new();
    for r in t.iter() {
        match r.event {
            TraceEvent::C => {
                let key = (r.process, r.mid);
                if !seen_c.insert(key) {
                    continue;
                }
                let m2 = id[&key];
                for &m1 in sent.get(&r.process).into_iter().flatten() {
                    edge[m1][m2] = true;
                }
                for &m1 in delivered.get(&r.process).into_iter().flatten() {
                    edge[m1][m2] = true;
                }
                sent.entry(r.process).or_default().push(m2);
            }
            TraceEvent::D => {
                let key = (r.peer, r.mid);
                let m1 = *id
                    .get(&key)
                    .ok_or(OracleError::DeliveryBeforeSend { key, tick: r.tick })?;
                if !seen_c.contains(&key) {
                    return Err(OracleError::DeliveryBeforeSend { key, tick: r.tick });
                }
                delivered.entry(r.process).or_default().push(m1);
            }
            _ => {}
        }
    }
    for k in 0..n {
        let via = edge[k].clone();
        for row in edge.iter_mut().filter(|row| row[k]) {
            for (e, &v) in row.iter_mut().zip(&via) {
                *e |= v;
            }
        }
    }
    let mut rel = BTreeSet::new();
    for i in 0..n {
        for j in 0..n {
            if edge[i][j] {
                rel.insert((msgs[i], msgs[j]));
            }
        }
    }
    Ok(rel)
}
