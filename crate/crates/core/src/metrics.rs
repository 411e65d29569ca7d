//! Post-processing of run traces into per-message timings and run-level
//! aggregates.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::netsim::{Outcome, RunResult, TraceEvent, TraceLog};
use crate::oracle::MsgKey;
use crate::wire::{ProcessId, WireKind};

/// Timings of one message at one destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageTiming {
    pub key: MsgKey,
    pub dst: ProcessId,
    pub c_tick: u64,
    /// First network-send to `dst`.
    pub s_tick: Option<u64>,
    pub d_tick: Option<u64>,
}

impl MessageTiming {
    /// Send-buffer residency `s - c`.
    pub fn residency(&self) -> Option<u64> {
        self.s_tick.map(|s| s - self.c_tick)
    }

    /// Delivery latency `d - c`.
    pub fn latency(&self) -> Option<u64> {
        self.d_tick.map(|d| d - self.c_tick)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub run_id: String,
    /// Rows in causal-send order, destinations in script order.
    pub messages: Vec<MessageTiming>,
    /// Most messages of one sender network-sent and not yet delivered at
    /// once, per sender.
    pub max_in_transit: BTreeMap<ProcessId, u64>,
    pub control_counts: BTreeMap<WireKind, u64>,
    /// Largest MSG metadata size, in bytes.
    pub msg_metadata_bytes: Option<usize>,
    pub steps: u64,
    pub wire_events: u64,
    pub max_send_buffer: u64,
    pub max_receive_buffer: u64,
    /// False when the run hit its tick limit; the metrics are partial.
    pub complete: bool,
}

impl RunMetrics {
    pub fn timing(&self, key: MsgKey, dst: ProcessId) -> Option<&MessageTiming> {
        self.messages.iter().find(|m| m.key == key && m.dst == dst)
    }

    pub fn delivered(&self) -> usize {
        self.messages.iter().filter(|m| m.d_tick.is_some()).count()
    }

    pub fn steps_per_wire_event(&self) -> f64 {
        self.steps as f64 / self.wire_events.max(1) as f64
    }

    /// Deliveries per tick between the first and the last delivery.
    pub fn throughput(&self) -> Option<f64> {
        let mut d: Vec<u64> = self.messages.iter().filter_map(|m| m.d_tick).collect();
        d.sort_unstable();
        let (first, last) = (*d.first()?, *d.last()?);
        (last > first).then(|| (d.len() - 1) as f64 / (last - first) as f64)
    }

    pub fn overall_max_in_transit(&self) -> u64 {
        self.max_in_transit.values().copied().max().unwrap_or(0)
    }

    fn max_by<F: Fn(&MessageTiming) -> Option<u64>>(&self, f: F) -> Option<u64> {
        self.messages.iter().filter_map(f).max()
    }

    fn mean_by<F: Fn(&MessageTiming) -> Option<u64>>(&self, f: F) -> Option<f64> {
        let v: Vec<u64> = self.messages.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<u64>() as f64 / v.len() as f64)
    }

    /// One row per message and destination followed by one aggregate row.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for m in &self.messages {
            w.serialize(CsvRow {
                run_id: &self.run_id,
                row: "message",
                mid: Some(m.key.1),
                src: Some(m.key.0 .0),
                dst: Some(m.dst.0),
                c_tick: Some(m.c_tick),
                s_tick: m.s_tick,
                d_tick: m.d_tick,
                residency: m.residency(),
                latency: m.latency(),
                ..CsvRow::default()
            })?;
        }
        let count = |k| self.control_counts.get(&k).copied().unwrap_or(0);
        w.serialize(CsvRow {
            run_id: &self.run_id,
            row: "aggregate",
            residency: self.max_by(MessageTiming::residency),
            latency: self.max_by(MessageTiming::latency),
            messages: Some(self.messages.len()),
            delivered: Some(self.delivered()),
            mean_residency: self.mean_by(MessageTiming::residency),
            mean_latency: self.mean_by(MessageTiming::latency),
            max_in_transit: Some(self.overall_max_in_transit()),
            max_send_buffer: Some(self.max_send_buffer),
            max_receive_buffer: Some(self.max_receive_buffer),
            metadata_bytes: self.msg_metadata_bytes,
            steps: Some(self.steps),
            wire_events: Some(self.wire_events),
            msgs_sent: Some(count(WireKind::Msg)),
            acks: Some(count(WireKind::Ack)),
            permits: Some(count(WireKind::Permit)),
            ycts: Some(count(WireKind::Yct)),
            throughput: self.throughput(),
            complete: Some(self.complete),
            ..CsvRow::default()
        })?;
        w.flush()?;
        Ok(())
    }
}

/// Column layout of the metrics CSV. Message rows leave the aggregate
/// columns empty; in the aggregate row `residency` and `latency` are maxima.
#[derive(Debug, Default, Serialize)]
struct CsvRow<'a> {
    run_id: &'a str,
    row: &'a str,
    mid: Option<u64>,
    src: Option<u64>,
    dst: Option<u64>,
    c_tick: Option<u64>,
    s_tick: Option<u64>,
    d_tick: Option<u64>,
    residency: Option<u64>,
    latency: Option<u64>,
    messages: Option<usize>,
    delivered: Option<usize>,
    mean_residency: Option<f64>,
    mean_latency: Option<f64>,
    max_in_transit: Option<u64>,
    max_send_buffer: Option<u64>,
    max_receive_buffer: Option<u64>,
    metadata_bytes: Option<usize>,
    steps: Option<u64>,
    wire_events: Option<u64>,
    msgs_sent: Option<u64>,
    acks: Option<u64>,
    permits: Option<u64>,
    ycts: Option<u64>,
    throughput: Option<f64>,
    complete: Option<bool>,
}

/// Per-message timings from a trace.
pub fn timings(t: &TraceLog) -> Vec<MessageTiming> {
    let mut rows: Vec<MessageTiming> = Vec::new();
    let mut at: HashMap<(MsgKey, ProcessId), usize> = HashMap::new();
    for r in t.iter() {
        let key = r.message();
        match r.event {
            TraceEvent::C => {
                at.entry((key, r.peer)).or_insert_with(|| {
                    rows.push(MessageTiming {
                        key,
                        dst: r.peer,
                        c_tick: r.tick,
                        s_tick: None,
                        d_tick: None,
                    });
                    rows.len() - 1
                });
            }
            TraceEvent::S => {
                if let Some(&i) = at.get(&(key, r.peer)) {
                    rows[i].s_tick.get_or_insert(r.tick);
                }
            }
            TraceEvent::D => {
                if let Some(&i) = at.get(&(key, r.process)) {
                    rows[i].d_tick.get_or_insert(r.tick);
                }
            }
            _ => {}
        }
    }
    rows
}

/// Per sender, the most messages network-sent but not yet delivered at the
/// same time.
pub fn max_in_transit(rows: &[MessageTiming]) -> BTreeMap<ProcessId, u64> {
    let mut deltas: BTreeMap<ProcessId, Vec<(u64, i64)>> = BTreeMap::new();
    for m in rows {
        if let Some(s) = m.s_tick {
            let e = deltas.entry(m.key.0).or_default();
            e.push((s, 1));
            e.push((m.d_tick.unwrap_or(u64::MAX), -1));
        }
    }
    deltas
        .into_iter()
        .map(|(p, mut v)| {
            // departures before arrivals at equal ticks
            v.sort_unstable();
            let (mut cur, mut best) = (0i64, 0i64);
            for (_, d) in v {
                cur += d;
                best = best.max(cur);
            }
            (p, best as u64)
        })
        .collect()
}

pub fn analyze(run_id: &str, result: &RunResult) -> RunMetrics {
    let messages = timings(&result.trace);
    RunMetrics {
        run_id: run_id.to_string(),
        max_in_transit: max_in_transit(&messages),
        messages,
        control_counts: result.stats.sent_by_kind.clone(),
        msg_metadata_bytes: result.stats.msg_metadata_sizes.iter().max().copied(),
        steps: result.stats.steps,
        wire_events: result.stats.wire_events,
        max_send_buffer: result.stats.max_occupancy.send_buffer,
        max_receive_buffer: result.stats.max_occupancy.receive_buffer,
        complete: result.outcome == Outcome::Quiescent,
    }
}
