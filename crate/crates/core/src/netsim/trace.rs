//! Append-only run trace and its line-oriented text form.
//!
//! Each line is `tick<TAB>process<TAB>event<TAB>mid<TAB>peer`. Messages are
//! identified by `(sender, mid)`; for `c` and `s` records the sender is
//! `process`, for `r` and `d` records it is `peer`. Control records use the
//! id of the message they refer to (0 for YCT).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::wire::{MessageId, ProcessId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceEvent {
    /// Causal-send, one record per destination.
    C,
    /// Network-send of an MSG, repeated on retransmission.
    S,
    /// Receive of an MSG copy.
    R,
    /// Delivery.
    D,
    Ack,
    Permit,
    Yct,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::C => "c",
            TraceEvent::S => "s",
            TraceEvent::R => "r",
            TraceEvent::D => "d",
            TraceEvent::Ack => "ack",
            TraceEvent::Permit => "permit",
            TraceEvent::Yct => "yct",
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceEvent {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "c" => TraceEvent::C,
            "s" => TraceEvent::S,
            "r" => TraceEvent::R,
            "d" => TraceEvent::D,
            "ack" => TraceEvent::Ack,
            "permit" => TraceEvent::Permit,
            "yct" => TraceEvent::Yct,
            _ => return Err(TraceError::UnknownEvent(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TraceRecord {
    pub tick: u64,
    pub process: ProcessId,
    pub event: TraceEvent,
    pub mid: MessageId,
    pub peer: ProcessId,
}

impl TraceRecord {
    /// `(sender, mid)` of the application message the record refers to.
    pub fn message(&self) -> (ProcessId, MessageId) {
        match self.event {
            TraceEvent::C | TraceEvent::S | TraceEvent::Permit | TraceEvent::Yct => {
                (self.process, self.mid)
            }
            TraceEvent::R | TraceEvent::D | TraceEvent::Ack => (self.peer, self.mid),
        }
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.tick, self.process, self.event, self.mid, self.peer
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: expected 5 tab-separated fields, got {got}")]
    FieldCount { line: usize, got: usize },
    #[error("line {line}: bad number {text:?}")]
    BadNumber { line: usize, text: String },
    #[error("unknown event {0:?}")]
    UnknownEvent(String),
    #[error("line {line}: {source}")]
    Event {
        line: usize,
        source: Box<TraceError>,
    },
    #[error("line {line}: tick goes backwards")]
    Unordered { line: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceLog {
    records: Vec<TraceRecord>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|l| l.tick <= r.tick));
        self.records.push(r);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 16);
        for r in &self.records {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut log = TraceLog::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            if fields.len() != 5 {
                return Err(TraceError::FieldCount {
                    line,
                    got: fields.len(),
                });
            }
            let num = |s: &str| {
                s.parse::<u64>().map_err(|_| TraceError::BadNumber {
                    line,
                    text: s.to_string(),
                })
            };
            let r = TraceRecord {
                tick: num(fields[0])?,
                process: ProcessId(num(fields[1])?),
                event: fields[2].parse().map_err(|e| TraceError::Event {
                    line,
                    source: Box::new(e),
                })?,
                mid: num(fields[3])?,
                peer: ProcessId(num(fields[4])?),
            };
            if log.records.last().is_some_and(|l| l.tick > r.tick) {
                return Err(TraceError::Unordered { line });
            }
            log.records.push(r);
        }
        Ok(log)
    }
}

impl FromIterator<TraceRecord> for TraceLog {
    fn from_iter<T: IntoIterator<Item = TraceRecord>>(iter: T) -> Self {
        let mut records: Vec<TraceRecord> = iter.into_iter().collect();
        records.sort_by_key(|r| r.tick);
        Self { records }
    }
}
