//! The event-driven interface every protocol engine implements, plus the
//! FIFO receive buffer shared by the hybrid engines.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wire::{MessageId, MsgBody, Payload, ProcessId, WireMessage};

/// A message handed to the application layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub from: ProcessId,
    pub mid: MessageId,
    pub payload: Payload,
}

/// Side effect of a protocol handler, in the order it happened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Send(WireMessage),
    Deliver(Delivery),
}

impl Action {
    pub fn as_send(&self) -> Option<&WireMessage> {
        match self {
            Action::Send(w) => Some(w),
            Action::Deliver(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("process {0} cannot send to itself")]
    SelfSend(ProcessId),
    #[error("empty destination set")]
    NoDestinations,
    #[error("engine only supports a single destination, got {0}")]
    UnicastOnly(usize),
}

/// Buffer occupancy snapshot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Occupancy {
    /// Causal-sent but not yet network-sent.
    pub send_buffer: u64,
    /// Network-sent, waiting for acknowledgement (or any retained entry).
    pub unacked: u64,
    /// Received but not yet deliverable.
    pub receive_buffer: u64,
    /// Missing permits (or pending YCT-style obligations).
    pub permits: u64,
}

/// One process running a causal delivery protocol.
///
/// Handlers append their effects to `out` in the order they occur.
pub trait Protocol: Send {
    fn id(&self) -> ProcessId;

    /// Requests a causal-send; never blocks. Returns the assigned message id.
    fn causal_send(
        &mut self,
        dsts: &[ProcessId],
        payload: Payload,
        out: &mut Vec<Action>,
    ) -> Result<MessageId, ProtocolError>;

    fn on_message(&mut self, wire: WireMessage, out: &mut Vec<Action>);

    /// Periodic retransmission hook.
    fn on_timer(&mut self, out: &mut Vec<Action>);

    /// True when every protocol buffer is empty.
    fn is_quiescent(&self) -> bool;

    fn occupancy(&self) -> Occupancy;

    /// Instrumented elementary-step count so far.
    fn steps(&self) -> u64;

    /// Count of inputs dropped as impossible under the fault model.
    fn anomalies(&self) -> u64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Basic,
    SpsOptimal,
    Multicast,
    Mf,
    Cykas,
}

impl EngineKind {
    pub const ALL: [EngineKind; 5] = [
        EngineKind::Basic,
        EngineKind::SpsOptimal,
        EngineKind::Multicast,
        EngineKind::Mf,
        EngineKind::Cykas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Basic => "basic",
            EngineKind::SpsOptimal => "sps_optimal",
            EngineKind::Multicast => "multicast",
            EngineKind::Mf => "mf",
            EngineKind::Cykas => "cykas",
        }
    }

    /// Whether a multi-destination send is a native operation.
    pub fn native_multicast(self) -> bool {
        self == EngineKind::Multicast
    }

    pub fn build(self, id: ProcessId) -> Box<dyn Protocol> {
        match self {
            EngineKind::Basic => Box::new(crate::basic::ProcessState::new(id)),
            EngineKind::SpsOptimal => Box::new(crate::sps_optimal::OptProcessState::new(id)),
            EngineKind::Multicast => Box::new(crate::multicast::McastProcessState::new(id)),
            EngineKind::Mf => Box::new(crate::baselines::mf::MfState::new(id)),
            EngineKind::Cykas => Box::new(crate::baselines::cykas::CykasState::new(id)),
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown engine {0:?}")]
pub struct UnknownEngine(pub String);

impl FromStr for EngineKind {
    type Err = UnknownEngine;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EngineKind::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| UnknownEngine(s.to_string()))
    }
}

/// Received-but-undelivered record, keyed by its predecessor id.
#[derive(Debug, Clone)]
pub(crate) struct Rcv {
    pub mid: MessageId,
    pub payload: Payload,
    pub needs_permit: bool,
}

/// Outcome of feeding one MSG into a [`FifoReceiver`].
#[derive(Debug, PartialEq, Eq)]
pub(crate) enum Accepted {
    /// Already delivered; re-acknowledge.
    Duplicate,
    /// Buffered (and possibly released more messages through the callback).
    Buffered,
    /// Same predecessor already held for a different id.
    Corrupt,
}

/// Per-sender receive buffers that release messages in predecessor-chain
/// order.
#[derive(Debug, Default, Clone)]
pub(crate) struct FifoReceiver {
    ld: HashMap<ProcessId, MessageId>,
    rb: HashMap<ProcessId, HashMap<MessageId, Rcv>>,
    buffered: u64,
    pub steps: u64,
}

impl FifoReceiver {
    pub fn last_delivered(&self, from: ProcessId) -> MessageId {
        self.ld.get(&from).copied().unwrap_or(0)
    }

    pub fn buffered(&self) -> u64 {
        self.buffered
    }

    /// Buffers `m` under its predecessor id, then hands every message that has
    /// become deliverable to `release`, in chain order.
    pub fn accept(
        &mut self,
        from: ProcessId,
        m: MsgBody,
        mut release: impl FnMut(Rcv),
    ) -> Accepted {
        self.steps += 1;
        let mut ld = self.last_delivered(from);
        if m.mid <= ld {
            return Accepted::Duplicate;
        }
        let chain = self.rb.entry(from).or_default();
        match chain.get(&m.pid) {
            Some(prev) if prev.mid != m.mid => return Accepted::Corrupt,
            Some(_) => {}
            None => self.buffered += 1,
        }
        chain.insert(
            m.pid,
            Rcv {
                mid: m.mid,
                payload: m.payload,
                needs_permit: m.flag,
            },
        );
        while let Some(b) = chain.remove(&ld) {
            self.steps += 1;
            self.buffered -= 1;
            ld = b.mid;
            self.ld.insert(from, ld);
            release(b);
        }
        Accepted::Buffered
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_names_round_trip() {
        for e in EngineKind::ALL {
            assert_eq!(e.name().parse::<EngineKind>(), Ok(e));
        }
        assert!("rst".parse::<EngineKind>().is_err());
    }

    #[test]
    fn fifo_receiver_reorders_chain() {
        let mut r = FifoReceiver::default();
        let from = ProcessId(9);
        let body = |mid, pid| MsgBody {
            mid,
            pid,
            flag: false,
            payload: vec![mid as u8],
        };
        let mut got = Vec::new();
        assert_eq!(
            r.accept(from, body(4, 2), |b| got.push(b.mid)),
            Accepted::Buffered
        );
        assert!(got.is_empty());
        assert_eq!(
            r.accept(from, body(2, 0), |b| got.push(b.mid)),
            Accepted::Buffered
        );
        assert_eq!(got, vec![2, 4]);
        assert_eq!(
            r.accept(from, body(2, 0), |b| got.push(b.mid)),
            Accepted::Duplicate
        );
        assert_eq!(r.buffered(), 0);
        r.accept(from, body(9, 7), |_| {});
        assert_eq!(r.accept(from, body(8, 7), |_| {}), Accepted::Corrupt);
    }
}
