//! Cykas: sender buffering with immediate delivery.
//!
//! Messages leave a FIFO send buffer only in normal mode (`mode == 0`) and
//! only once the previous message to the same destination was acked. A send
//! made while any earlier send is unacked is eager; its receiver enters (or
//! stays in) secret mode by incrementing `mode`, and the sender later issues a
//! YCT to that receiver once every message it sent before the eager one has
//! been acked. Each YCT decrements the receiver's `mode`.
//!
//! YCTs from one sender pair up in order with that sender's eager messages.
//! On a reordering network a YCT can overtake its eager message; it is then
//! banked as a credit that cancels the eager message on arrival.
//!
//! YCTs are not idempotent, so this engine is only correct on a reliable
//! network.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::engine::{Action, Delivery, Occupancy, Protocol, ProtocolError};
use crate::sliding::SlidingArray;
use crate::wire::{MessageId, MsgBody, Payload, ProcessId, WireBody, WireMessage};

#[derive(Debug, Clone)]
struct Queued {
    dst: ProcessId,
    mid: MessageId,
    payload: Payload,
}

/// A network-sent message, indexed by send order.
#[derive(Debug, Clone)]
struct Sent {
    dst: ProcessId,
    eager: bool,
    acked: bool,
    yct_sent: bool,
}

#[derive(Debug)]
pub struct CykasState {
    id: ProcessId,
    ck: MessageId,
    mode: u64,
    /// Eager messages per sender still waiting for their YCT.
    secret: HashMap<ProcessId, u64>,
    /// YCTs per sender that arrived ahead of their eager message.
    early_yct: HashMap<ProcessId, u64>,
    queue: VecDeque<Queued>,
    unacked_to: HashSet<ProcessId>,
    pending_acks: u64,
    sent: SlidingArray<Sent>,
    ld: HashMap<ProcessId, MessageId>,
    steps: u64,
    anomalies: u64,
}

impl CykasState {
    pub fn new(id: ProcessId) -> Self {
        Self {
            id,
            ck: 1,
            mode: 0,
            secret: HashMap::new(),
            early_yct: HashMap::new(),
            queue: VecDeque::new(),
            unacked_to: HashSet::new(),
            pending_acks: 0,
            sent: SlidingArray::new(),
            ld: HashMap::new(),
            steps: 0,
            anomalies: 0,
        }
    }

    /// The MODE counter; positive means secret mode.
    pub fn mode(&self) -> u64 {
        self.mode
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    fn try_send(&mut self, out: &mut Vec<Action>) {
        while self.mode == 0 {
            let Some(head) = self.queue.front() else {
                return;
            };
            self.steps += 1;
            if self.unacked_to.contains(&head.dst) {
                return;
            }
            let m = self.queue.pop_front().unwrap();
            let eager = self.pending_acks > 0;
            let slot = self.sent.add(Sent {
                dst: m.dst,
                eager,
                acked: false,
                yct_sent: false,
            });
            debug_assert_eq!(slot + 1, m.mid);
            self.unacked_to.insert(m.dst);
            self.pending_acks += 1;
            out.push(Action::Send(WireMessage::msg(
                self.id,
                m.dst,
                MsgBody {
                    mid: m.mid,
                    pid: 0,
                    flag: eager,
                    payload: m.payload,
                },
            )));
        }
    }

    fn on_ack(&mut self, from: ProcessId, n: MessageId, out: &mut Vec<Action>) {
        if n == 0 || n > self.sent.next() || n - 1 < self.sent.first() {
            self.anomalies += 1;
            return;
        }
        let e = self.sent.get_mut(n - 1).expect("in window");
        if e.acked || e.dst != from {
            self.anomalies += 1;
            return;
        }
        e.acked = true;
        self.pending_acks -= 1;
        self.unacked_to.remove(&from);
        // YCT for an eager send once it heads the ack prefix
        while let Some(e) = self.sent.peek_mut() {
            self.steps += 1;
            if e.eager && !e.yct_sent {
                e.yct_sent = true;
                out.push(Action::Send(WireMessage::yct(self.id, e.dst)));
            }
            if !e.acked {
                break;
            }
            let _ = self.sent.remove();
        }
        self.try_send(out);
    }
}

impl Protocol for CykasState {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn causal_send(
        &mut self,
        dsts: &[ProcessId],
        payload: Payload,
        out: &mut Vec<Action>,
    ) -> Result<MessageId, ProtocolError> {
        let dst = match dsts {
            [j] if *j == self.id => return Err(ProtocolError::SelfSend(*j)),
            [j] => *j,
            [] => return Err(ProtocolError::NoDestinations),
            _ => return Err(ProtocolError::UnicastOnly(dsts.len())),
        };
        self.steps += 1;
        let mid = self.ck;
        self.ck += 1;
        self.queue.push_back(Queued { dst, mid, payload });
        self.try_send(out);
        Ok(mid)
    }

    fn on_message(&mut self, wire: WireMessage, out: &mut Vec<Action>) {
        self.steps += 1;
        match wire.body {
            WireBody::Msg(m) => {
                let ld = self.ld.entry(wire.src).or_insert(0);
                if m.mid <= *ld {
                    self.anomalies += 1;
                    return;
                }
                *ld = m.mid;
                if m.flag {
                    match self.early_yct.get_mut(&wire.src) {
                        Some(c) => {
                            *c -= 1;
                            if *c == 0 {
                                self.early_yct.remove(&wire.src);
                            }
                        }
                        None => {
                            *self.secret.entry(wire.src).or_insert(0) += 1;
                            self.mode += 1;
                        }
                    }
                }
                out.push(Action::Send(WireMessage::ack(self.id, wire.src, m.mid)));
                out.push(Action::Deliver(Delivery {
                    from: wire.src,
                    mid: m.mid,
                    payload: m.payload,
                }));
            }
            WireBody::Ack(n) => self.on_ack(wire.src, n, out),
            WireBody::Yct => match self.secret.get_mut(&wire.src) {
                Some(c) => {
                    *c -= 1;
                    if *c == 0 {
                        self.secret.remove(&wire.src);
                    }
                    self.mode -= 1;
                    self.try_send(out);
                }
                None => *self.early_yct.entry(wire.src).or_insert(0) += 1,
            },
            WireBody::Permit(_) => self.anomalies += 1,
        }
    }

    /// Relies on a reliable network: nothing to retransmit.
    fn on_timer(&mut self, _out: &mut Vec<Action>) {}

    fn is_quiescent(&self) -> bool {
        self.queue.is_empty() && self.sent.is_empty() && self.mode == 0 && self.early_yct.is_empty()
    }

    fn occupancy(&self) -> Occupancy {
        Occupancy {
            send_buffer: self.queue.len() as u64,
            unacked: self.pending_acks,
            receive_buffer: 0,
            permits: self.mode,
        }
    }

    fn steps(&self) -> u64 {
        self.steps + self.sent.steps()
    }

    fn anomalies(&self) -> u64 {
        self.anomalies
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::WireKind;

    const I: ProcessId = ProcessId(0);
    const J: ProcessId = ProcessId(1);
    const K: ProcessId = ProcessId(2);
    const X: ProcessId = ProcessId(3);

    fn msg(src: ProcessId, dst: ProcessId, mid: MessageId, eager: bool) -> WireMessage {
        WireMessage::msg(
            src,
            dst,
            MsgBody {
                mid,
                pid: 0,
                flag: eager,
                payload: vec![],
            },
        )
    }

    #[test]
    fn lone_sender_sends_normally() {
        let mut s = CykasState::new(I);
        let mut out = vec![];
        s.causal_send(&[J], vec![], &mut out).unwrap();
        s.on_message(WireMessage::ack(J, I, 1), &mut out);
        s.causal_send(&[J], vec![], &mut out).unwrap();
        let flags: Vec<_> = out
            .iter()
            .filter_map(|a| match &a.as_send()?.body {
                WireBody::Msg(b) => Some(b.flag),
                _ => None,
            })
            .collect();
        assert_eq!(flags, vec![false, false]);
    }

    #[test]
    fn same_destination_waits_for_ack() {
        let mut s = CykasState::new(I);
        let mut out = vec![];
        s.causal_send(&[J], vec![], &mut out).unwrap();
        s.causal_send(&[J], vec![], &mut out).unwrap();
        s.causal_send(&[K], vec![], &mut out).unwrap();
        // head-of-line: the K message waits behind the second J message
        assert_eq!(out.len(), 1);
        s.on_message(WireMessage::ack(J, I, 1), &mut out);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn eager_send_yields_yct_once_prefix_is_acked() {
        let mut s = CykasState::new(J);
        let mut out = vec![];
        s.causal_send(&[X], vec![], &mut out).unwrap(); // a0
        s.causal_send(&[I], vec![], &mut out).unwrap(); // a, eager
        out.clear();
        s.on_message(WireMessage::ack(I, J, 2), &mut out);
        assert!(out.is_empty());
        s.on_message(WireMessage::ack(X, J, 1), &mut out);
        let kinds: Vec<_> = out
            .iter()
            .map(|a| (a.as_send().unwrap().kind(), a.as_send().unwrap().dst))
            .collect();
        assert_eq!(kinds, vec![(WireKind::Yct, I)]);
        assert!(s.is_quiescent());
    }

    /// Receiver side of the three-process dependency run: `b` and `a` raise
    /// MODE, `c` arrives before the YCT for `a`, so MODE only reaches zero at
    /// the YCT for `c`.
    #[test]
    fn concurrent_eager_send_prolongs_secret_mode() {
        let mut i = CykasState::new(I);
        let mut out = vec![];
        let mut modes = vec![];
        i.on_message(msg(K, I, 2, true), &mut out); // b
        modes.push(i.mode());
        i.on_message(msg(J, I, 2, true), &mut out); // a
        modes.push(i.mode());
        i.causal_send(&[X], vec![], &mut out).unwrap(); // m
        assert_eq!(i.queued(), 1);
        i.on_message(WireMessage::yct(K, I), &mut out); // for b
        modes.push(i.mode());
        i.on_message(msg(K, I, 4, true), &mut out); // c
        modes.push(i.mode());
        i.on_message(WireMessage::yct(J, I), &mut out); // for a
        modes.push(i.mode());
        assert_eq!(i.queued(), 1);
        i.on_message(WireMessage::yct(K, I), &mut out); // for c
        modes.push(i.mode());
        assert_eq!(modes, vec![1, 2, 1, 2, 1, 0]);
        assert_eq!(i.queued(), 0);
    }

    #[test]
    fn early_yct_cancels_its_eager_message() {
        let mut s = CykasState::new(I);
        let mut out = vec![];
        s.on_message(WireMessage::yct(J, I), &mut out);
        assert_eq!(s.mode(), 0);
        assert!(!s.is_quiescent());
        s.on_message(msg(K, I, 1, true), &mut out);
        assert_eq!(s.mode(), 1);
        s.on_message(msg(J, I, 1, true), &mut out);
        assert_eq!(s.mode(), 1);
        s.on_message(WireMessage::yct(K, I), &mut out);
        assert_eq!(s.mode(), 0);
        assert!(s.is_quiescent());
        assert_eq!(s.anomalies(), 0);
    }
}
