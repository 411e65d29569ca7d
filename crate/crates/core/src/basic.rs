//! Basic unicast causal delivery: conservative permission-to-send at the
//! sender plus FIFO reordering at the receiver.
//!
//! A causal-sent message waits in the send buffer until every permit for
//! messages delivered before it was causal-sent has arrived. When it leaves
//! the buffer it is flagged as needing a permit if any earlier message is
//! still unacked; its receiver will then hold back its own subsequent sends
//! until the sender confirms (with a PERMIT) that all earlier messages were
//! delivered.
//!
//! Message ids start at 1 and the unacked array slot of a message is
//! `mid - 1`, so acks are resolved by direct indexing.

use std::collections::{HashMap, VecDeque};

use crate::engine::{Accepted, Action, Delivery, FifoReceiver, Occupancy, Protocol, ProtocolError};
use crate::sliding::{SlidingArray, SlidingMap};
use crate::wire::{MessageId, MsgBody, Payload, ProcessId, WireBody, WireMessage};

/// Permit state of an outgoing message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermitTag {
    /// In the send buffer: permits-map index that must be reached first.
    Index(u64),
    /// Network-sent: whether the receiver must wait for a permit.
    Needs(bool),
}

impl PermitTag {
    pub fn needs(self) -> bool {
        matches!(self, PermitTag::Needs(true))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Msg {
    pub rcv: ProcessId,
    pub mid: MessageId,
    pub pid: MessageId,
    pub per: PermitTag,
    /// `None` once acked.
    pub pl: Option<Payload>,
}

impl Msg {
    fn wire(&self, src: ProcessId) -> WireMessage {
        WireMessage::msg(
            src,
            self.rcv,
            MsgBody {
                mid: self.mid,
                pid: self.pid,
                flag: self.per.needs(),
                payload: self.pl.clone().unwrap_or_default(),
            },
        )
    }
}

/// A delivered message whose permit has not arrived yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Per {
    pub snd: ProcessId,
    pub mid: MessageId,
}

#[derive(Debug)]
pub struct ProcessState {
    id: ProcessId,
    ck: MessageId,
    u: SlidingArray<Msg>,
    p: SlidingMap<Per>,
    ls: HashMap<ProcessId, MessageId>,
    sb: VecDeque<Msg>,
    rx: FifoReceiver,
    steps: u64,
    anomalies: u64,
}

impl ProcessState {
    pub fn new(id: ProcessId) -> Self {
        Self {
            id,
            ck: 1,
            u: SlidingArray::new(),
            p: SlidingMap::new(),
            ls: HashMap::new(),
            sb: VecDeque::new(),
            rx: FifoReceiver::default(),
            steps: 0,
            anomalies: 0,
        }
    }

    pub fn unacked(&self) -> &SlidingArray<Msg> {
        &self.u
    }

    pub fn permits(&self) -> &SlidingMap<Per> {
        &self.p
    }

    pub fn send_buffer(&self) -> &VecDeque<Msg> {
        &self.sb
    }

    pub fn last_delivered(&self, from: ProcessId) -> MessageId {
        self.rx.last_delivered(from)
    }

    pub fn send(
        &mut self,
        j: ProcessId,
        payload: Payload,
        out: &mut Vec<Action>,
    ) -> Result<MessageId, ProtocolError> {
        if j == self.id {
            return Err(ProtocolError::SelfSend(j));
        }
        self.steps += 1;
        let mid = self.ck;
        let m = Msg {
            rcv: j,
            mid,
            pid: self.ls.get(&j).copied().unwrap_or(0),
            per: PermitTag::Index(self.p.next()),
            pl: Some(payload),
        };
        self.ls.insert(j, mid);
        self.ck += 1;
        self.sb.push_back(m);
        self.try_send(out);
        Ok(mid)
    }

    /// Releases send-buffer messages, in order, while their permits are in.
    pub fn try_send(&mut self, out: &mut Vec<Action>) {
        while let Some(head) = self.sb.front() {
            self.steps += 1;
            let PermitTag::Index(k) = head.per else {
                unreachable!("buffered messages carry a permit index")
            };
            if self.p.first() < k {
                return;
            }
            let mut m = self.sb.pop_front().unwrap();
            m.per = PermitTag::Needs(!self.u.is_empty());
            let w = m.wire(self.id);
            let slot = self.u.add(m);
            debug_assert_eq!(slot + 1, w.mid(), "unacked slot must equal mid - 1");
            out.push(Action::Send(w));
        }
    }

    pub fn on_receive_msg(&mut self, from: ProcessId, m: MsgBody, out: &mut Vec<Action>) {
        let me = self.id;
        let p = &mut self.p;
        let anomalies = &mut self.anomalies;
        let dup_mid = m.mid;
        let res = self.rx.accept(from, m, |b| {
            if b.needs_permit
                && p.add(Per {
                    snd: from,
                    mid: b.mid,
                })
                .is_err()
            {
                *anomalies += 1;
            }
            out.push(Action::Send(WireMessage::ack(me, from, b.mid)));
            out.push(Action::Deliver(Delivery {
                from,
                mid: b.mid,
                payload: b.payload,
            }));
        });
        match res {
            Accepted::Duplicate => out.push(Action::Send(WireMessage::ack(me, from, dup_mid))),
            Accepted::Corrupt => self.anomalies += 1,
            Accepted::Buffered => {}
        }
    }

    pub fn on_receive_ack(&mut self, from: ProcessId, n: MessageId, out: &mut Vec<Action>) {
        self.steps += 1;
        if n == 0 || n > self.u.next() {
            self.anomalies += 1;
            return;
        }
        let slot = n - 1;
        if slot < self.u.first() {
            out.push(Action::Send(WireMessage::permit(self.id, from, n)));
            return;
        }
        self.u.get_mut(slot).expect("in window").pl = None;
        if slot == self.u.first() {
            let _ = self.u.remove();
            while let Some(m) = self.u.peek() {
                self.steps += 1;
                if m.per.needs() {
                    out.push(Action::Send(WireMessage::permit(self.id, m.rcv, m.mid)));
                }
                if m.pl.is_some() {
                    return;
                }
                let _ = self.u.remove();
            }
        }
    }

    pub fn on_receive_permit(&mut self, from: ProcessId, n: MessageId, out: &mut Vec<Action>) {
        self.p.remove(&Per { snd: from, mid: n });
        self.try_send(out);
    }

    pub fn timer(&mut self, out: &mut Vec<Action>) {
        for (_, m) in self.u.iter() {
            self.steps += 1;
            if m.pl.is_some() {
                out.push(Action::Send(m.wire(self.id)));
            }
        }
        for (_, per) in self.p.iter_ordered() {
            self.steps += 1;
            out.push(Action::Send(WireMessage::ack(self.id, per.snd, per.mid)));
        }
    }
}

impl Protocol for ProcessState {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn causal_send(
        &mut self,
        dsts: &[ProcessId],
        payload: Payload,
        out: &mut Vec<Action>,
    ) -> Result<MessageId, ProtocolError> {
        match dsts {
            [j] => self.send(*j, payload, out),
            [] => Err(ProtocolError::NoDestinations),
            _ => Err(ProtocolError::UnicastOnly(dsts.len())),
        }
    }

    fn on_message(&mut self, wire: WireMessage, out: &mut Vec<Action>) {
        match wire.body {
            WireBody::Msg(m) => self.on_receive_msg(wire.src, m, out),
            WireBody::Ack(n) => self.on_receive_ack(wire.src, n, out),
            WireBody::Permit(n) => self.on_receive_permit(wire.src, n, out),
            WireBody::Yct => self.anomalies += 1,
        }
    }

    fn on_timer(&mut self, out: &mut Vec<Action>) {
        self.timer(out)
    }

    fn is_quiescent(&self) -> bool {
        self.sb.is_empty() && self.u.is_empty() && self.p.is_empty() && self.rx.buffered() == 0
    }

    fn occupancy(&self) -> Occupancy {
        Occupancy {
            send_buffer: self.sb.len() as u64,
            unacked: self.u.size(),
            receive_buffer: self.rx.buffered(),
            permits: self.p.len() as u64,
        }
    }

    fn steps(&self) -> u64 {
        self.steps + self.rx.steps + self.u.steps() + self.p.steps()
    }

    fn anomalies(&self) -> u64 {
        self.anomalies
    }
}
