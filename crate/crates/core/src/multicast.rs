//! Multicast variant of the basic engine.
//!
//! One causal-send may name several destinations. The message is network-sent
//! to each of them with a per-destination predecessor id, and is acked only
//! once every destination has acknowledged it. Its permits go out only after
//! its own acks and every earlier message's acks are in, so no destination
//! can forward a causal successor to another destination that still lacks the
//! multicast.

use std::collections::{HashMap, VecDeque};

use crate::basic::Per;
use crate::engine::{Accepted, Action, Delivery, FifoReceiver, Occupancy, Protocol, ProtocolError};
use crate::sliding::{SlidingArray, SlidingMap};
use crate::wire::{MessageId, MsgBody, Payload, ProcessId, WireBody, WireMessage};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McastMsg {
    /// Destinations in causal-send order, without duplicates.
    pub rcv: Vec<ProcessId>,
    pub mid: MessageId,
    /// Predecessor id per destination, aligned with `rcv`.
    pub pids: Vec<MessageId>,
    /// Permits-map index while buffered.
    pub perm: u64,
    pub needs_permit: bool,
    /// Destinations that have not acked yet.
    pub unack: Vec<ProcessId>,
    /// `None` once every destination has acked.
    pub pl: Option<Payload>,
}

impl McastMsg {
    fn wire_to(&self, src: ProcessId, k: usize) -> WireMessage {
        WireMessage::msg(
            src,
            self.rcv[k],
            MsgBody {
                mid: self.mid,
                pid: self.pids[k],
                flag: self.needs_permit,
                payload: self.pl.clone().unwrap_or_default(),
            },
        )
    }
}

#[derive(Debug)]
pub struct McastProcessState {
    id: ProcessId,
    ck: MessageId,
    u: SlidingArray<McastMsg>,
    p: SlidingMap<Per>,
    ls: HashMap<ProcessId, MessageId>,
    sb: VecDeque<McastMsg>,
    rx: FifoReceiver,
    steps: u64,
    anomalies: u64,
}

impl McastProcessState {
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

    pub fn unacked(&self) -> &SlidingArray<McastMsg> {
        &self.u
    }

    pub fn permits(&self) -> &SlidingMap<Per> {
        &self.p
    }

    pub fn send(
        &mut self,
        dsts: &[ProcessId],
        payload: Payload,
        out: &mut Vec<Action>,
    ) -> Result<MessageId, ProtocolError> {
        let mut rcv: Vec<ProcessId> = Vec::with_capacity(dsts.len());
        for &j in dsts {
            if j == self.id {
                return Err(ProtocolError::SelfSend(j));
            }
            if !rcv.contains(&j) {
                rcv.push(j);
            }
        }
        if rcv.is_empty() {
            return Err(ProtocolError::NoDestinations);
        }
        self.steps += rcv.len() as u64;
        let mid = self.ck;
        let pids = rcv
            .iter()
            .map(|j| self.ls.insert(*j, mid).unwrap_or(0))
            .collect();
        self.ck += 1;
        self.sb.push_back(McastMsg {
            unack: rcv.clone(),
            rcv,
            mid,
            pids,
            perm: self.p.next(),
            needs_permit: false,
            pl: Some(payload),
        });
        self.try_send(out);
        Ok(mid)
    }

    pub fn try_send(&mut self, out: &mut Vec<Action>) {
        while let Some(head) = self.sb.front() {
            self.steps += 1;
            if self.p.first() < head.perm {
                return;
            }
            let mut m = self.sb.pop_front().unwrap();
            m.needs_permit = !self.u.is_empty() || m.rcv.len() > 1;
            for k in 0..m.rcv.len() {
                out.push(Action::Send(m.wire_to(self.id, k)));
            }
            let slot = self.u.add(m);
            debug_assert_eq!(slot + 1, self.u.get(slot).unwrap().mid);
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
        let m = self.u.get_mut(slot).expect("in window");
        if !m.rcv.contains(&from) {
            self.anomalies += 1;
            return;
        }
        m.unack.retain(|j| *j != from);
        if !m.unack.is_empty() {
            return;
        }
        m.pl = None;
        if slot != self.u.first() {
            return;
        }
        while let Some(m) = self.u.peek() {
            self.steps += 1;
            if m.pl.is_some() {
                return;
            }
            if m.needs_permit {
                for &j in &m.rcv {
                    out.push(Action::Send(WireMessage::permit(self.id, j, m.mid)));
                }
            }
            let _ = self.u.remove();
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
                for (k, j) in m.rcv.iter().enumerate() {
                    if m.unack.contains(j) {
                        out.push(Action::Send(m.wire_to(self.id, k)));
                    }
                }
            }
        }
        for (_, per) in self.p.iter_ordered() {
            self.steps += 1;
            out.push(Action::Send(WireMessage::ack(self.id, per.snd, per.mid)));
        }
    }
}

impl Protocol for McastProcessState {
    fn id(&self) -> ProcessId {
        self.id
    }

    fn causal_send(
        &mut self,
        dsts: &[ProcessId],
        payload: Payload,
        out: &mut Vec<Action>,
    ) -> Result<MessageId, ProtocolError> {
        self.send(dsts, payload, out)
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
