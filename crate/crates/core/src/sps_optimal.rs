//! SPS-optimal unicast engine.
//!
//! Relaxes the basic engine in three places: a message to `j` needs a permit
//! only if acks to receivers other than `j` are missing, its permit can be
//! sent once acks to receivers other than `j` are in, and a send to `j` only
//! waits for missing permits from processes other than `j`.
//!
//! Network-send order no longer follows causal-send order, so unsent and
//! unacked messages share one unified buffer (a [`SlidingArray`]) with a
//! `sent` flag, and four cursors bound every scan:
//!
//! * `m1`: first unsent message; everything before it has been sent.
//! * `p2`: first live permit from a sender other than the sender of the
//!   first permit (or `p.next()`).
//! * `m2`: first message whose permit index is beyond `p2` (or `u.next()`).
//! * `u2`: first unacked message to a receiver other than the receiver of the
//!   oldest buffered message (or `u.next()`).
//!
//! A permit only triggers a scan when it is the first one or the one at
//! `p2`; an ack only when it is for the oldest message or the one at `u2`.
//! Each cursor only moves forward, which keeps handlers amortized O(1).

use std::collections::HashMap;

use crate::basic::Per;
use crate::engine::{Accepted, Action, Delivery, FifoReceiver, Occupancy, Protocol, ProtocolError};
use crate::sliding::{IdxSlidingMap, SlidingArray};
use crate::wire::{MessageId, MsgBody, Payload, ProcessId, WireBody, WireMessage};

/// Entry of the unified buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptMsg {
    pub rcv: ProcessId,
    pub mid: MessageId,
    pub pid: MessageId,
    /// Permits-map index recorded at causal-send. Kept after the send since
    /// the scan guards compare it for sent entries too.
    pub perm: u64,
    /// Needs-permit flag, meaningful once `sent`.
    pub needs_permit: bool,
    pub sent: bool,
    /// `None` once acked.
    pub pl: Option<Payload>,
}

impl OptMsg {
    fn wire(&self, src: ProcessId) -> WireMessage {
        WireMessage::msg(
            src,
            self.rcv,
            MsgBody {
                mid: self.mid,
                pid: self.pid,
                flag: self.needs_permit,
                payload: self.pl.clone().unwrap_or_default(),
            },
        )
    }
}

#[derive(Debug)]
pub struct OptProcessState {
    id: ProcessId,
    ck: MessageId,
    u: SlidingArray<OptMsg>,
    p: IdxSlidingMap<Per>,
    ls: HashMap<ProcessId, MessageId>,
    rx: FifoReceiver,
    p2: u64,
    m1: u64,
    m2: u64,
    u2: u64,
    unsent: u64,
    steps: u64,
    anomalies: u64,
    checking: bool,
}

impl OptProcessState {
    pub fn new(id: ProcessId) -> Self {
        Self {
            id,
            ck: 1,
            u: SlidingArray::new(),
            p: IdxSlidingMap::new(),
            ls: HashMap::new(),
            rx: FifoReceiver::default(),
            p2: 0,
            m1: 0,
            m2: 0,
            u2: 0,
            unsent: 0,
            steps: 0,
            anomalies: 0,
            checking: false,
        }
    }

    /// Verify all cursor invariants (and the send-site rule) after every
    /// handler, panicking on violation. Costs a full scan per handler.
    pub fn with_checking(mut self) -> Self {
        self.checking = true;
        self
    }

    pub fn unified(&self) -> &SlidingArray<OptMsg> {
        &self.u
    }

    pub fn permits(&self) -> &IdxSlidingMap<Per> {
        &self.p
    }

    /// `(m1, m2, p2, u2)`.
    pub fn cursors(&self) -> (u64, u64, u64, u64) {
        (self.m1, self.m2, self.p2, self.u2)
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
        let perm = self.p.next();
        let idx = self.u.add(OptMsg {
            rcv: j,
            mid,
            pid: self.ls.get(&j).copied().unwrap_or(0),
            perm,
            needs_permit: false,
            sent: false,
            pl: Some(payload),
        });
        debug_assert_eq!(idx + 1, mid);
        self.ls.insert(j, mid);
        self.ck += 1;
        self.unsent += 1;
        // keep u2 and m2 exact when the new entry lands on them
        if self.u2 == idx && self.u.peek().map(|m| m.rcv) == Some(j) {
            self.u2 = idx + 1;
        }
        if self.m2 == idx && perm <= self.p2 {
            self.m2 = idx + 1;
        }
        self.send_interval(idx, self.p2, out);
        self.check();
        Ok(mid)
    }

    /// Network-sends eligible messages from index `k` up to the first one
    /// depending on a permit beyond `bound`. Callers pass `bound <= p2`.
    pub fn send_interval(&mut self, k: u64, bound: u64, out: &mut Vec<Action>) {
        debug_assert!(bound <= self.p2);
        let p1 = self.p.first();
        let s = self.p.get(p1).map(|per| per.snd);
        let r = self.u.peek().map(|m| m.rcv);
        let mut k = k.max(self.u.first());
        while k < self.u.next() {
            self.steps += 1;
            let u2 = self.u2;
            let m = self.u.get_mut(k).expect("in window");
            if m.perm > bound {
                break;
            }
            if !m.sent && (m.perm <= p1 || Some(m.rcv) == s) {
                m.sent = true;
                self.unsent -= 1;
                m.needs_permit = u2 < k || Some(m.rcv) != r;
                let w = m.wire(self.id);
                if self.checking {
                    self.assert_send_allowed(k);
                }
                out.push(Action::Send(w));
            }
            k += 1;
        }
        self.m1 = self.m1.max(self.u.first());
        while self.m1 < self.u.next() && self.u.get(self.m1).is_some_and(|m| m.sent) {
            self.steps += 1;
            self.m1 += 1;
        }
    }

    /// Re-establishes `p2` and `m2` after the permit at `p2` went away or the
    /// first permit changed sender.
    pub fn update_p2_m2(&mut self) {
        let p1 = self.p.first();
        if p1 == self.p.next() {
            return;
        }
        let s = self.p.get(p1).expect("first permit is live").snd;
        while self.p2 < self.p.next() && self.p.get(self.p2).is_none_or(|per| per.snd == s) {
            self.steps += 1;
            self.p2 += 1;
        }
        self.m2 = self.m2.max(self.u.first());
        while self.m2 < self.u.next() && self.u.get(self.m2).is_some_and(|m| m.perm <= self.p2) {
            self.steps += 1;
            self.m2 += 1;
        }
    }

    pub fn on_receive_permit(&mut self, from: ProcessId, n: MessageId, out: &mut Vec<Action>) {
        self.steps += 1;
        let key = Per { snd: from, mid: n };
        let Some(mut k) = self.p.index(&key) else {
            return;
        };
        let p1 = self.p.first();
        self.p.remove(&key);
        if k == p1 {
            k = self.p.first();
            self.send_interval(self.m1, k, out);
        }
        if k == self.p2 {
            let l = self.m2;
            self.update_p2_m2();
            self.send_interval(l, self.p2, out);
        }
        self.check();
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
        if !m.sent {
            self.anomalies += 1;
            return;
        }
        m.pl = None;
        let mut n = slot;
        if slot == self.u.first() {
            let _ = self.u.remove();
            while let Some(m) = self.u.peek() {
                self.steps += 1;
                if m.sent && m.needs_permit && m.rcv != from {
                    out.push(Action::Send(WireMessage::permit(self.id, m.rcv, m.mid)));
                }
                if m.pl.is_some() {
                    break;
                }
                let _ = self.u.remove();
            }
            n = self.u.first();
        }
        debug_assert!(self.u2 >= self.u.first());
        if n == self.u2 && self.u2 < self.u.next() {
            let r = self.u.peek().expect("non-empty").rcv;
            while self.u2 < self.u.next() {
                self.steps += 1;
                let m = self.u.get(self.u2).expect("in window");
                if m.pl.is_some() && m.rcv != r {
                    break;
                }
                if m.sent && m.needs_permit && m.rcv == r {
                    out.push(Action::Send(WireMessage::permit(self.id, m.rcv, m.mid)));
                }
                self.u2 += 1;
            }
        }
        self.check();
    }

    pub fn on_receive_msg(&mut self, from: ProcessId, m: MsgBody, out: &mut Vec<Action>) {
        let me = self.id;
        let dup_mid = m.mid;
        let p = &mut self.p;
        let p2 = &mut self.p2;
        let m2 = &mut self.m2;
        let u_next = self.u.next();
        let anomalies = &mut self.anomalies;
        let res = self.rx.accept(from, m, |r| {
            if r.needs_permit {
                let k = p.next();
                if p.add(Per {
                    snd: from,
                    mid: r.mid,
                })
                .is_err()
                {
                    *anomalies += 1;
                } else if *p2 == k && p.peek().map(|x| x.snd) == Some(from) {
                    *p2 = k + 1;
                    // every buffered entry has perm <= k
                    *m2 = u_next;
                }
            }
            out.push(Action::Send(WireMessage::ack(me, from, r.mid)));
            out.push(Action::Deliver(Delivery {
                from,
                mid: r.mid,
                payload: r.payload,
            }));
        });
        match res {
            Accepted::Duplicate => out.push(Action::Send(WireMessage::ack(me, from, dup_mid))),
            Accepted::Corrupt => self.anomalies += 1,
            Accepted::Buffered => {}
        }
        self.check();
    }

    pub fn timer(&mut self, out: &mut Vec<Action>) {
        for (_, m) in self.u.iter() {
            self.steps += 1;
            if m.sent && m.pl.is_some() {
                out.push(Action::Send(m.wire(self.id)));
            }
        }
        for (_, per) in self.p.iter() {
            self.steps += 1;
            out.push(Action::Send(WireMessage::ack(self.id, per.snd, per.mid)));
        }
    }

    /// Sending entry `k` is allowed only if every live permit before its
    /// permit index comes from its receiver.
    fn assert_send_allowed(&self, k: u64) {
        let m = self.u.get(k).expect("in window");
        for (idx, per) in self.p.iter() {
            if idx >= m.perm {
                break;
            }
            assert_eq!(
                per.snd, m.rcv,
                "entry {k} sent to {} with permit {idx} from {} still missing",
                m.rcv, per.snd
            );
        }
    }

    fn check(&self) {
        if self.checking {
            if let Err(e) = self.verify_invariants() {
                panic!("{e}");
            }
        }
    }

    /// Recomputes each cursor from scratch and compares.
    pub fn verify_invariants(&self) -> Result<(), String> {
        let (first, next) = (self.u.first(), self.u.next());
        let m1 = (first..next)
            .find(|&i| !self.u.get(i).unwrap().sent)
            .unwrap_or(next);
        if self.m1 != m1 {
            return Err(format!("m1 = {} expected {m1}", self.m1));
        }
        let p2 = match self.p.peek() {
            None => self.p.next(),
            Some(f) => self
                .p
                .iter()
                .find(|(_, per)| per.snd != f.snd)
                .map(|(i, _)| i)
                .unwrap_or(self.p.next()),
        };
        if self.p2 != p2 {
            return Err(format!("p2 = {} expected {p2}", self.p2));
        }
        let m2 = (first..next)
            .find(|&i| self.u.get(i).unwrap().perm > self.p2)
            .unwrap_or(next);
        if self.m2 != m2 {
            return Err(format!("m2 = {} expected {m2}", self.m2));
        }
        let u2 = match self.u.peek() {
            None => next,
            Some(f) => (first..next)
                .find(|&i| {
                    let m = self.u.get(i).unwrap();
                    m.pl.is_some() && m.rcv != f.rcv
                })
                .unwrap_or(next),
        };
        if self.u2 != u2 {
            return Err(format!("u2 = {} expected {u2}", self.u2));
        }
        Ok(())
    }
}

impl Protocol for OptProcessState {
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
        self.u.is_empty() && self.p.is_empty() && self.rx.buffered() == 0
    }

    fn occupancy(&self) -> Occupancy {
        Occupancy {
            send_buffer: self.unsent,
            unacked: self.u.size() - self.unsent,
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
