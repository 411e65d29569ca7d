//! MF: network-sends one message at a time and waits for its ack before
//! dequeuing the next.

use std::collections::{HashMap, VecDeque};

use crate::engine::{Action, Delivery, Occupancy, Protocol, ProtocolError};
use crate::wire::{MessageId, MsgBody, Payload, ProcessId, WireBody, WireMessage};

#[derive(Debug, Clone)]
struct Outgoing {
    dst: ProcessId,
    mid: MessageId,
    payload: Payload,
}

impl Outgoing {
    fn wire(&self, src: ProcessId) -> WireMessage {
        WireMessage::msg(
            src,
            self.dst,
            MsgBody {
                mid: self.mid,
                pid: 0,
                flag: false,
                payload: self.payload.clone(),
            },
        )
    }
}

#[derive(Debug)]
pub struct MfState {
    id: ProcessId,
    ck: MessageId,
    queue: VecDeque<Outgoing>,
    in_flight: Option<Outgoing>,
    ld: HashMap<ProcessId, MessageId>,
    steps: u64,
    anomalies: u64,
}

impl MfState {
    pub fn new(id: ProcessId) -> Self {
        Self {
            id,
            ck: 1,
            queue: VecDeque::new(),
            in_flight: None,
            ld: HashMap::new(),
            steps: 0,
            anomalies: 0,
        }
    }

    pub fn awaiting_ack(&self) -> bool {
        self.in_flight.is_some()
    }

    fn try_send(&mut self, out: &mut Vec<Action>) {
        if self.in_flight.is_none() {
            if let Some(m) = self.queue.pop_front() {
                out.push(Action::Send(m.wire(self.id)));
                self.in_flight = Some(m);
            }
        }
    }
}

impl Protocol for MfState {
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
        self.queue.push_back(Outgoing { dst, mid, payload });
        self.try_send(out);
        Ok(mid)
    }

    fn on_message(&mut self, wire: WireMessage, out: &mut Vec<Action>) {
        self.steps += 1;
        match wire.body {
            WireBody::Msg(m) => {
                // the sender only moves on after our ack, so ids arrive in order
                let ld = self.ld.entry(wire.src).or_insert(0);
                if m.mid > *ld {
                    *ld = m.mid;
                    out.push(Action::Send(WireMessage::ack(self.id, wire.src, m.mid)));
                    out.push(Action::Deliver(Delivery {
                        from: wire.src,
                        mid: m.mid,
                        payload: m.payload,
                    }));
                } else {
                    out.push(Action::Send(WireMessage::ack(self.id, wire.src, m.mid)));
                }
            }
            WireBody::Ack(n) => {
                if self
                    .in_flight
                    .as_ref()
                    .is_some_and(|m| m.mid == n && m.dst == wire.src)
                {
                    self.in_flight = None;
                    self.try_send(out);
                }
            }
            WireBody::Permit(_) | WireBody::Yct => self.anomalies += 1,
        }
    }

    fn on_timer(&mut self, out: &mut Vec<Action>) {
        if let Some(m) = &self.in_flight {
            out.push(Action::Send(m.wire(self.id)));
        }
    }

    fn is_quiescent(&self) -> bool {
        self.queue.is_empty() && self.in_flight.is_none()
    }

    fn occupancy(&self) -> Occupancy {
        Occupancy {
            send_buffer: self.queue.len() as u64,
            unacked: self.in_flight.is_some() as u64,
            ..Occupancy::default()
        }
    }

    fn steps(&self) -> u64 {
        self.steps
    }

    fn anomalies(&self) -> u64 {
        self.anomalies
    }
}
