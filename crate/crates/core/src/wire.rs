//! Identifiers and the wire messages exchanged between protocol processes.
//!
//! Every engine speaks the same small vocabulary: application `MSG`s carrying
//! `{mid, pid, flag}` plus payload, and `ACK`/`PERMIT` control messages
//! carrying a single message id. The Cykas baseline adds a `YCT` control
//! message with no body.
//!
//! The byte encoding is fixed-size apart from the payload, which is what the
//! metadata-size metric measures.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Globally unique process identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub u64);

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-sender message id. Ids start at 1; 0 means "none".
pub type MessageId = u64;

/// Opaque application payload.
pub type Payload = Vec<u8>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsgBody {
    pub mid: MessageId,
    /// Id of the previous message from the same sender to the same receiver.
    pub pid: MessageId,
    /// Needs-permit flag (the eager-send flag for the Cykas baseline).
    pub flag: bool,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireBody {
    Msg(MsgBody),
    Ack(MessageId),
    Permit(MessageId),
    Yct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WireKind {
    Msg,
    Ack,
    Permit,
    Yct,
}

impl WireKind {
    fn tag(self) -> u8 {
        match self {
            WireKind::Msg => 1,
            WireKind::Ack => 2,
            WireKind::Permit => 3,
            WireKind::Yct => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub src: ProcessId,
    pub dst: ProcessId,
    pub body: WireBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated frame")]
    Truncated,
    #[error("unknown kind tag {0}")]
    UnknownKind(u8),
    #[error("invalid flag byte {0}")]
    BadFlag(u8),
    #[error("{0} trailing bytes")]
    Trailing(usize),
}

/// Header: kind tag + src + dst.
const HEADER_LEN: usize = 1 + 8 + 8;
/// MSG metadata after the header: mid + pid + flag.
const MSG_META_LEN: usize = 8 + 8 + 1;

impl WireMessage {
    pub fn msg(src: ProcessId, dst: ProcessId, body: MsgBody) -> Self {
        Self {
            src,
            dst,
            body: WireBody::Msg(body),
        }
    }

    pub fn ack(src: ProcessId, dst: ProcessId, mid: MessageId) -> Self {
        Self {
            src,
            dst,
            body: WireBody::Ack(mid),
        }
    }

    pub fn permit(src: ProcessId, dst: ProcessId, mid: MessageId) -> Self {
        Self {
            src,
            dst,
            body: WireBody::Permit(mid),
        }
    }

    pub fn yct(src: ProcessId, dst: ProcessId) -> Self {
        Self {
            src,
            dst,
            body: WireBody::Yct,
        }
    }

    pub fn kind(&self) -> WireKind {
        match self.body {
            WireBody::Msg(_) => WireKind::Msg,
            WireBody::Ack(_) => WireKind::Ack,
            WireBody::Permit(_) => WireKind::Permit,
            WireBody::Yct => WireKind::Yct,
        }
    }

    /// Message id referenced by this wire message (0 for YCT).
    pub fn mid(&self) -> MessageId {
        match &self.body {
            WireBody::Msg(m) => m.mid,
            WireBody::Ack(n) | WireBody::Permit(n) => *n,
            WireBody::Yct => 0,
        }
    }

    /// Encoded length minus payload bytes.
    pub fn metadata_len(&self) -> usize {
        match &self.body {
            WireBody::Msg(_) => HEADER_LEN + MSG_META_LEN + 4,
            WireBody::Ack(_) | WireBody::Permit(_) => HEADER_LEN + 8,
            WireBody::Yct => HEADER_LEN,
        }
    }

    pub fn encoded_len(&self) -> usize {
        self.metadata_len()
            + match &self.body {
                WireBody::Msg(m) => m.payload.len(),
                _ => 0,
            }
    }

    /// Big-endian frame: `kind | src | dst | body`, where an MSG body is
    /// `mid | pid | flag | payload_len: u32 | payload`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.kind().tag());
        out.extend_from_slice(&self.src.0.to_be_bytes());
        out.extend_from_slice(&self.dst.0.to_be_bytes());
        match &self.body {
            WireBody::Msg(m) => {
                out.extend_from_slice(&m.mid.to_be_bytes());
                out.extend_from_slice(&m.pid.to_be_bytes());
                out.push(m.flag as u8);
                out.extend_from_slice(&(m.payload.len() as u32).to_be_bytes());
                out.extend_from_slice(&m.payload);
            }
            WireBody::Ack(n) | WireBody::Permit(n) => out.extend_from_slice(&n.to_be_bytes()),
            WireBody::Yct => {}
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader(bytes);
        let tag = r.u8()?;
        let src = ProcessId(r.u64()?);
        let dst = ProcessId(r.u64()?);
        let body = match tag {
            1 => {
                let mid = r.u64()?;
                let pid = r.u64()?;
                let flag = match r.u8()? {
                    0 => false,
                    1 => true,
                    b => return Err(DecodeError::BadFlag(b)),
                };
                let len = r.u32()? as usize;
                let payload = r.take(len)?.to_vec();
                WireBody::Msg(MsgBody {
                    mid,
                    pid,
                    flag,
                    payload,
                })
            }
            2 => WireBody::Ack(r.u64()?),
            3 => WireBody::Permit(r.u64()?),
            4 => WireBody::Yct,
            t => return Err(DecodeError::UnknownKind(t)),
        };
        if !r.0.is_empty() {
            return Err(DecodeError::Trailing(r.0.len()));
        }
        Ok(Self { src, dst, body })
    }
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.0.len() < n {
            return Err(DecodeError::Truncated);
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}
