//! Hybrid sender/receiver-buffering causal delivery.
//!
//! Engines ([`basic`], [`sps_optimal`], [`multicast`] and the
//! [`baselines`]) implement [`engine::Protocol`] and are driven by the
//! deterministic simulator in [`netsim`]. Runs are checked by the
//! happens-before [`oracle`] and summarized by [`metrics`].

pub mod baselines;
pub mod basic;
pub mod engine;
pub mod metrics;
pub mod multicast;
pub mod netsim;
pub mod oracle;
pub mod sliding;
pub mod sps_optimal;
pub mod wire;

pub use engine::{Action, Delivery, EngineKind, Occupancy, Protocol, ProtocolError};
pub use wire::{MessageId, Payload, ProcessId, WireMessage};
