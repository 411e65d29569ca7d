//! Reference sender-buffering algorithms used for comparison.
//!
//! * [`mf`]: a single message in transit per process.
//! * [`cykas`]: immediate delivery, eager sends and a process-wide MODE
//!   counter released by YCT control messages. Assumes a reliable network.

pub mod cykas;
pub mod mf;
