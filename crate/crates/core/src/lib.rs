//! Prioritized experience replay with associative-memory sampling.
//!
//! [`replay`] holds the priority store and the sum-tree sampler, [`amper`]
//! the group-based approximate sampler, [`tcam`] a behavioral model of the
//! ternary CAM accelerator, [`latency`] its analytical timing model and
//! [`eval`] the sampling-error measurements.

pub mod amper;
pub mod error;
pub mod eval;
pub mod fixed;
pub mod latency;
pub mod replay;
pub mod sampler;
pub mod tcam;

pub use error::{Error, Result};
pub use fixed::{Codec, PriorityValue};
pub use sampler::{AmperTuning, Replay, SamplerKind};
