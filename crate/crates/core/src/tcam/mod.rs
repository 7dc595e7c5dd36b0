//! Behavioral simulator of the associative-memory sampling accelerator.
//!
//! Priorities live one per row in 64 x 64 ternary CAM arrays. Searches hit
//! every array at once and come in two sensing flavours: exact match (all
//! concrete query symbols agree) and best match (fewest mismatching cells).
//! The fixed-radius flow turns each `(V, delta)` pair into a single prefix
//! query; the k-nearest flow repeats best-match searches.

mod accel;
mod array;
mod buffer;
mod lfsr;
mod query;
mod word;

pub use accel::{
    hw_amper_fr_sample, hw_amper_k_sample, knn_disagreement, Accelerator, GroupCounter, HwGroup,
    HwSample, StepKind, Trace, TraceStep,
};
pub use array::{TcamArray, TcamBank, COLUMNS, ROWS};
pub use buffer::{CandidateSetBuffer, CSB_CAPACITY};
pub use lfsr::{Lfsr32, Urng};
pub use query::{frnn_query, frnn_query_width, prefix_block, prefix_mask};
pub use word::TernaryWord;
