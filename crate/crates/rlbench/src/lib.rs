//! Cart-pole DQN benchmark for comparing replay samplers.

pub mod cartpole;
pub mod dqn;
pub mod error;
pub mod mlp;

pub use dqn::{train, TrainConfig, TrainReport};
pub use error::{Error, Result};
