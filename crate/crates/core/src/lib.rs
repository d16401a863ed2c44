//! Multi-agent deep Q-learning for V2V spectrum sharing on a Manhattan grid.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod dqn;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod policy;
pub mod units;

pub use config::{Mode, RunConfig};
pub use error::{Error, Result};
