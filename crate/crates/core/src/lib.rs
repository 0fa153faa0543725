//! Age-of-Information scheduling in single-hop wireless broadcast networks.
//!
//! A base station serves `N` packet streams over unreliable channels, one
//! transmission per slot. This crate provides the slot dynamics ([`model`]),
//! closed-form performance expressions and allocation solvers ([`analysis`]),
//! stationary randomized and Max-Weight schedulers ([`policies`]), a
//! reproducible simulator ([`sim`]) and the `aoi` command-line front end
//! ([`cli`]).

pub mod analysis;
pub mod cli;
pub mod model;
pub mod policies;
pub mod reference;
pub mod sim;

pub use analysis::{
    lower_bound, mu_fifo, mu_noqueue, mu_single, AnalysisError, FifoOptResult,
    LowerBoundSolution, RandomizedPolicySpec,
};
pub use model::{ConfigError, NetworkConfig, QueueDiscipline, StreamState};
pub use policies::{Policy, StreamView};
pub use sim::{replicate, run, RunOptions, RunResult, SamplePathStats};
