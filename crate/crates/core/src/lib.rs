//! Simulation and numerical analysis of randomized Pavlov strategies for the
//! iterated prisoner's dilemma played on the edges of a cycle.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod meanfield;
pub mod weights;

pub use dynamics::{
    edge_transition, extract_runs, run_until_absorbed, Action, CycleState, InitConfig, Outcome, RunList, RunResult,
    Strategy, StrategyKind,
};
pub use error::{Error, Result};
