//! Cluster-head election simulator for wireless sensor networks with a
//! prediction-based setup phase, plus LEACH and SEP baselines.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod election;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod predictor;
pub mod radio;
pub mod sweep;

pub use baselines::PolicyKind;
pub use engine::{run, RoundRecord, RunTrace, Simulation, Termination, DEFAULT_MAX_ROUNDS};
pub use error::{Error, Result};
pub use metrics::{aggregate, summarize, Aggregate, Milestone, RunSummary};
pub use model::{NodeState, Position, RadioParams, ScenarioConfig};
pub use planner::IdealPlan;
