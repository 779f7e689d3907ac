//! Discrete phase-shift optimization for reconfigurable intelligent
//! surfaces: Rician channel simulation, regularized zero-forcing sum-rate
//! evaluation, a double-DQN agent over accumulated column actions with an
//! optional embedded greedy refinement pass, classical baselines, and a
//! reproducible experiment harness.

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod qlearn;
pub mod rate;

pub use agent::{ddqn_ga_train, ddqn_train, AgentConfig, StepTrace, TrainReport};
pub use channel::{realize_channels, ChannelPair, NodePositions};
pub use config::SystemConfig;
pub use env::RisEnv;
pub use error::{Result, RisError};
pub use harness::{
    action_space_size, moving_average, profile, run_experiment, ExperimentConfig, ExperimentKind,
    Method, Scheme,
};
pub use rate::{sum_rate, PhaseConfig, RateBreakdown};
