//! Minimal neural Q-function machinery: MLP with explicit gradients, Adam,
//! replay buffer, target-network sync, epsilon schedule.

pub mod mlp;
pub mod replay;
pub mod schedule;

pub use mlp::{Adam, Grads, Mlp};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::EpsilonSchedule;
