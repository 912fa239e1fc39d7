//! Actor-critic control agent: the policy reads the full density matrix and
//! emits one column of control amplitudes per slice.

pub mod agent;
pub mod checkpoint;
pub mod env;
pub mod error;
pub mod mlp;
pub mod noise;
pub mod replay;

pub use agent::{evaluate_policy, train, Agent, EpisodeRecord, TrainConfig, TrainReport};
pub use checkpoint::ActorCheckpoint;
pub use env::{observe, reward, Environment, OBS_DIM};
pub use error::{Result, RlError};
pub use mlp::{Activation, Adam, Gradients, Mlp, Real};
pub use noise::OuNoise;
pub use replay::{ReplayMemory, Transition};
