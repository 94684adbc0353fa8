//! Function approximators, optimizer, replay memory, TD3 and a uniform
//! random baseline.

mod adam;
mod mlp;
mod random;
mod replay;
mod td3;

pub use adam::Adam;
pub use mlp::{grad, param_count, ForwardCache, HiddenActivation, Mlp, OutputActivation};
pub use random::{random_action, RandomAgent};
pub use replay::ReplayBuffer;
pub use td3::{select_action, NoiseType, Preset, Td3Agent, Td3Hyper, UpdateStats};
