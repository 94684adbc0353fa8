//! Safe reinforcement-learning energy management: a multi-energy plant
//! simulator, a learned constraint check, action shields, a TD3 agent and
//! the training and benchmark harness around them.

pub mod agents;
pub mod error;
pub mod harness;
pub mod plant;
pub mod safety;
pub mod shield;
pub mod space;
pub mod timeseries;

pub use error::{Error, Result};
pub use space::{Action, Observation, ACTION_DIM, OBS_DIM};
