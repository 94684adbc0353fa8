use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::shield::Proposer;
use crate::space::{Action, Observation, ACTION_DIM};

/// Uniform draw from `[-1, 1]^5`.
pub fn random_action(rng: &mut impl Rng) -> Action {
    let mut a = [0.0; ACTION_DIM];
    for v in &mut a {
        *v = rng.random_range(-1.0..=1.0);
    }
    Action(a)
}

/// Ignores the observation and acts uniformly at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn act(&mut self) -> Action {
        random_action(&mut self.rng)
    }
}

impl Proposer for RandomAgent {
    fn propose(&mut self, _: &Observation) -> Result<Action> {
        Ok(self.act())
    }
}
