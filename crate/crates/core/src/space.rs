//! Fixed-size action and observation vectors shared by the plant, the
//! safety layer, the shields and the learners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ACTION_DIM: usize = 5;
pub const OBS_DIM: usize = 9;

/// Raw control set-points, each scaled to `[-1, 1]`.
///
/// Component order: boiler, heat pump, CHP, TESS, BESS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action(pub [f64; ACTION_DIM]);

impl Action {
    pub const BOILER: usize = 0;
    pub const HEAT_PUMP: usize = 1;
    pub const CHP: usize = 2;
    pub const TESS: usize = 3;
    pub const BESS: usize = 4;

    pub const NAMES: [&'static str; ACTION_DIM] = ["boiler", "heat_pump", "chp", "tess", "bess"];

    pub fn new(components: [f64; ACTION_DIM]) -> Self {
        Action(components)
    }

    pub fn boiler(&self) -> f64 {
        self.0[Self::BOILER]
    }
    pub fn heat_pump(&self) -> f64 {
        self.0[Self::HEAT_PUMP]
    }
    pub fn chp(&self) -> f64 {
        self.0[Self::CHP]
    }
    pub fn tess(&self) -> f64 {
        self.0[Self::TESS]
    }
    pub fn bess(&self) -> f64 {
        self.0[Self::BESS]
    }

    /// Clips every component into `[-1, 1]`.
    pub fn clipped(mut self) -> Self {
        for v in &mut self.0 {
            *v = v.clamp(-1.0, 1.0);
        }
        self
    }

    /// Errors on non-finite or out-of-range components.
    pub fn validate(&self) -> Result<()> {
        for (index, &value) in self.0.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("action component {index}")));
            }
            if !(-1.0..=1.0).contains(&value) {
                return Err(Error::ActionOutOfRange { index, value });
            }
        }
        Ok(())
    }

    /// Bitwise equality, so `-0.0` and `0.0` differ and NaN equals itself.
    pub fn bit_eq(&self, other: &Action) -> bool {
        self.0
            .iter()
            .zip(other.0.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Normalized MDP state: thermal demand, electrical demand, wind infeed,
/// solar infeed, price, TESS SOC, BESS SOC, hour of day, day of week.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub const NAMES: [&'static str; OBS_DIM] = [
        "e_th", "e_el", "p_wind", "p_solar", "x_el", "soc_tess", "soc_bess", "hour", "dow",
    ];

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn bit_eq(&self, other: &Observation) -> bool {
        self.0
            .iter()
            .zip(other.0.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}
