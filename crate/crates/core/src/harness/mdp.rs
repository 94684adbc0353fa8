use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{PlantConfig, PlantState, StepOutputs};
use crate::space::{Observation, OBS_DIM};
use crate::timeseries::{ExogenousRecord, ExogenousSeries, STEP_HOURS};

/// Fixed divisors for the exogenous observation components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub thermal_demand: f64,
    pub electrical_demand: f64,
    /// MW_e of wind infeed.
    pub wind: f64,
    /// MW_e of solar infeed.
    pub solar: f64,
    pub price: f64,
}

impl Norms {
    /// Maxima over the training series; a zero maximum normalizes by 1.
    pub fn from_series(series: &ExogenousSeries, plant: &PlantConfig) -> Self {
        let max = |f: &dyn Fn(&ExogenousRecord) -> f64| {
            let m = series.records().iter().map(|r| f(r).abs()).fold(0.0, f64::max);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        };
        Norms {
            thermal_demand: max(&|r| r.thermal_demand),
            electrical_demand: max(&|r| r.electrical_demand),
            wind: max(&|r| r.wind_potential * plant.wind.p_nom_el),
            solar: max(&|r| r.solar_potential * plant.solar.p_nom_el),
            price: max(&|r| r.price_elec),
        }
    }

    fn validate(&self) -> Result<()> {
        let v = [self.thermal_demand, self.electrical_demand, self.wind, self.solar, self.price];
        if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(Error::Config(format!("normalization constants must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// `hour` and `dow` are the hour of day (0–23) and day of week (0 = Monday).
pub fn build_observation(
    exo: &ExogenousRecord,
    state: &PlantState,
    hour: usize,
    dow: usize,
    plant: &PlantConfig,
    norms: &Norms,
) -> Result<Observation> {
    norms.validate()?;
    let o: [f64; OBS_DIM] = [
        exo.thermal_demand / norms.thermal_demand,
        exo.electrical_demand / norms.electrical_demand,
        exo.wind_potential * plant.wind.p_nom_el / norms.wind,
        exo.solar_potential * plant.solar.p_nom_el / norms.solar,
        exo.price_elec / norms.price,
        state.soc_tess,
        state.soc_bess,
        hour as f64 / 23.0,
        dow as f64 / 6.0,
    ];
    if o.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observation".into()));
    }
    Ok(Observation(o))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    /// 1/EUR
    pub a: f64,
    /// 1/W
    pub b: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams { a: 0.1, b: 1.0 / 5e5 }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) || !self.a.is_finite() || !self.b.is_finite() {
            return Err(Error::Config("reward scalings a and b must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// EUR over the step; export earns at the same price.
    pub cost: f64,
    /// Absolute thermal imbalance, W.
    pub comfort: f64,
    pub shield_cost: f64,
    pub reward: f64,
}

pub fn reward(outputs: &StepOutputs, exo: &ExogenousRecord, gas_price: f64, params: &RewardParams, shield_cost: f64) -> RewardBreakdown {
    let cost = STEP_HOURS * (outputs.p_grid * exo.price_elec + outputs.gas_power * gas_price);
    let comfort = (exo.thermal_demand - outputs.thermal_production()).abs() * 1e6;
    RewardBreakdown {
        cost,
        comfort,
        shield_cost,
        reward: -(params.a * cost + params.b * comfort) - shield_cost,
    }
}
