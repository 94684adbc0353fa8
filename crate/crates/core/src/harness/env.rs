use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mdp::{build_observation, reward, Norms, RewardBreakdown, RewardParams};
use crate::error::Result;
use crate::plant::{self, PlantConfig, PlantState, StepOutputs};
use crate::safety::CheckInput;
use crate::shield::{EnvStep, ShieldEnv};
use crate::space::{Action, Observation};
use crate::timeseries::ExogenousSeries;

/// What the plant did on the most recent executed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub outputs: StepOutputs,
    pub thermal_demand: f64,
    pub breakdown: RewardBreakdown,
}

/// Mutable part of [`PlantEnv`], enough to resume a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvCursor {
    pub state: PlantState,
    pub cursor: usize,
    pub episode: usize,
}

/// The plant driven over an exogenous series. One pass over the series is
/// an episode; the last step reports `done` and the environment resets to
/// the start of the series.
#[derive(Debug, Clone)]
pub struct PlantEnv {
    series: Arc<ExogenousSeries>,
    plant: PlantConfig,
    norms: Norms,
    reward: RewardParams,
    state: PlantState,
    cursor: usize,
    episode: usize,
    last: Option<StepRecord>,
}

impl PlantEnv {
    pub fn new(series: Arc<ExogenousSeries>, plant: PlantConfig, norms: Norms, reward: RewardParams) -> Result<Self> {
        reward.validate()?;
        let state = plant::reset(&plant, 0)?;
        Ok(PlantEnv {
            series,
            plant,
            norms,
            reward,
            state,
            cursor: 0,
            episode: 0,
            last: None,
        })
    }

    pub fn series(&self) -> &ExogenousSeries {
        &self.series
    }

    pub fn plant(&self) -> &PlantConfig {
        &self.plant
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn last_step(&self) -> Option<&StepRecord> {
        self.last.as_ref()
    }

    pub fn snapshot(&self) -> EnvCursor {
        EnvCursor {
            state: self.state,
            cursor: self.cursor,
            episode: self.episode,
        }
    }

    pub fn restore(&mut self, c: EnvCursor) {
        self.state = c.state;
        self.cursor = c.cursor % self.series.len();
        self.episode = c.episode;
        self.last = None;
    }

    pub fn reset(&mut self) -> Result<()> {
        self.state = plant::reset(&self.plant, 0)?;
        self.cursor = 0;
        self.last = None;
        Ok(())
    }

    fn observation_at(&self, k: usize, state: &PlantState) -> Result<Observation> {
        let s = &self.series;
        build_observation(s.get(k), state, s.hour_of_day(k), s.day_of_week(k), &self.plant, &self.norms)
    }

    pub fn try_observe(&self) -> Result<Observation> {
        self.observation_at(self.cursor, &self.state)
    }
}

impl ShieldEnv for PlantEnv {
    fn observe(&self) -> Observation {
        self.try_observe()
            .expect("series and norms are validated at construction")
    }

    fn check_input(&self) -> CheckInput {
        let exo = self.series.get(self.cursor);
        CheckInput {
            thermal_demand: exo.thermal_demand,
            ambient_temp: exo.ambient_temp,
            soc_tess: self.state.soc_tess,
            soc_bess: self.state.soc_bess,
        }
    }

    fn execute(&mut self, action: &Action) -> Result<EnvStep> {
        let exo = *self.series.get(self.cursor);
        let (next, outputs) = plant::step(&self.state, action, &exo, &self.plant)?;
        let breakdown = reward(&outputs, &exo, self.plant.gas_price, &self.reward, 0.0);
        let k_next = (self.cursor + 1) % self.series.len();
        let done = k_next == 0;
        let s_next = self.observation_at(k_next, &next)?;
        self.last = Some(StepRecord {
            outputs,
            thermal_demand: exo.thermal_demand,
            breakdown,
        });
        if done {
            self.state = plant::reset(&self.plant, 0)?;
            self.episode += 1;
        } else {
            self.state = next;
        }
        self.cursor = k_next;
        Ok(EnvStep {
            s_next,
            r: breakdown.reward,
            done,
        })
    }
}
