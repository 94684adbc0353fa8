use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::mdp::RewardParams;
use crate::agents::{Preset, Td3Hyper};
use crate::error::{Error, Result};
use crate::plant::PlantConfig;
use crate::safety::ForestParams;
use crate::shield::{ShieldConfig, ShieldKind};
use crate::timeseries::{load_series, synth_profiles, window, ExogenousSeries, STEPS_PER_WEEK, STEPS_PER_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Td3,
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 2] = [AgentKind::Td3, AgentKind::Random];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Td3 => "td3",
            AgentKind::Random => "random",
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "td3" => Ok(AgentKind::Td3),
            "random" => Ok(AgentKind::Random),
            other => Err(Error::Config(format!("unknown agent `{other}`"))),
        }
    }
}

/// Preset matching a shield in the benchmark matrix.
pub fn preset_for(shield: ShieldKind) -> Preset {
    match shield {
        ShieldKind::None => Preset::Unsafe,
        ShieldKind::SafeFallback => Preset::Safefallback,
        ShieldKind::GiveSafe => Preset::Givesafe,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyConfig {
    /// Q_tol as a fraction of the mean per-step training demand.
    pub q_tol_fraction: f64,
    pub log_rows: usize,
    pub log_seed: u64,
    /// Logging policy: Gaussian perturbation of the fallback action...
    pub log_noise_std: f64,
    /// ...or, per component with this probability, a uniform draw.
    pub log_uniform_prob: f64,
    /// Bound of the storage bias redrawn every `log_drift_period` steps.
    pub log_storage_drift: f64,
    pub log_drift_period: usize,
    pub holdout_frac: f64,
    pub fit_seed: u64,
    pub forest: ForestParams,
    /// Load fitted surrogates instead of fitting at start-up.
    pub surrogates: Option<PathBuf>,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            q_tol_fraction: 0.15,
            log_rows: 10_000,
            log_seed: 7,
            log_noise_std: 0.3,
            log_uniform_prob: 0.5,
            log_storage_drift: 0.5,
            log_drift_period: 192,
            holdout_frac: 0.25,
            fit_seed: 0,
            forest: ForestParams::default(),
            surrogates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShieldSection {
    pub kind: ShieldKind,
    #[serde(flatten)]
    pub params: ShieldConfig,
}

impl Default for ShieldSection {
    fn default() -> Self {
        ShieldSection {
            kind: ShieldKind::SafeFallback,
            params: ShieldConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentSection {
    pub kind: AgentKind,
    /// Label of the preset `td3` was initialized from.
    pub preset: Preset,
    #[serde(flatten)]
    pub td3: Td3Hyper,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            kind: AgentKind::Td3,
            preset: Preset::Safefallback,
            td3: Td3Hyper::preset(Preset::Safefallback),
        }
    }
}

impl AgentSection {
    pub fn apply_preset(&mut self, p: Preset) {
        let hidden = std::mem::take(&mut self.td3.hidden);
        let warmup = self.td3.warmup_steps;
        self.td3 = Td3Hyper {
            hidden,
            warmup_steps: warmup,
            ..Td3Hyper::preset(p)
        };
        self.preset = p;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub seed: u64,
    /// Real environment steps per training run.
    pub budget: usize,
    pub eval_interval: usize,
    pub n_runs: usize,
    /// Worker threads for multi-run commands; 0 uses all cores.
    pub threads: usize,
    pub data_seed: u64,
    pub series_len: usize,
    /// Training series CSV; synthesized from `data_seed` when absent.
    pub series: Option<PathBuf>,
    pub eval_data_seed: u64,
    /// Evaluation series CSV; synthesized from `eval_data_seed` when absent.
    pub eval_series: Option<PathBuf>,
    pub eval_start: usize,
    pub eval_len: usize,
    #[serde(flatten)]
    pub reward: RewardParams,
    /// Re-check every executed action against the safety layer.
    pub audit: bool,
    pub plots: bool,
    /// Write a checkpoint every this many steps (0: only at the end).
    pub checkpoint_interval: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 0,
            budget: 100_000,
            eval_interval: 10_000,
            n_runs: 5,
            threads: 0,
            data_seed: 42,
            series_len: STEPS_PER_YEAR,
            series: None,
            eval_data_seed: 43,
            eval_series: None,
            eval_start: 0,
            eval_len: STEPS_PER_WEEK,
            reward: RewardParams::default(),
            audit: true,
            plots: true,
            checkpoint_interval: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub plant: PlantConfig,
    pub safety: SafetyConfig,
    pub shield: ShieldSection,
    pub agent: AgentSection,
    pub harness: HarnessConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.shield.params.validate()?;
        self.agent.td3.validate()?;
        self.harness.reward.validate()?;
        let h = &self.harness;
        if h.budget == 0 || h.eval_interval == 0 || h.n_runs == 0 {
            return Err(Error::Config("budget, eval_interval and n_runs must be positive".into()));
        }
        if h.eval_len == 0 || h.series_len == 0 {
            return Err(Error::Config("series lengths must be positive".into()));
        }
        let s = &self.safety;
        if !(s.q_tol_fraction > 0.0) || !s.q_tol_fraction.is_finite() {
            return Err(Error::Config("safety.q_tol_fraction must be positive".into()));
        }
        if self.shield.kind == ShieldKind::GiveSafe && self.agent.kind == AgentKind::Td3 && self.agent.td3.noise_std == 0.0 {
            log::warn!("give_safe with zero exploration noise: the retry loop may exhaust");
        }
        Ok(())
    }

    /// Training series: loaded from `harness.series` or synthesized.
    pub fn training_series(&self) -> Result<ExogenousSeries> {
        match &self.harness.series {
            Some(p) => load_series(p),
            None => synth_profiles(self.harness.data_seed, self.harness.series_len),
        }
    }

    /// Evaluation window of `eval_len` steps starting at `eval_start`.
    pub fn evaluation_series(&self) -> Result<ExogenousSeries> {
        let h = &self.harness;
        let full = match &h.eval_series {
            Some(p) => load_series(p)?,
            None => synth_profiles(h.eval_data_seed, h.eval_start + h.eval_len)?,
        };
        let len = h.eval_len.min(full.len().saturating_sub(h.eval_start));
        window(&full, h.eval_start, len)
    }
}
