//! Discrete-time multi-energy plant: boiler, heat pump, CHP, thermal and
//! battery storage, wind, PV and a grid transformer acting as slack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Action;
use crate::timeseries::{ExogenousRecord, STEP_HOURS};

const KELVIN: f64 = 273.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub name: String,
    /// Nominal thermal power, MW_th (0 if none).
    pub p_nom_th: f64,
    /// Nominal electrical power, MW_e (0 if none).
    pub p_nom_el: f64,
    /// Minimum on-state output as a fraction of nominal.
    pub p_min_frac: f64,
    /// Energy capacity, MWh (0 for non-storage).
    pub e_nom: f64,
    /// Signed power bounds for storage and the grid, MW. Discharge positive.
    pub p_min_signed: f64,
    pub p_max_signed: f64,
}

impl AssetSpec {
    fn unit(name: &str, p_nom_th: f64, p_nom_el: f64, p_min_frac: f64) -> Self {
        AssetSpec {
            name: name.into(),
            p_nom_th,
            p_nom_el,
            p_min_frac,
            e_nom: 0.0,
            p_min_signed: 0.0,
            p_max_signed: p_nom_th.max(p_nom_el),
        }
    }

    fn storage(name: &str, p_min: f64, p_max: f64, e_nom: f64) -> Self {
        AssetSpec {
            name: name.into(),
            p_nom_th: 0.0,
            p_nom_el: 0.0,
            p_min_frac: 0.0,
            e_nom,
            p_min_signed: p_min,
            p_max_signed: p_max,
        }
    }

    /// Thermal on-state range `[P_min, P_max]`, MW_th.
    pub fn thermal_range(&self) -> (f64, f64) {
        (self.p_min_frac * self.p_nom_th, self.p_nom_th)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("asset {}: {msg}", self.name)));
        if !(0.0..=1.0).contains(&self.p_min_frac) {
            return bad("p_min_frac outside [0, 1]");
        }
        if self.e_nom.is_nan() || self.e_nom < 0.0 {
            return bad("e_nom < 0");
        }
        if self.p_nom_th.is_nan() || self.p_nom_th < 0.0 || self.p_nom_el.is_nan() || self.p_nom_el < 0.0 {
            return bad("negative nominal power");
        }
        if self.p_min_signed.is_nan() || self.p_max_signed.is_nan() || self.p_min_signed > self.p_max_signed {
            return bad("p_min_signed > p_max_signed");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub boiler: AssetSpec,
    pub heat_pump: AssetSpec,
    pub chp: AssetSpec,
    pub tess: AssetSpec,
    pub bess: AssetSpec,
    pub wind: AssetSpec,
    pub solar: AssetSpec,
    pub transformer: AssetSpec,
    pub boiler_eff: f64,
    pub chp_th_eff: f64,
    pub chp_el_eff: f64,
    pub hp_cop_max: f64,
    /// Fraction of the Carnot COP the heat pump achieves.
    pub carnot_fraction: f64,
    /// Relative TESS energy loss per step.
    pub tess_loss_per_step: f64,
    /// BESS round-trip efficiency, applied on charge.
    pub bess_roundtrip_eff: f64,
    /// EUR/MWh of fuel.
    pub gas_price: f64,
    /// Raw action value below which a semi-continuous unit is off.
    pub off_threshold: f64,
    pub initial_soc: f64,
    pub t_cond: f64,
    pub t_return_boiler: f64,
    /// Mean TESS temperature at SOC 0 and SOC 1, °C.
    pub t_tess_empty: f64,
    pub t_tess_full: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            boiler: AssetSpec::unit("boiler", 2.0, 0.0, 0.10),
            heat_pump: AssetSpec::unit("heat_pump", 1.0, 0.0, 0.25),
            chp: AssetSpec::unit("chp", 1.0, 0.8, 0.50),
            tess: AssetSpec::storage("tess", -0.5, 0.5, 3.5),
            bess: AssetSpec::storage("bess", -0.5, 0.5, 2.0),
            wind: AssetSpec::unit("wind", 0.0, 0.8, 0.015),
            solar: AssetSpec::unit("solar", 0.0, 1.0, 0.0),
            transformer: AssetSpec::storage("transformer", f64::NEG_INFINITY, f64::INFINITY, 0.0),
            boiler_eff: 0.90,
            chp_th_eff: 0.45,
            chp_el_eff: 0.36,
            hp_cop_max: 4.5,
            carnot_fraction: 0.5,
            tess_loss_per_step: 0.001,
            bess_roundtrip_eff: 0.92,
            gas_price: 35.0,
            off_threshold: -0.6,
            initial_soc: 0.5,
            t_cond: 70.0,
            t_return_boiler: 60.0,
            t_tess_empty: 60.0,
            t_tess_full: 90.0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        for a in [
            &self.boiler,
            &self.heat_pump,
            &self.chp,
            &self.tess,
            &self.bess,
            &self.wind,
            &self.solar,
            &self.transformer,
        ] {
            a.validate()?;
        }
        for (name, eff) in [
            ("boiler_eff", self.boiler_eff),
            ("chp_th_eff", self.chp_th_eff),
            ("chp_el_eff", self.chp_el_eff),
            ("carnot_fraction", self.carnot_fraction),
            ("bess_roundtrip_eff", self.bess_roundtrip_eff),
        ] {
            if !(eff > 0.0 && eff <= 1.0) {
                return Err(Error::Config(format!("{name} = {eff} outside (0, 1]")));
            }
        }
        if !(self.hp_cop_max >= 1.0) {
            return Err(Error::Config(format!("hp_cop_max = {} < 1", self.hp_cop_max)));
        }
        if !(0.0..1.0).contains(&self.tess_loss_per_step) {
            return Err(Error::Config("tess_loss_per_step outside [0, 1)".into()));
        }
        if !(self.off_threshold > -1.0 && self.off_threshold < 1.0) {
            return Err(Error::Config("off_threshold outside (-1, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return Err(Error::Config("initial_soc outside [0, 1]".into()));
        }
        if self.tess.e_nom <= 0.0 || self.bess.e_nom <= 0.0 {
            return Err(Error::Config("storage e_nom must be positive".into()));
        }
        if !(self.gas_price.is_finite()) {
            return Err(Error::Config("gas_price must be finite".into()));
        }
        Ok(())
    }

    /// Mean TESS temperature at a given SOC.
    pub fn tess_temperature(&self, soc: f64) -> f64 {
        self.t_tess_empty + (self.t_tess_full - self.t_tess_empty) * soc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub soc_tess: f64,
    pub soc_bess: f64,
    pub t_tess_mean: f64,
    pub t_return_boiler: f64,
    pub t_evap: f64,
    pub t_cond: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepOutputs {
    pub q_boil: f64,
    pub q_hp: f64,
    pub q_chp: f64,
    /// Discharge positive.
    pub q_tess: f64,
    /// Electrical consumption.
    pub p_hp: f64,
    /// Electrical production.
    pub p_chp: f64,
    /// Discharge positive.
    pub p_bess: f64,
    pub p_wind: f64,
    pub p_solar: f64,
    /// Import positive.
    pub p_grid: f64,
    /// Fuel power, MW.
    pub gas_power: f64,
}

impl StepOutputs {
    /// Total thermal production including TESS (charging counts negative).
    pub fn thermal_production(&self) -> f64 {
        self.q_boil + self.q_hp + self.q_chp + self.q_tess
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSetpoint {
    pub on: bool,
    /// MW_th; 0 when off, inside `[P_min, P_max]` when on.
    pub power: f64,
}

impl UnitSetpoint {
    const OFF: UnitSetpoint = UnitSetpoint { on: false, power: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedAction {
    pub boiler: UnitSetpoint,
    pub heat_pump: UnitSetpoint,
    pub chp: UnitSetpoint,
    /// MW_th, discharge positive.
    pub tess: f64,
    /// MW_e, discharge positive.
    pub bess: f64,
}

pub fn reset(config: &PlantConfig, _seed: u64) -> Result<PlantState> {
    config.validate()?;
    let soc = config.initial_soc;
    Ok(PlantState {
        soc_tess: soc,
        soc_bess: soc,
        t_tess_mean: config.tess_temperature(soc),
        t_return_boiler: config.t_return_boiler,
        t_evap: 10.0,
        t_cond: config.t_cond,
    })
}

/// Semi-continuous decode: off below `off_threshold`, else a linear map of
/// `[off_threshold, 1]` onto `[P_min, P_max]`.
pub fn decode_unit(raw: f64, spec: &AssetSpec, off_threshold: f64) -> UnitSetpoint {
    if raw < off_threshold {
        return UnitSetpoint::OFF;
    }
    let (lo, hi) = spec.thermal_range();
    let frac = ((raw - off_threshold) / (1.0 - off_threshold)).clamp(0.0, 1.0);
    UnitSetpoint {
        on: true,
        power: lo + frac * (hi - lo),
    }
}

/// Inverse of [`decode_unit`] for a desired thermal output. Outputs below
/// `P_min` snap to whichever of off and `P_min` is closer.
pub fn encode_unit(power: f64, spec: &AssetSpec, off_threshold: f64) -> f64 {
    let (lo, hi) = spec.thermal_range();
    if power <= 0.0 || (power < lo && power < lo - power) {
        return -1.0;
    }
    let p = power.clamp(lo, hi);
    let frac = if hi > lo { (p - lo) / (hi - lo) } else { 1.0 };
    (off_threshold + frac * (1.0 - off_threshold)).clamp(-1.0, 1.0)
}

/// Linear map of `[-1, 1]` onto `[p_min_signed, p_max_signed]`.
pub fn decode_storage(raw: f64, spec: &AssetSpec) -> f64 {
    let (lo, hi) = (spec.p_min_signed, spec.p_max_signed);
    lo + (raw.clamp(-1.0, 1.0) + 1.0) * 0.5 * (hi - lo)
}

pub fn decode_action(raw: &Action, config: &PlantConfig) -> Result<DecodedAction> {
    raw.validate()?;
    let th = config.off_threshold;
    Ok(DecodedAction {
        boiler: decode_unit(raw.boiler(), &config.boiler, th),
        heat_pump: decode_unit(raw.heat_pump(), &config.heat_pump, th),
        chp: decode_unit(raw.chp(), &config.chp, th),
        tess: decode_storage(raw.tess(), &config.tess),
        bess: decode_storage(raw.bess(), &config.bess),
    })
}

/// Heat-pump COP from a Carnot-fraction model, capped at `hp_cop_max` and
/// floored at 1. The evaporator follows the ambient temperature.
pub fn hp_cop(state: &PlantState, exo: &ExogenousRecord, config: &PlantConfig) -> Result<f64> {
    cop_at(state.t_cond, exo.ambient_temp, config)
}

pub fn cop_at(t_cond: f64, t_evap: f64, config: &PlantConfig) -> Result<f64> {
    if !t_cond.is_finite() || !t_evap.is_finite() {
        return Err(Error::NonFinite("heat pump temperature".into()));
    }
    if t_cond <= t_evap {
        return Err(Error::DegenerateTemperature { t_cond, t_evap });
    }
    let carnot = (t_cond + KELVIN) / (t_cond - t_evap);
    Ok((config.carnot_fraction * carnot).min(config.hp_cop_max).max(1.0))
}

/// Advances the plant by one 15-minute step.
pub fn step(
    state: &PlantState,
    action: &Action,
    exo: &ExogenousRecord,
    config: &PlantConfig,
) -> Result<(PlantState, StepOutputs)> {
    if !exo.is_finite() {
        return Err(Error::NonFinite(format!("exogenous record {}", exo.index)));
    }
    let d = decode_action(action, config)?;
    let dt = STEP_HOURS;

    let q_boil = d.boiler.power;

    let (q_hp, p_hp) = if d.heat_pump.on {
        let cop = hp_cop(state, exo, config)?;
        let (lo, hi) = config.heat_pump.thermal_range();
        let q = (d.heat_pump.power * cop / config.hp_cop_max).clamp(lo, hi);
        (q, q / cop)
    } else {
        (0.0, 0.0)
    };

    let q_chp = d.chp.power;
    let p_chp = q_chp * config.chp_el_eff / config.chp_th_eff;

    // TESS: curtail to the energy the tank can deliver or absorb this step.
    let e_tess = config.tess.e_nom;
    let q_tess = if d.tess >= 0.0 {
        d.tess.min(state.soc_tess * e_tess / dt)
    } else {
        d.tess.max(-(1.0 - state.soc_tess) * e_tess / dt)
    };
    let soc_tess_flow = (state.soc_tess - q_tess * dt / e_tess).clamp(0.0, 1.0);
    let soc_tess = soc_tess_flow * (1.0 - config.tess_loss_per_step);

    // BESS: efficiency applies to the energy stored on charge.
    let e_bess = config.bess.e_nom;
    let eta = config.bess_roundtrip_eff;
    let p_bess = if d.bess >= 0.0 {
        d.bess.min(state.soc_bess * e_bess / dt)
    } else {
        d.bess.max(-(1.0 - state.soc_bess) * e_bess / (eta * dt))
    };
    let stored = if p_bess >= 0.0 { p_bess } else { p_bess * eta };
    let soc_bess = (state.soc_bess - stored * dt / e_bess).clamp(0.0, 1.0);

    let p_wind = exo.wind_potential * config.wind.p_nom_el;
    let p_solar = exo.solar_potential * config.solar.p_nom_el;
    let p_grid = exo.electrical_demand + p_hp - p_wind - p_solar - p_chp - p_bess;
    let gas_power = q_boil / config.boiler_eff + q_chp / config.chp_th_eff;

    let next = PlantState {
        soc_tess,
        soc_bess,
        t_tess_mean: config.tess_temperature(soc_tess),
        t_return_boiler: config.t_return_boiler,
        t_evap: exo.ambient_temp,
        t_cond: config.t_cond,
    };
    let out = StepOutputs {
        q_boil,
        q_hp,
        q_chp,
        q_tess,
        p_hp,
        p_chp,
        p_bess,
        p_wind,
        p_solar,
        p_grid,
        gas_power,
    };
    Ok((next, out))
}
