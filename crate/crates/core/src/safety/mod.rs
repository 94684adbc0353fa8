//! Decoupled safety layer: learned per-asset thermal-power surrogates and
//! the relaxed thermal-balance check built on them.

mod forest;
mod log;
mod surrogate;

pub use forest::{ForestParams, RandomForest, RegressionTree};
pub use log::{collect_log, ExploringFallback, LogRow, OperationLog, MIN_LOG_ROWS};
pub use surrogate::{
    fit_surrogates, FitMetrics, FitOptions, SurrogateModel, SurrogateSet, SURROGATE_FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Asset {
    Boiler,
    HeatPump,
    Chp,
    Tess,
    Bess,
}

impl Asset {
    pub const ALL: [Asset; 5] = [Asset::Boiler, Asset::HeatPump, Asset::Chp, Asset::Tess, Asset::Bess];
    /// Assets entering the thermal balance. BESS is electrical only.
    pub const THERMAL: [Asset; 4] = [Asset::Boiler, Asset::HeatPump, Asset::Chp, Asset::Tess];

    pub fn name(self) -> &'static str {
        match self {
            Asset::Boiler => "boiler",
            Asset::HeatPump => "heat_pump",
            Asset::Chp => "chp",
            Asset::Tess => "tess",
            Asset::Bess => "bess",
        }
    }

    /// Index of this asset's component in [`Action`].
    pub fn action_index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Asset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Raw (unnormalized) quantities the constraint check conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckInput {
    /// MW_th
    pub thermal_demand: f64,
    /// °C
    pub ambient_temp: f64,
    pub soc_tess: f64,
    pub soc_bess: f64,
}

impl CheckInput {
    fn validate(&self) -> Result<()> {
        let v = [self.thermal_demand, self.ambient_temp, self.soc_tess, self.soc_bess];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("constraint check input".into()));
        }
        Ok(())
    }
}

/// Anything that predicts per-asset realized power for an action.
pub trait PowerPredictor {
    fn predict(&self, asset: Asset, action: &Action, input: &CheckInput) -> f64;
}

impl<F> PowerPredictor for F
where
    F: Fn(Asset, &Action, &CheckInput) -> f64,
{
    fn predict(&self, asset: Asset, action: &Action, input: &CheckInput) -> f64 {
        self(asset, action, input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Predicted production minus demand, MW_th.
    pub residual: f64,
    pub q_tol: f64,
    pub feasible: bool,
    /// Predictions for boiler, heat pump, CHP and TESS in that order.
    pub per_asset_pred: [f64; 4],
}

impl ConstraintReport {
    pub fn prediction(&self, asset: Asset) -> Option<f64> {
        Asset::THERMAL
            .iter()
            .position(|&a| a == asset)
            .map(|k| self.per_asset_pred[k])
    }
}

/// Relaxed thermal balance `|Σ Q_asset − Q_demand| ≤ Q_tol`, with each
/// `Q_asset` taken from `predictor`. The boundary counts as feasible.
pub fn check(
    action: &Action,
    input: &CheckInput,
    predictor: &impl PowerPredictor,
    q_tol: f64,
) -> Result<ConstraintReport> {
    action.validate()?;
    input.validate()?;
    if !(q_tol > 0.0) || !q_tol.is_finite() {
        return Err(Error::Config(format!("q_tol must be positive, got {q_tol}")));
    }
    let mut per_asset_pred = [0.0; 4];
    for (slot, asset) in per_asset_pred.iter_mut().zip(Asset::THERMAL) {
        *slot = predictor.predict(asset, action, input);
    }
    let residual = per_asset_pred.iter().sum::<f64>() - input.thermal_demand;
    if !residual.is_finite() {
        return Err(Error::NonFinite("surrogate prediction".into()));
    }
    Ok(ConstraintReport {
        residual,
        q_tol,
        feasible: residual.abs() <= q_tol,
        per_asset_pred,
    })
}

/// `Σ|production − demand| / Σ demand` over a trace of
/// `(production, demand)` pairs in MW_th.
pub fn episode_tolerance(trace: &[(f64, f64)]) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Empty("tolerance trace"));
    }
    let (mut dev, mut total) = (0.0, 0.0);
    for &(production, demand) in trace {
        dev += (production - demand).abs();
        total += demand;
    }
    if !(total > 0.0) {
        return Err(Error::ZeroDemand);
    }
    Ok(dev / total)
}

/// Fitted surrogates plus the tolerance they are checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyLayer {
    pub surrogates: SurrogateSet,
    pub q_tol: f64,
}

impl SafetyLayer {
    pub fn new(surrogates: SurrogateSet, q_tol: f64) -> Result<Self> {
        if !(q_tol > 0.0) || !q_tol.is_finite() {
            return Err(Error::Config(format!("q_tol must be positive, got {q_tol}")));
        }
        Ok(SafetyLayer { surrogates, q_tol })
    }

    /// `fraction` of the mean per-step thermal demand.
    pub fn q_tol_from_mean_demand(mean_demand: f64, fraction: f64) -> f64 {
        fraction * mean_demand
    }

    pub fn check(&self, action: &Action, input: &CheckInput) -> Result<ConstraintReport> {
        check(action, input, &self.surrogates, self.q_tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(demand: f64) -> CheckInput {
        CheckInput {
            thermal_demand: demand,
            ambient_temp: 10.0,
            soc_tess: 0.5,
            soc_bess: 0.5,
        }
    }

    /// Splits a fixed total evenly over the four thermal assets.
    fn fixed_total(total: f64) -> impl Fn(Asset, &Action, &CheckInput) -> f64 {
        move |_, _, _| total / 4.0
    }

    const OFF: Action = Action([-1.0, -1.0, -1.0, 0.0, 0.0]);

    #[test]
    fn null_case_is_feasible() {
        let r = check(&OFF, &input(0.0), &fixed_total(0.0), 0.15).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(r.feasible);
    }

    #[test]
    fn overproduction_within_and_beyond_tolerance() {
        let r = check(&OFF, &input(1.0), &fixed_total(1.10), 0.15).unwrap();
        assert!((r.residual - 0.10).abs() < 1e-12);
        assert!(r.feasible);
        let r = check(&OFF, &input(1.0), &fixed_total(2.2), 0.15).unwrap();
        assert!((r.residual - 1.2).abs() < 1e-12);
        assert!(!r.feasible);
    }

    #[test]
    fn boundary_is_feasible() {
        let pred = |a: Asset, _: &Action, _: &CheckInput| if a == Asset::Boiler { 1.25 } else { 0.0 };
        let r = check(&OFF, &input(1.0), &pred, 0.25).unwrap();
        assert_eq!(r.residual, 0.25);
        assert!(r.feasible);
        assert_eq!(r.prediction(Asset::Boiler), Some(1.25));
        assert_eq!(r.prediction(Asset::Bess), None);
    }

    #[test]
    fn bad_inputs_error() {
        assert!(check(&OFF, &input(f64::NAN), &fixed_total(0.0), 0.15).is_err());
        assert!(check(&OFF, &input(1.0), &fixed_total(0.0), 0.0).is_err());
        assert!(check(&Action([2.0, 0.0, 0.0, 0.0, 0.0]), &input(1.0), &fixed_total(0.0), 0.1).is_err());
        assert!(check(&OFF, &input(1.0), &fixed_total(f64::INFINITY), 0.1).is_err());
    }

    #[test]
    fn tolerance_examples() {
        let exact: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 + 1.0, i as f64 + 1.0)).collect();
        assert_eq!(episode_tolerance(&exact).unwrap(), 0.0);
        let none: Vec<(f64, f64)> = (0..10).map(|i| (0.0, i as f64 + 1.0)).collect();
        assert_eq!(episode_tolerance(&none).unwrap(), 1.0);
        let over: Vec<(f64, f64)> = (0..10).map(|i| (1.1 * (i as f64 + 1.0), i as f64 + 1.0)).collect();
        assert!((episode_tolerance(&over).unwrap() - 0.10).abs() < 1e-12);
        assert!(matches!(episode_tolerance(&[(1.0, 0.0)]), Err(Error::ZeroDemand)));
        assert!(matches!(episode_tolerance(&[]), Err(Error::Empty(_))));
    }

    proptest::proptest! {
        #[test]
        fn tolerance_is_scale_invariant(
            trace in proptest::collection::vec((0.0f64..3.0, 0.01f64..3.0), 1..50),
            k in 0.01f64..100.0,
        ) {
            let base = episode_tolerance(&trace).unwrap();
            let scaled: Vec<(f64, f64)> = trace.iter().map(|&(p, d)| (k * p, k * d)).collect();
            let t = episode_tolerance(&scaled).unwrap();
            proptest::prop_assert!((t - base).abs() <= 1e-9 * base.max(1.0));
        }
    }
}
