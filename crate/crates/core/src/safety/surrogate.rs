use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::{ForestParams, RandomForest};
use super::log::{OperationLog, MIN_LOG_ROWS};
use super::{Asset, CheckInput, PowerPredictor};
use crate::error::{Error, Result};
use crate::plant::PlantConfig;
use crate::space::Action;

pub const SURROGATE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub r2: f64,
    /// MW
    pub mae: f64,
    /// MAE divided by the range of the held-out targets.
    pub nmae: f64,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub asset: Asset,
    pub feature_names: Vec<String>,
    pub fit_metrics: FitMetrics,
    /// Physical power envelope predictions are clipped to.
    pub envelope: (f64, f64),
    forest: RandomForest,
}

impl SurrogateModel {
    pub fn predict_features(&self, features: &[f64]) -> f64 {
        self.forest
            .predict(features)
            .clamp(self.envelope.0, self.envelope.1)
    }
}

fn feature_names(asset: Asset) -> Vec<String> {
    let a = format!("action_{}", asset.name());
    let names: [&str; 2] = match asset {
        Asset::Boiler | Asset::HeatPump | Asset::Chp => ["ambient_temp", "on"],
        Asset::Tess => ["soc_tess", "ambient_temp"],
        Asset::Bess => ["soc_bess", "ambient_temp"],
    };
    std::iter::once(a).chain(names.iter().map(|s| s.to_string())).collect()
}

/// Feature vector `χ` for one asset: its own action component plus
/// ambient temperature and either the decoded on/off state or the SOC.
fn features(asset: Asset, action: &Action, input: &CheckInput, off_threshold: f64) -> [f64; 3] {
    let a = action.0[asset.action_index()];
    match asset {
        Asset::Boiler | Asset::HeatPump | Asset::Chp => {
            [a, input.ambient_temp, if a >= off_threshold { 1.0 } else { 0.0 }]
        }
        Asset::Tess => [a, input.soc_tess, input.ambient_temp],
        Asset::Bess => [a, input.soc_bess, input.ambient_temp],
    }
}

fn envelope(asset: Asset, plant: &PlantConfig) -> (f64, f64) {
    match asset {
        Asset::Boiler => (0.0, plant.boiler.p_nom_th),
        Asset::HeatPump => (0.0, plant.heat_pump.p_nom_th),
        Asset::Chp => (0.0, plant.chp.p_nom_th),
        Asset::Tess => (plant.tess.p_min_signed, plant.tess.p_max_signed),
        Asset::Bess => (plant.bess.p_min_signed, plant.bess.p_max_signed),
    }
}

/// One surrogate per asset, persisted as versioned JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSet {
    pub version: u32,
    pub off_threshold: f64,
    /// Ordered as [`Asset::ALL`].
    pub models: Vec<SurrogateModel>,
}

impl SurrogateSet {
    pub fn get(&self, asset: Asset) -> &SurrogateModel {
        &self.models[asset as usize]
    }

    pub fn predict(&self, asset: Asset, action: &Action, input: &CheckInput) -> f64 {
        let f = features(asset, action, input, self.off_threshold);
        self.get(asset).predict_features(&f)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: SurrogateSet = serde_json::from_str(&text)?;
        if set.version != SURROGATE_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "surrogate file version {} (expected {SURROGATE_FORMAT_VERSION})",
                set.version
            )));
        }
        if set.models.len() != Asset::ALL.len()
            || set.models.iter().zip(Asset::ALL).any(|(m, a)| m.asset != a)
        {
            return Err(Error::Config("surrogate file lists unexpected assets".into()));
        }
        Ok(set)
    }
}

impl PowerPredictor for SurrogateSet {
    fn predict(&self, asset: Asset, action: &Action, input: &CheckInput) -> f64 {
        SurrogateSet::predict(self, asset, action, input)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub holdout_frac: f64,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            holdout_frac: 0.25,
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

fn is_constant(values: impl Iterator<Item = f64>) -> bool {
    let mut it = values;
    match it.next() {
        None => true,
        Some(first) => it.all(|v| v == first),
    }
}

/// Fits one forest per asset on a shuffled split of `log`; metrics come
/// from the held-out part only.
pub fn fit_surrogates(log: &OperationLog, plant: &PlantConfig, opts: &FitOptions) -> Result<SurrogateSet> {
    if log.len() < MIN_LOG_ROWS {
        return Err(Error::LogTooSmall {
            rows: log.len(),
            min: MIN_LOG_ROWS,
        });
    }
    if !(opts.holdout_frac > 0.0 && opts.holdout_frac <= 0.5) {
        return Err(Error::Config(format!(
            "holdout_frac {} outside (0, 0.5]",
            opts.holdout_frac
        )));
    }
    let n = log.len();
    let n_test = ((n as f64 * opts.holdout_frac).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    let (test_idx, train_idx) = order.split_at(n_test);

    let th = plant.off_threshold;
    let mut models = Vec::with_capacity(Asset::ALL.len());
    for asset in Asset::ALL {
        let k = asset.action_index();
        let row_features = |i: usize| features(asset, &log.rows[i].action, &log.rows[i].input, th).to_vec();

        let degenerate = |what: &str| Error::DegenerateLog {
            asset: asset.name().into(),
            what: what.into(),
        };
        if is_constant(train_idx.iter().map(|&i| log.rows[i].realized[k])) {
            return Err(degenerate("constant target"));
        }
        if is_constant(train_idx.iter().map(|&i| log.rows[i].action.0[k])) {
            return Err(degenerate("constant action feature"));
        }

        let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| row_features(i)).collect();
        let y: Vec<f64> = train_idx.iter().map(|&i| log.rows[i].realized[k]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1 + k as u64));
        let forest = RandomForest::fit(&x, &y, &opts.forest, &mut rng);

        let mut model = SurrogateModel {
            asset,
            feature_names: feature_names(asset),
            fit_metrics: FitMetrics {
                r2: 0.0,
                mae: 0.0,
                nmae: 0.0,
                n_train: train_idx.len(),
                n_test: test_idx.len(),
            },
            envelope: envelope(asset, plant),
            forest,
        };

        let actual: Vec<f64> = test_idx.iter().map(|&i| log.rows[i].realized[k]).collect();
        let predicted: Vec<f64> = test_idx
            .iter()
            .map(|&i| model.predict_features(&row_features(i)))
            .collect();
        model.fit_metrics = metrics(&actual, &predicted, train_idx.len());
        models.push(model);
    }
    Ok(SurrogateSet {
        version: SURROGATE_FORMAT_VERSION,
        off_threshold: th,
        models,
    })
}

fn metrics(actual: &[f64], predicted: &[f64], n_train: usize) -> FitMetrics {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    let mae = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum::<f64>() / n;
    let (lo, hi) = actual
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &a| (l.min(a), h.max(a)));
    let range = hi - lo;
    FitMetrics {
        r2: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        mae,
        nmae: if range > 0.0 { mae / range } else if mae == 0.0 { 0.0 } else { f64::INFINITY },
        n_train,
        n_test: actual.len(),
    }
}
