use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::CheckInput;
use crate::error::{Error, Result};
use crate::plant::{self, PlantConfig};
use crate::shield::fallback_policy;
use crate::space::{Action, ACTION_DIM};
use crate::timeseries::ExogenousSeries;

pub const MIN_LOG_ROWS: usize = 100;

const HEADER: [&str; 14] = [
    "action_boiler",
    "action_heat_pump",
    "action_chp",
    "action_tess",
    "action_bess",
    "feature_ambient_temp",
    "feature_soc_tess",
    "feature_soc_bess",
    "feature_thermal_demand",
    "q_boiler",
    "q_heat_pump",
    "q_chp",
    "q_tess",
    "q_bess",
];

/// One logged step: the action applied, the conditions before it, and the
/// realized power of every asset (`q_bess` is the BESS electrical power).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub action: Action,
    pub input: CheckInput,
    /// Boiler, heat pump, CHP, TESS (MW_th) and BESS (MW_e).
    pub realized: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OperationLog {
    pub rows: Vec<LogRow>,
}

impl OperationLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(out, "{}", HEADER.join(",")).map_err(io)?;
        for r in &self.rows {
            let a = r.action.0;
            let q = r.realized;
            let i = r.input;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                a[0], a[1], a[2], a[3], a[4],
                i.ambient_temp, i.soc_tess, i.soc_bess, i.thermal_demand,
                q[0], q[1], q[2], q[3], q[4]
            )
            .map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        if reader.headers()?.iter().ne(HEADER.iter().copied()) {
            return Err(Error::MalformedRow {
                row: 0,
                msg: "unexpected operation log header".into(),
            });
        }
        let mut rows = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let rec = rec?;
            let mut v = [0.0; 14];
            if rec.len() != v.len() {
                return Err(Error::MalformedRow {
                    row: k + 1,
                    msg: format!("expected 14 fields, found {}", rec.len()),
                });
            }
            for (slot, field) in v.iter_mut().zip(rec.iter()) {
                *slot = field.parse().map_err(|_| Error::MalformedRow {
                    row: k + 1,
                    msg: format!("bad number `{field}`"),
                })?;
            }
            rows.push(LogRow {
                action: Action([v[0], v[1], v[2], v[3], v[4]]),
                input: CheckInput {
                    ambient_temp: v[5],
                    soc_tess: v[6],
                    soc_bess: v[7],
                    thermal_demand: v[8],
                },
                realized: [v[9], v[10], v[11], v[12], v[13]],
            });
        }
        Ok(OperationLog { rows })
    }
}

/// Logging policy: the safe fallback action, perturbed per component either
/// by Gaussian noise or, with probability `uniform_prob`, replaced by a
/// uniform draw. Storage components also carry a bias redrawn every
/// `drift_period` steps so both state-of-charge ranges get swept end to end.
#[derive(Debug, Clone)]
pub struct ExploringFallback {
    pub plant: PlantConfig,
    pub noise_std: f64,
    pub uniform_prob: f64,
    pub storage_drift: f64,
    pub drift_period: usize,
    step: usize,
    drift: [f64; 2],
}

impl ExploringFallback {
    pub fn new(plant: PlantConfig, noise_std: f64, uniform_prob: f64, storage_drift: f64, drift_period: usize) -> Self {
        ExploringFallback {
            plant,
            noise_std,
            uniform_prob,
            storage_drift,
            drift_period: drift_period.max(1),
            step: 0,
            drift: [0.0; 2],
        }
    }

    pub fn act(&mut self, input: &CheckInput, rng: &mut ChaCha8Rng) -> Result<Action> {
        let base = fallback_policy(input.thermal_demand, &self.plant)?.action;
        let noise = Normal::new(0.0, self.noise_std.max(0.0))
            .map_err(|e| Error::Config(format!("log noise: {e}")))?;
        if self.step % self.drift_period == 0 {
            let d = self.storage_drift.abs();
            for v in &mut self.drift {
                *v = if d > 0.0 { rng.random_range(-d..=d) } else { 0.0 };
            }
        }
        self.step += 1;
        let mut a = [0.0; ACTION_DIM];
        for (k, slot) in a.iter_mut().enumerate() {
            let bias = match k {
                Action::TESS => self.drift[0],
                Action::BESS => self.drift[1],
                _ => 0.0,
            };
            *slot = if rng.random_bool(self.uniform_prob.clamp(0.0, 1.0)) {
                rng.random_range(-1.0..=1.0)
            } else {
                (base.0[k] + bias + noise.sample(rng)).clamp(-1.0, 1.0)
            };
        }
        Ok(Action(a))
    }
}

/// Runs the plant for `n_steps` under `policy`, wrapping around `series`,
/// and records every realized step.
pub fn collect_log<P>(
    config: &PlantConfig,
    series: &ExogenousSeries,
    mut policy: P,
    n_steps: usize,
    seed: u64,
) -> Result<OperationLog>
where
    P: FnMut(&CheckInput, &mut ChaCha8Rng) -> Result<Action>,
{
    if n_steps < MIN_LOG_ROWS {
        return Err(Error::LogTooSmall {
            rows: n_steps,
            min: MIN_LOG_ROWS,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = plant::reset(config, seed)?;
    let mut rows = Vec::with_capacity(n_steps);
    for t in 0..n_steps {
        let k = t % series.len();
        if k == 0 && t > 0 {
            state = plant::reset(config, seed)?;
        }
        let exo = series.get(k);
        let input = CheckInput {
            thermal_demand: exo.thermal_demand,
            ambient_temp: exo.ambient_temp,
            soc_tess: state.soc_tess,
            soc_bess: state.soc_bess,
        };
        let action = policy(&input, &mut rng)?;
        let (next, out) = plant::step(&state, &action, exo, config)?;
        rows.push(LogRow {
            action,
            input,
            realized: [out.q_boil, out.q_hp, out.q_chp, out.q_tess, out.p_bess],
        });
        state = next;
    }
    Ok(OperationLog { rows })
}
