use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{AgentKind, Config};
use super::env::{EnvCursor, PlantEnv};
use super::mdp::Norms;
use super::metrics::{runtime_report, EpisodeMetrics, RuntimeStats};
use crate::agents::{random_action, select_action, Mlp, ReplayBuffer, Td3Agent};
use crate::error::{Error, Result};
use crate::safety::{
    collect_log, episode_tolerance, fit_surrogates, CheckInput, ExploringFallback, FitOptions, SafetyLayer,
    SurrogateSet,
};
use crate::shield::{fallback_policy, shielded_step, ExperienceTuple, Proposer, ShieldEnv, ShieldKind};
use crate::space::{Action, Observation};
use crate::timeseries::{ExogenousSeries, STEPS_PER_WEEK, STEP_HOURS};

const EVAL_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const CHECKPOINT_MAGIC: &[u8; 8] = b"EMSSHLD\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Fits surrogates on a log collected from the training series, or loads
/// them when `safety.surrogates` is set. Q_tol follows the training demand.
pub fn build_safety(config: &Config, train: &ExogenousSeries) -> Result<SafetyLayer> {
    let s = &config.safety;
    let surrogates = match &s.surrogates {
        Some(path) => SurrogateSet::load(path)?,
        None => {
            let log = collect_safety_log(config, train)?;
            let opts = FitOptions {
                holdout_frac: s.holdout_frac,
                forest: s.forest.clone(),
                seed: s.fit_seed,
            };
            fit_surrogates(&log, &config.plant, &opts)?
        }
    };
    let q_tol = SafetyLayer::q_tol_from_mean_demand(train.mean_thermal_demand(), s.q_tol_fraction);
    SafetyLayer::new(surrogates, q_tol)
}

pub fn collect_safety_log(config: &Config, train: &ExogenousSeries) -> Result<crate::safety::OperationLog> {
    let s = &config.safety;
    let mut policy = ExploringFallback::new(
        config.plant.clone(),
        s.log_noise_std,
        s.log_uniform_prob,
        s.log_storage_drift,
        s.log_drift_period,
    );
    collect_log(
        &config.plant,
        train,
        |i: &CheckInput, r: &mut ChaCha8Rng| policy.act(i, r),
        s.log_rows,
        s.log_seed,
    )
}

/// Read-only inputs shared by every run of an experiment.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config: Config,
    pub train: Arc<ExogenousSeries>,
    pub eval: Arc<ExogenousSeries>,
    pub norms: Norms,
    pub safety: Option<Arc<SafetyLayer>>,
}

impl RunContext {
    /// Loads or synthesizes both series and builds the safety layer when
    /// `with_safety` is set or the configured shield needs one.
    pub fn prepare(config: &Config, with_safety: bool) -> Result<Self> {
        config.validate()?;
        let train = config.training_series()?;
        let eval = config.evaluation_series()?;
        if eval.len() != STEPS_PER_WEEK {
            log::warn!("evaluation series has {} steps, not one week", eval.len());
        }
        let safety = if with_safety || config.shield.kind != ShieldKind::None {
            Some(Arc::new(build_safety(config, &train)?))
        } else {
            None
        };
        let norms = Norms::from_series(&train, &config.plant);
        Ok(RunContext {
            config: config.clone(),
            train: Arc::new(train),
            eval: Arc::new(eval),
            norms,
            safety,
        })
    }

    /// Same data and safety layer under a different configuration.
    pub fn with_config(&self, config: Config) -> Self {
        RunContext {
            config,
            ..self.clone()
        }
    }

    fn safety_ref(&self) -> Option<&SafetyLayer> {
        self.safety.as_deref()
    }

    fn env(&self, series: &Arc<ExogenousSeries>) -> Result<PlantEnv> {
        PlantEnv::new(
            Arc::clone(series),
            self.config.plant.clone(),
            self.norms,
            self.config.harness.reward,
        )
    }
}

/// Which action source a rollout uses.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    Actor(&'a Mlp),
    Random,
    Fallback,
}

struct StepProposer<'a, 'r> {
    policy: Policy<'a>,
    first_sigma: f64,
    retry_sigma: f64,
    input: CheckInput,
    rng: &'r mut ChaCha8Rng,
    config: &'a Config,
}

impl StepProposer<'_, '_> {
    fn draw(&mut self, s: &Observation, sigma: f64) -> Result<Action> {
        match self.policy {
            Policy::Actor(actor) => select_action(actor, s, sigma, self.rng),
            Policy::Random => Ok(random_action(self.rng)),
            Policy::Fallback => Ok(fallback_policy(self.input.thermal_demand, &self.config.plant)?.action),
        }
    }
}

impl Proposer for StepProposer<'_, '_> {
    fn propose(&mut self, s: &Observation) -> Result<Action> {
        self.draw(s, self.first_sigma)
    }

    fn repropose(&mut self, s: &Observation) -> Result<Action> {
        self.draw(s, self.retry_sigma)
    }
}

/// TD3 behind a shield during training: random actions during warm-up,
/// then the actor plus exploration noise. Every interaction, GiveSafe
/// rejections included, counts towards `train_freq`.
struct Learner<'a> {
    agent: &'a mut Td3Agent,
    buffer: &'a mut ReplayBuffer,
    rng: &'a mut ChaCha8Rng,
    stats: &'a mut TrainStats,
    warm: bool,
}

impl Learner<'_> {
    fn tick(&mut self) -> Result<()> {
        self.stats.interactions += 1;
        let h = &self.agent.hyper;
        let (batch, rounds) = (h.batch_size, h.gradient_steps);
        if self.warm || self.stats.interactions % h.train_freq != 0 {
            return Ok(());
        }
        for _ in 0..rounds {
            if self.buffer.len() < batch {
                break;
            }
            self.agent.update(self.buffer)?;
            self.stats.n_updates += 1;
        }
        Ok(())
    }
}

impl Proposer for Learner<'_> {
    fn propose(&mut self, s: &Observation) -> Result<Action> {
        if self.warm {
            Ok(random_action(self.rng))
        } else {
            select_action(&self.agent.actor, s, self.agent.hyper.noise_std, self.rng)
        }
    }

    fn rejected(&mut self, tuple: &ExperienceTuple) -> Result<()> {
        self.buffer.push(*tuple);
        self.tick()
    }
}

/// Deterministic rollout over the evaluation series from a fresh plant.
/// GiveSafe re-proposals perturb the actor with the exploration noise,
/// drawn from an evaluation-only stream seeded by `seed`.
pub fn evaluate(ctx: &RunContext, policy: Policy<'_>, seed: u64) -> Result<EpisodeMetrics> {
    let cfg = &ctx.config;
    let mut env = ctx.env(&ctx.eval)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ EVAL_SALT);
    let n = ctx.eval.len();
    let audit = cfg.harness.audit && cfg.shield.kind != ShieldKind::None;
    let (mut objective, mut cost, mut comfort_mwh) = (0.0, 0.0, 0.0);
    let (mut n_fallbacks, mut n_retries, mut n_violations) = (0, 0, 0);
    let mut trace = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    for _ in 0..n {
        let input = env.check_input();
        let mut proposer = StepProposer {
            policy,
            first_sigma: 0.0,
            retry_sigma: cfg.agent.td3.noise_std,
            input,
            rng: &mut rng,
            config: cfg,
        };
        let t0 = Instant::now();
        let out = shielded_step(
            cfg.shield.kind,
            &mut proposer,
            &mut env,
            ctx.safety_ref(),
            &cfg.plant,
            &cfg.shield.params,
        )?;
        times.push(t0.elapsed().as_secs_f64());
        if audit {
            if let Some(layer) = ctx.safety_ref() {
                if !layer.check(&out.executed.a, &input)?.feasible {
                    n_violations += 1;
                }
            }
        }
        n_fallbacks += out.fallback_used as usize;
        n_retries += out.retries;
        let rec = env.last_step().expect("a step was executed");
        objective += rec.breakdown.reward;
        cost += rec.breakdown.cost;
        comfort_mwh += rec.breakdown.comfort * 1e-6 * STEP_HOURS;
        trace.push((rec.outputs.thermal_production(), rec.thermal_demand));
    }
    Ok(EpisodeMetrics {
        objective,
        objective_per_step: objective / n as f64,
        tolerance: episode_tolerance(&trace)?,
        energy_cost: cost,
        comfort_loss: comfort_mwh,
        n_steps: n,
        n_fallbacks,
        n_retries,
        n_violations,
        step_runtime: runtime_report(&times)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentState {
    Td3 { agent: Box<Td3Agent>, buffer: ReplayBuffer },
    Random,
}

impl AgentState {
    /// Policy the agent would follow right now. Before its first update a
    /// TD3 agent acts uniformly at random, as during warm-up, so it is
    /// evaluated that way too.
    pub fn policy(&self) -> Policy<'_> {
        match self {
            AgentState::Td3 { agent, .. } if agent.n_updates() > 0 => Policy::Actor(&agent.actor),
            _ => Policy::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainStats {
    pub steps: usize,
    pub n_fallbacks: usize,
    pub n_retries: usize,
    pub n_synthetic: usize,
    /// Executed actions the safety layer rejects on re-check.
    pub n_violations: usize,
    /// Executed actions that were re-checked.
    pub n_audited: usize,
    /// Agent interactions: executed steps plus GiveSafe rejections.
    /// `train_freq` counts these.
    pub interactions: usize,
    pub n_updates: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub metrics: EpisodeMetrics,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub seed: u64,
    pub t: usize,
    pub env: EnvCursor,
    pub agent: AgentState,
    pub explore_rng: ChaCha8Rng,
    pub curve: Vec<CurvePoint>,
    pub stats: TrainStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub stats: TrainStats,
    /// Wall time per training step (shield plus plant, no learning).
    pub step_runtime: Option<RuntimeStats>,
}

impl RunResult {
    pub fn initial(&self) -> &EpisodeMetrics {
        &self.curve.first().expect("curve holds the step-0 evaluation").metrics
    }

    pub fn last(&self) -> &EpisodeMetrics {
        &self.curve.last().expect("curve holds the step-0 evaluation").metrics
    }
}

/// One seeded training run of a single benchmark cell.
pub struct Run {
    ctx: RunContext,
    state: RunState,
    env: PlantEnv,
    step_times: Vec<f64>,
}

impl Run {
    pub fn new(ctx: RunContext, seed: u64) -> Result<Self> {
        let env = ctx.env(&ctx.train)?;
        let agent = match ctx.config.agent.kind {
            AgentKind::Td3 => {
                let h = ctx.config.agent.td3.clone();
                AgentState::Td3 {
                    buffer: ReplayBuffer::new(h.buffer_size)?,
                    agent: Box::new(Td3Agent::new(h, seed)?),
                }
            }
            AgentKind::Random => AgentState::Random,
        };
        let state = RunState {
            seed,
            t: 0,
            env: env.snapshot(),
            agent,
            explore_rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x51_7cc1_b727_220a)),
            curve: Vec::new(),
            stats: TrainStats::default(),
        };
        Ok(Run {
            ctx,
            state,
            env,
            step_times: Vec::new(),
        })
    }

    pub fn resume(ctx: RunContext, state: RunState) -> Result<Self> {
        let mut env = ctx.env(&ctx.train)?;
        env.restore(state.env);
        Ok(Run {
            ctx,
            state,
            env,
            step_times: Vec::new(),
        })
    }

    pub fn state(&self) -> &RunState {
        &self.state
    }

    pub fn context(&self) -> &RunContext {
        &self.ctx
    }

    /// Evaluates the current (frozen) policy.
    pub fn evaluate(&self) -> Result<EpisodeMetrics> {
        evaluate(&self.ctx, self.state.agent.policy(), self.state.seed)
    }

    fn record_eval(&mut self) -> Result<()> {
        let t = self.state.t;
        if self.state.curve.last().is_some_and(|p| p.step == t) {
            return Ok(());
        }
        let metrics = self.evaluate()?;
        log::info!(
            "seed {} step {t}: objective {:.3}, tolerance {:.4}",
            self.state.seed,
            metrics.objective,
            metrics.tolerance
        );
        self.state.curve.push(CurvePoint { step: t, metrics });
        Ok(())
    }

    fn train_step(&mut self) -> Result<()> {
        let cfg = &self.ctx.config;
        let kind = cfg.shield.kind;
        let input = self.env.check_input();
        let st = &mut self.state;
        let warm = st.t < cfg.agent.td3.warmup_steps;
        let t0 = Instant::now();
        let out = match &mut st.agent {
            AgentState::Td3 { agent, buffer } => {
                let mut learner = Learner {
                    agent,
                    buffer,
                    rng: &mut st.explore_rng,
                    stats: &mut st.stats,
                    warm,
                };
                let out = shielded_step(
                    kind,
                    &mut learner,
                    &mut self.env,
                    self.ctx.safety.as_deref(),
                    &cfg.plant,
                    &cfg.shield.params,
                )?;
                // GiveSafe rejections went through `rejected` already
                let rest = std::iter::once(&out.executed)
                    .chain(out.synthetic.iter().filter(|_| kind != ShieldKind::GiveSafe));
                for tuple in rest {
                    learner.buffer.push(*tuple);
                }
                learner.tick()?;
                out
            }
            AgentState::Random => {
                let mut proposer = StepProposer {
                    policy: Policy::Random,
                    first_sigma: 0.0,
                    retry_sigma: 0.0,
                    input,
                    rng: &mut st.explore_rng,
                    config: cfg,
                };
                let out = shielded_step(
                    kind,
                    &mut proposer,
                    &mut self.env,
                    self.ctx.safety.as_deref(),
                    &cfg.plant,
                    &cfg.shield.params,
                )?;
                st.stats.interactions += 1 + out.retries;
                out
            }
        };
        self.step_times.push(t0.elapsed().as_secs_f64());

        if cfg.harness.audit && kind != ShieldKind::None {
            if let Some(layer) = self.ctx.safety.as_deref() {
                st.stats.n_audited += 1;
                if !layer.check(&out.executed.a, &input)?.feasible {
                    st.stats.n_violations += 1;
                }
            }
        }
        st.stats.steps += 1;
        st.stats.n_fallbacks += out.fallback_used as usize;
        st.stats.n_retries += out.retries;
        st.stats.n_synthetic += out.synthetic.len();
        st.t += 1;
        Ok(())
    }

    /// Advances to step `t_end` (capped at the budget), evaluating at every
    /// multiple of `eval_interval` and once more at the budget.
    pub fn run_to(&mut self, t_end: usize) -> Result<()> {
        let h = &self.ctx.config.harness;
        let (budget, interval) = (h.budget, h.eval_interval);
        let t_end = t_end.min(budget);
        while self.state.t < t_end {
            if self.state.t % interval == 0 {
                self.record_eval()?;
            }
            self.train_step()?;
        }
        if self.state.t == budget {
            self.record_eval()?;
        }
        self.state.env = self.env.snapshot();
        Ok(())
    }

    pub fn run(mut self) -> Result<RunResult> {
        self.run_to(self.ctx.config.harness.budget)?;
        Ok(self.result())
    }

    pub fn result(&self) -> RunResult {
        RunResult {
            seed: self.state.seed,
            curve: self.state.curve.clone(),
            stats: self.state.stats,
            step_runtime: runtime_report(&self.step_times).ok(),
        }
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut state = self.state.clone();
        state.env = self.env.snapshot();
        Ok(Checkpoint {
            config_toml: self.ctx.config.to_toml()?,
            norms: self.ctx.norms,
            safety: self.ctx.safety.as_deref().cloned(),
            state,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_toml: String,
    pub norms: Norms,
    pub safety: Option<SafetyLayer>,
    pub state: RunState,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        out.write_all(CHECKPOINT_MAGIC).map_err(|e| Error::io(path, e))?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
        bincode::serialize_into(&mut out, self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut input = BufReader::new(file);
        let mut head = [0u8; 12];
        input.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
        if &head[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!("{} is not a checkpoint", path.display())));
        }
        let version = u32::from_le_bytes([head[8], head[9], head[10], head[11]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        bincode::deserialize_from(input).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn config(&self) -> Result<Config> {
        Config::from_toml(&self.config_toml)
    }

    /// Context with the stored norms and safety layer and freshly loaded
    /// series.
    pub fn context(&self) -> Result<RunContext> {
        let config = self.config()?;
        Ok(RunContext {
            train: Arc::new(config.training_series()?),
            eval: Arc::new(config.evaluation_series()?),
            norms: self.norms,
            safety: self.safety.clone().map(Arc::new),
            config,
        })
    }

    pub fn resume(self) -> Result<Run> {
        let ctx = self.context()?;
        Run::resume(ctx, self.state)
    }

    /// Evaluates the stored policy on the configured evaluation series.
    pub fn evaluate(&self) -> Result<EpisodeMetrics> {
        self.evaluate_with_seed(self.state.seed)
    }

    /// As [`Checkpoint::evaluate`] with another evaluation seed.
    pub fn evaluate_with_seed(&self, seed: u64) -> Result<EpisodeMetrics> {
        let ctx = self.context()?;
        let policy = self.state.agent.policy();
        evaluate(&ctx, policy, seed)
    }
}
