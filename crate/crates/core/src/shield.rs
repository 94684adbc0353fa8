//! Action shields wrapping any agent/environment pair: the rule-based safe
//! fallback policy, SafeFallback (substitute and penalize) and GiveSafe
//! (reject and re-query without stepping the plant).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{encode_unit, PlantConfig};
use crate::safety::{CheckInput, ConstraintReport, SafetyLayer};
use crate::space::{Action, Observation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperienceTuple {
    pub s: Observation,
    pub a: Action,
    pub r: f64,
    pub s_next: Observation,
    pub done: bool,
    /// Set on tuples for actions the plant never executed.
    pub synthetic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShieldKind {
    None,
    SafeFallback,
    GiveSafe,
}

impl ShieldKind {
    pub const ALL: [ShieldKind; 3] = [ShieldKind::None, ShieldKind::SafeFallback, ShieldKind::GiveSafe];

    pub fn name(self) -> &'static str {
        match self {
            ShieldKind::None => "none",
            ShieldKind::SafeFallback => "safe_fallback",
            ShieldKind::GiveSafe => "give_safe",
        }
    }
}

impl std::fmt::Display for ShieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ShieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "unsafe" => Ok(ShieldKind::None),
            "safe_fallback" => Ok(ShieldKind::SafeFallback),
            "give_safe" => Ok(ShieldKind::GiveSafe),
            other => Err(Error::Config(format!("unknown shield `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShieldConfig {
    /// Subtracted from the executed reward on SafeFallback's synthetic tuple.
    pub cost_fallback: f64,
    /// GiveSafe rejection reward is `-cost_givesafe_base`, minus a further
    /// `cost_givesafe_chp_bonus` when the CHP component exceeds
    /// `chp_bonus_threshold`.
    pub cost_givesafe_base: f64,
    pub cost_givesafe_chp_bonus: f64,
    pub chp_bonus_threshold: f64,
    pub max_retries: usize,
}

impl Default for ShieldConfig {
    fn default() -> Self {
        ShieldConfig {
            cost_fallback: 1.0,
            cost_givesafe_base: 50.0,
            cost_givesafe_chp_bonus: 10.0,
            chp_bonus_threshold: 0.5,
            max_retries: 1000,
        }
    }
}

impl ShieldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_retries < 1 {
            return Err(Error::Config("shield.max_retries must be at least 1".into()));
        }
        let v = [
            self.cost_fallback,
            self.cost_givesafe_base,
            self.cost_givesafe_chp_bonus,
            self.chp_bonus_threshold,
        ];
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("shield costs must be finite".into()));
        }
        Ok(())
    }

    /// Reward handed to the agent for one rejected action under GiveSafe.
    pub fn give_safe_reward(&self, action: &Action) -> f64 {
        let bonus = if action.chp() > self.chp_bonus_threshold {
            self.cost_givesafe_chp_bonus
        } else {
            0.0
        };
        -(self.cost_givesafe_base + bonus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FallbackAction {
    pub action: Action,
    /// Demand exceeded boiler plus CHP capacity.
    pub saturated: bool,
}

/// Priority rule: CHP covers demand inside its band, the boiler covers
/// demand below it and any remainder above it. Heat pump off, storage idle.
pub fn fallback_policy(thermal_demand: f64, config: &PlantConfig) -> Result<FallbackAction> {
    if !thermal_demand.is_finite() {
        return Err(Error::NonFinite("fallback demand".into()));
    }
    if thermal_demand < 0.0 {
        return Err(Error::Config(format!("negative thermal demand {thermal_demand}")));
    }
    let (chp_min, chp_max) = config.chp.thermal_range();
    let boiler_max = config.boiler.p_nom_th;
    let (mut q_chp, mut q_boiler) = if thermal_demand < chp_min {
        (0.0, thermal_demand)
    } else if thermal_demand < chp_max {
        (thermal_demand, 0.0)
    } else {
        let boiler_min = config.boiler.thermal_range().0;
        let rest = thermal_demand - chp_max;
        if rest < boiler_min && thermal_demand - boiler_min >= chp_min {
            (thermal_demand - boiler_min, boiler_min)
        } else {
            (chp_max, rest)
        }
    };
    let saturated = q_boiler > boiler_max;
    if saturated {
        log::warn!("thermal demand {thermal_demand} MW exceeds boiler and CHP capacity");
        q_chp = chp_max;
        q_boiler = boiler_max;
    }
    let th = config.off_threshold;
    let mut a = [0.0; 5];
    a[Action::BOILER] = encode_unit(q_boiler, &config.boiler, th);
    a[Action::HEAT_PUMP] = -1.0;
    a[Action::CHP] = encode_unit(q_chp, &config.chp, th);
    Ok(FallbackAction {
        action: Action(a),
        saturated,
    })
}

/// Source of actions behind a shield.
pub trait Proposer {
    fn propose(&mut self, s: &Observation) -> Result<Action>;

    /// Called by GiveSafe after a rejection. Defaults to a fresh proposal.
    fn repropose(&mut self, s: &Observation) -> Result<Action> {
        self.propose(s)
    }

    /// Sees each GiveSafe rejection tuple before the next proposal.
    fn rejected(&mut self, _tuple: &ExperienceTuple) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvStep {
    pub s_next: Observation,
    pub r: f64,
    pub done: bool,
}

/// Environment as seen by a shield.
pub trait ShieldEnv {
    fn observe(&self) -> Observation;
    fn check_input(&self) -> CheckInput;
    fn execute(&mut self, action: &Action) -> Result<EnvStep>;
}

pub trait ConstraintCheck {
    fn check(&self, action: &Action, input: &CheckInput) -> Result<ConstraintReport>;
}

impl ConstraintCheck for SafetyLayer {
    fn check(&self, action: &Action, input: &CheckInput) -> Result<ConstraintReport> {
        SafetyLayer::check(self, action, input)
    }
}

/// Everything one shielded environment step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ShieldOutcome {
    pub executed: ExperienceTuple,
    pub synthetic: Vec<ExperienceTuple>,
    pub fallback_used: bool,
    pub retries: usize,
}

impl ShieldOutcome {
    /// Executed tuple first, then synthetic ones in emission order.
    pub fn tuples(&self) -> impl Iterator<Item = &ExperienceTuple> {
        std::iter::once(&self.executed).chain(self.synthetic.iter())
    }
}

fn executed_tuple(s: Observation, a: Action, step: EnvStep) -> ExperienceTuple {
    ExperienceTuple {
        s,
        a,
        r: step.r,
        s_next: step.s_next,
        done: step.done,
        synthetic: false,
    }
}

/// No shield: the proposed action goes straight to the plant.
pub fn unshielded_step(agent: &mut impl Proposer, env: &mut impl ShieldEnv) -> Result<ShieldOutcome> {
    let s = env.observe();
    let a = agent.propose(&s)?;
    let step = env.execute(&a)?;
    Ok(ShieldOutcome {
        executed: executed_tuple(s, a, step),
        synthetic: Vec::new(),
        fallback_used: false,
        retries: 0,
    })
}

/// SafeFallback: an infeasible proposal is replaced by the fallback action.
/// The executed transition is emitted, plus a penalized copy carrying the
/// rejected action whenever it differs bitwise from the executed one.
pub fn safe_fallback_step<F>(
    agent: &mut impl Proposer,
    env: &mut impl ShieldEnv,
    check: &impl ConstraintCheck,
    mut fallback: F,
    cfg: &ShieldConfig,
) -> Result<ShieldOutcome>
where
    F: FnMut(&CheckInput) -> Result<Action>,
{
    let s = env.observe();
    let input = env.check_input();
    let a = agent.propose(&s)?;
    let report = check.check(&a, &input)?;
    let a_safe = if report.feasible {
        a
    } else {
        let fb = fallback(&input)?;
        let fb_report = check.check(&fb, &input)?;
        if !fb_report.feasible {
            return Err(Error::SafetyBreach {
                residual: fb_report.residual,
                q_tol: fb_report.q_tol,
            });
        }
        fb
    };
    let step = env.execute(&a_safe)?;
    let executed = executed_tuple(s, a_safe, step);
    let mut synthetic = Vec::new();
    if !a_safe.bit_eq(&a) {
        synthetic.push(ExperienceTuple {
            a,
            r: step.r - cfg.cost_fallback,
            synthetic: true,
            ..executed
        });
    }
    Ok(ShieldOutcome {
        executed,
        synthetic,
        fallback_used: !report.feasible,
        retries: 0,
    })
}

/// GiveSafe: each infeasible proposal yields a synthetic `(s, a, r_c, s,
/// false)` tuple and a new proposal; the plant steps once, on the first
/// feasible action.
pub fn give_safe_step(
    agent: &mut impl Proposer,
    env: &mut impl ShieldEnv,
    check: &impl ConstraintCheck,
    cfg: &ShieldConfig,
) -> Result<ShieldOutcome> {
    let s = env.observe();
    let input = env.check_input();
    let mut a = agent.propose(&s)?;
    let mut synthetic = Vec::new();
    while !check.check(&a, &input)?.feasible {
        if synthetic.len() >= cfg.max_retries {
            return Err(Error::RetriesExhausted {
                retries: synthetic.len(),
            });
        }
        let tuple = ExperienceTuple {
            s,
            a,
            r: cfg.give_safe_reward(&a),
            s_next: s,
            done: false,
            synthetic: true,
        };
        agent.rejected(&tuple)?;
        synthetic.push(tuple);
        a = agent.repropose(&s)?;
    }
    let step = env.execute(&a)?;
    let retries = synthetic.len();
    Ok(ShieldOutcome {
        executed: executed_tuple(s, a, step),
        synthetic,
        fallback_used: false,
        retries,
    })
}

/// Dispatches one step through the configured shield. The fallback rule
/// reads only the thermal demand.
pub fn shielded_step(
    kind: ShieldKind,
    agent: &mut impl Proposer,
    env: &mut impl ShieldEnv,
    check: Option<&SafetyLayer>,
    plant: &PlantConfig,
    cfg: &ShieldConfig,
) -> Result<ShieldOutcome> {
    let need = || Error::Config(format!("shield {kind} requires a safety layer"));
    match kind {
        ShieldKind::None => unshielded_step(agent, env),
        ShieldKind::SafeFallback => {
            let layer = check.ok_or_else(need)?;
            safe_fallback_step(
                agent,
                env,
                layer,
                |i: &CheckInput| Ok(fallback_policy(i.thermal_demand, plant)?.action),
                cfg,
            )
        }
        ShieldKind::GiveSafe => give_safe_step(agent, env, check.ok_or_else(need)?, cfg),
    }
}
