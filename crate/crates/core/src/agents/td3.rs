use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{HiddenActivation, Mlp, OutputActivation};
use super::replay::ReplayBuffer;
use crate::error::{Error, Result};
use crate::shield::ExperienceTuple;
use crate::space::{Action, Observation, ACTION_DIM, OBS_DIM};

const CRITIC_IN: usize = OBS_DIM + ACTION_DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Safefallback,
    Givesafe,
    Unsafe,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Safefallback => "safefallback",
            Preset::Givesafe => "givesafe",
            Preset::Unsafe => "unsafe",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "safefallback" => Ok(Preset::Safefallback),
            "givesafe" => Ok(Preset::Givesafe),
            "unsafe" => Ok(Preset::Unsafe),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseType {
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3Hyper {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    /// Agent interactions between training rounds.
    pub train_freq: usize,
    /// Gradient updates per training round.
    pub gradient_steps: usize,
    pub noise_type: NoiseType,
    /// Exploration noise σ.
    pub noise_std: f64,
    pub policy_delay: usize,
    pub target_noise_clip: f64,
    /// Std of the smoothing noise added to target actions.
    pub target_policy_noise: f64,
    pub polyak: f64,
    /// Uniform-random steps before learning starts.
    pub warmup_steps: usize,
    pub hidden: Vec<usize>,
    /// Hidden-layer activation; ReLU only in the givesafe preset.
    pub activation: HiddenActivation,
}

impl Default for Td3Hyper {
    fn default() -> Self {
        Td3Hyper::preset(Preset::Safefallback)
    }
}

impl Td3Hyper {
    pub fn preset(p: Preset) -> Self {
        let (gamma, learning_rate, batch_size, buffer_size, train_freq, gradient_steps, noise_std) = match p {
            Preset::Safefallback => (0.7, 0.000583, 16, 1_000_000, 1, 1, 0.183),
            Preset::Givesafe => (0.95, 0.000119, 16, 100_000, 10, 10, 0.791),
            Preset::Unsafe => (0.9, 0.0003833, 100, 100_000, 2000, 2000, 0.329),
        };
        let activation = match p {
            Preset::Givesafe => HiddenActivation::Relu,
            _ => HiddenActivation::Tanh,
        };
        Td3Hyper {
            gamma,
            learning_rate,
            batch_size,
            buffer_size,
            train_freq,
            gradient_steps,
            noise_type: NoiseType::Normal,
            noise_std,
            policy_delay: 2,
            target_noise_clip: 0.5,
            target_policy_noise: 0.2,
            polyak: 0.995,
            warmup_steps: 1000,
            hidden: vec![64, 64],
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("agent: {m}")));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma outside (0, 1)");
        }
        if !(self.polyak > 0.0 && self.polyak <= 1.0) {
            return bad("polyak outside (0, 1]");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_size {
            return bad("need 0 < batch_size <= buffer_size");
        }
        if self.train_freq == 0 || self.policy_delay == 0 {
            return bad("train_freq and policy_delay must be positive");
        }
        if !(self.noise_std >= 0.0) || !(self.target_noise_clip >= 0.0) || !(self.target_policy_noise >= 0.0) {
            return bad("noise parameters must be non-negative");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        Ok(())
    }

    fn actor_sizes(&self) -> Vec<usize> {
        let mut s = vec![OBS_DIM];
        s.extend(&self.hidden);
        s.push(ACTION_DIM);
        s
    }

    fn critic_sizes(&self) -> Vec<usize> {
        let mut s = vec![CRITIC_IN];
        s.extend(&self.hidden);
        s.push(1);
        s
    }
}

/// `clip(μ(s) + ε, −1, 1)` with `ε ~ N(0, σ²)` per component.
pub fn select_action(actor: &Mlp, s: &Observation, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Action> {
    let mu = actor.forward(s.as_slice())?;
    let mut a = [0.0; ACTION_DIM];
    let noise = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("exploration noise: {e}")))?)
    } else {
        None
    };
    for (k, v) in a.iter_mut().enumerate() {
        let eps = noise.map_or(0.0, |n| n.sample(rng));
        *v = (mu[k] + eps).clamp(-1.0, 1.0);
    }
    Ok(Action(a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Sum of both critics' mean squared errors.
    pub critic_loss: f64,
    /// `−mean Q1(s, μ(s))`, when the actor was updated.
    pub actor_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Td3Agent {
    pub hyper: Td3Hyper,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub critic1_target: Mlp,
    pub critic2_target: Mlp,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
    n_updates: u64,
    rng: ChaCha8Rng,
}

fn critic_inputs<'a>(states: impl Iterator<Item = &'a Observation>, actions: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(actions.len() / ACTION_DIM * CRITIC_IN);
    for (s, a) in states.zip(actions.chunks(ACTION_DIM)) {
        x.extend_from_slice(s.as_slice());
        x.extend_from_slice(a);
    }
    x
}

impl Td3Agent {
    pub fn new(hyper: Td3Hyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hyper.activation;
        let actor = Mlp::new(&hyper.actor_sizes(), OutputActivation::Tanh, &mut rng)?.with_hidden(h);
        let critic1 = Mlp::new(&hyper.critic_sizes(), OutputActivation::Linear, &mut rng)?.with_hidden(h);
        let critic2 = Mlp::new(&hyper.critic_sizes(), OutputActivation::Linear, &mut rng)?.with_hidden(h);
        let lr = hyper.learning_rate;
        Ok(Td3Agent {
            actor_opt: Adam::new(actor.n_params(), lr),
            critic1_opt: Adam::new(critic1.n_params(), lr),
            critic2_opt: Adam::new(critic2.n_params(), lr),
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            actor,
            critic1,
            critic2,
            hyper,
            n_updates: 0,
            rng,
        })
    }

    pub fn n_updates(&self) -> u64 {
        self.n_updates
    }

    /// Deterministic policy action.
    pub fn act(&self, s: &Observation) -> Result<Action> {
        let mu = self.actor.forward(s.as_slice())?;
        let mut a = [0.0; ACTION_DIM];
        for (v, m) in a.iter_mut().zip(mu) {
            *v = m.clamp(-1.0, 1.0);
        }
        Ok(Action(a))
    }

    /// Bootstrapped targets `y = r + γ(1−d)·min(Q1', Q2')(s', a')` with
    /// `a' = clip(μ'(s') + clip(ε, −c, c), −1, 1)` and caller-supplied `ε`.
    pub fn compute_targets(&self, batch: &[&ExperienceTuple], noise: &[[f64; ACTION_DIM]]) -> Result<Vec<f64>> {
        if noise.len() != batch.len() {
            return Err(Error::Dimension {
                expected: batch.len(),
                got: noise.len(),
            });
        }
        let n = batch.len();
        let s_next: Vec<f64> = batch.iter().flat_map(|t| t.s_next.0).collect();
        let mu = self.actor_target.forward_batch(&s_next, n)?;
        let c = self.hyper.target_noise_clip;
        let a_next: Vec<f64> = mu
            .output()
            .iter()
            .zip(noise.iter().flatten())
            .map(|(m, e)| (m + e.clamp(-c, c)).clamp(-1.0, 1.0))
            .collect();
        let x = critic_inputs(batch.iter().map(|t| &t.s_next), &a_next);
        let q1 = self.critic1_target.forward_batch(&x, n)?;
        let q2 = self.critic2_target.forward_batch(&x, n)?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let not_done = if t.done { 0.0 } else { 1.0 };
                t.r + self.hyper.gamma * not_done * q1.output()[k].min(q2.output()[k])
            })
            .collect())
    }

    /// One gradient update on a uniform sample from `buffer`.
    pub fn update(&mut self, buffer: &ReplayBuffer) -> Result<UpdateStats> {
        let batch: Vec<ExperienceTuple> = buffer
            .sample(self.hyper.batch_size, &mut self.rng)?
            .into_iter()
            .copied()
            .collect();
        let noise = self.target_noise(batch.len())?;
        self.update_on_batch(&batch, &noise)
    }

    fn target_noise(&mut self, n: usize) -> Result<Vec<[f64; ACTION_DIM]>> {
        let sigma = self.hyper.target_policy_noise;
        if sigma == 0.0 {
            return Ok(vec![[0.0; ACTION_DIM]; n]);
        }
        let dist = Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("target noise: {e}")))?;
        Ok((0..n)
            .map(|_| std::array::from_fn(|_| dist.sample(&mut self.rng)))
            .collect())
    }

    pub fn update_on_batch(&mut self, batch: &[ExperienceTuple], noise: &[[f64; ACTION_DIM]]) -> Result<UpdateStats> {
        let n = batch.len();
        if n == 0 {
            return Err(Error::Empty("update batch"));
        }
        let refs: Vec<&ExperienceTuple> = batch.iter().collect();
        let y = self.compute_targets(&refs, noise)?;
        let actions: Vec<f64> = batch.iter().flat_map(|t| t.a.0).collect();
        let x = critic_inputs(batch.iter().map(|t| &t.s), &actions);

        let mut critic_loss = 0.0;
        for (critic, opt) in [
            (&mut self.critic1, &mut self.critic1_opt),
            (&mut self.critic2, &mut self.critic2_opt),
        ] {
            let cache = critic.forward_batch(&x, n)?;
            let mut d_out = vec![0.0; n];
            for k in 0..n {
                let e = cache.output()[k] - y[k];
                critic_loss += e * e / n as f64;
                d_out[k] = 2.0 * e / n as f64;
            }
            let mut g = vec![0.0; critic.n_params()];
            critic.backward(&cache, &d_out, &mut g)?;
            opt.step(critic.params_mut(), &g)?;
        }
        if !critic_loss.is_finite() {
            return Err(Error::NonFinite("critic loss".into()));
        }

        self.n_updates += 1;
        let mut actor_loss = None;
        if self.n_updates % self.hyper.policy_delay as u64 == 0 {
            let s: Vec<f64> = batch.iter().flat_map(|t| t.s.0).collect();
            let a_cache = self.actor.forward_batch(&s, n)?;
            let xq = critic_inputs(batch.iter().map(|t| &t.s), a_cache.output());
            let q_cache = self.critic1.forward_batch(&xq, n)?;
            actor_loss = Some(-q_cache.output().iter().sum::<f64>() / n as f64);
            let d_q = vec![-1.0 / n as f64; n];
            let mut scratch = vec![0.0; self.critic1.n_params()];
            let d_x = self.critic1.backward(&q_cache, &d_q, &mut scratch)?;
            let d_a: Vec<f64> = d_x
                .chunks(CRITIC_IN)
                .flat_map(|row| row[OBS_DIM..].iter().copied())
                .collect();
            let mut g = vec![0.0; self.actor.n_params()];
            self.actor.backward(&a_cache, &d_a, &mut g)?;
            self.actor_opt.step(self.actor.params_mut(), &g)?;

            let rho = self.hyper.polyak;
            self.actor_target.polyak_from(&self.actor, rho);
            self.critic1_target.polyak_from(&self.critic1, rho);
            self.critic2_target.polyak_from(&self.critic2, rho);
        }
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
        })
    }
}
