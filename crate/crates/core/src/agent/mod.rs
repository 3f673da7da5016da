//! Deep RL agents and the shared training loop.
//!
//! Both agents act through [`Agent`]; [`run_training`] runs the episodic
//! loop (reset, noisy action, environment step, replay, updates) and logs
//! one row per environment step.

pub mod ddpg;
pub mod naf;
pub mod noise;
pub mod replay;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::NomaEnv;
use crate::error::{Error, Result};
use crate::nn::adam::AdamConfig;
use crate::nn::checkpoint::Checkpoint;
use crate::rates::{PowerAllocation, RateReport};
use crate::seed::{SeedStreams, OU_NOISE, REPLAY_SAMPLING};

pub use ddpg::DdpgAgent;
pub use naf::{NafAgent, NafNetwork};
pub use noise::{noise_scale, OuConfig, OuNoise};
pub use replay::{Experience, ReplayBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Discount ς.
    pub discount: f64,
    /// Target soft-update factor τ.
    pub tau: f64,
    pub adam: AdamConfig,
    pub ou: OuConfig,
    /// Fraction of training over which the noise amplitude decays.
    pub noise_decay_fraction: f64,
    /// Amplitude kept after the decay.
    pub noise_floor: f64,
    /// Gradient updates per environment step once the buffer holds a batch.
    pub updates_per_step: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 500,
            steps_per_episode: 200,
            batch_size: 32,
            buffer_capacity: 10_000,
            discount: 0.995,
            tau: 0.001,
            adam: AdamConfig::default(),
            ou: OuConfig::default(),
            noise_decay_fraction: 0.6,
            noise_floor: 0.1,
            updates_per_step: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.steps_per_episode == 0 {
            return Err(Error::Domain("episodes and steps must be positive".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Domain(
                "buffer capacity must hold at least one batch".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.discount) || !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Domain("discount and tau must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_floor) || !(self.noise_decay_fraction > 0.0) {
            return Err(Error::Domain("noise schedule out of range".into()));
        }
        Ok(())
    }

    pub fn total_iterations(&self) -> usize {
        self.episodes * self.steps_per_episode
    }
}

/// A learning agent driven by [`run_training`].
pub trait Agent {
    fn name(&self) -> &'static str;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Deterministic action in `[-1, 1]`.
    fn policy(&self, state: &[f64]) -> Result<Vec<f64>>;
    /// One gradient update from a sampled minibatch; returns the loss to log.
    fn update(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        rng: &mut dyn rand::RngCore,
    ) -> Result<f64>;
    fn checkpoint(&self) -> Checkpoint;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub episode: usize,
    /// Mean reward over agent slots at this step.
    pub reward: f64,
    /// Mean loss of the updates made at this step, if any.
    pub loss: Option<f64>,
    pub noise_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
    /// Post-projection allocations checked during training.
    pub allocations_checked: usize,
    /// Allocations that broke the sum, box or ordering constraints.
    pub allocation_failures: usize,
    pub updates: usize,
}

impl TrainingLog {
    pub fn rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.reward).collect()
    }

    /// CSV with header `iteration,episode,reward,loss,noise_scale`; the loss
    /// cell is blank before the first update.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,episode,reward,loss,noise_scale\n");
        for r in &self.rows {
            let _ = write!(out, "{},{},{},", r.iteration, r.episode, r.reward);
            if let Some(l) = r.loss {
                let _ = write!(out, "{l}");
            }
            let _ = writeln!(out, ",{}", r.noise_scale);
        }
        out
    }
}

/// Adds noise, clips to the action box.
fn noisy_action(mean: &[f64], noise: &[f64], scale: f64) -> Vec<f64> {
    mean.iter()
        .zip(noise)
        .map(|(m, n)| (m + scale * n).clamp(-1.0, 1.0))
        .collect()
}

/// Runs `cfg.episodes` episodes of `cfg.steps_per_episode` steps.
///
/// Exploration noise and minibatch sampling draw from the `ou-noise` and
/// `replay-sampling` streams of `seed`.
pub fn run_training<A: Agent + ?Sized>(
    env: &mut NomaEnv,
    agent: &mut A,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainingLog> {
    cfg.validate()?;
    if agent.action_dim() != env.action_dim() || agent.state_dim() != env.state_dim() {
        return Err(Error::Dimension {
            expected: env.action_dim(),
            got: agent.action_dim(),
        });
    }
    let streams = SeedStreams::new(seed);
    let mut ou_rng = streams.stream(OU_NOISE);
    let mut replay_rng = streams.stream(REPLAY_SAMPLING);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let slots = env.num_agents();
    let mut noise: Vec<OuNoise> = (0..slots)
        .map(|_| OuNoise::new(cfg.ou, env.action_dim()))
        .collect();
    let total = cfg.total_iterations();
    let mut log = TrainingLog {
        rows: Vec::with_capacity(total),
        ..Default::default()
    };
    let mut iteration = 0;
    for episode in 0..cfg.episodes {
        let mut states = env.reset();
        noise.iter_mut().for_each(OuNoise::reset);
        for _ in 0..cfg.steps_per_episode {
            let scale = noise_scale(iteration, total, cfg.noise_decay_fraction, cfg.noise_floor);
            let mut actions = Vec::with_capacity(slots);
            for (s, n) in states.iter().zip(noise.iter_mut()) {
                let mean = agent.policy(s)?;
                actions.push(noisy_action(&mean, n.sample(&mut ou_rng), scale));
            }
            let outcomes = env.step(&actions)?;
            for a in env.alphas() {
                log.allocations_checked += 1;
                if !PowerAllocation::new(0, a.clone()).is_structurally_feasible() {
                    log.allocation_failures += 1;
                }
            }
            let mut reward = 0.0;
            let mut next_states = Vec::with_capacity(slots);
            for ((s, a), o) in states.into_iter().zip(actions).zip(outcomes) {
                reward += o.reward;
                buffer.push(Experience {
                    state: s,
                    action: a,
                    reward: o.reward,
                    next_state: o.state.clone(),
                });
                next_states.push(o.state);
            }
            let mut loss = None;
            if buffer.len() >= cfg.batch_size {
                let mut acc = 0.0;
                for _ in 0..cfg.updates_per_step {
                    acc += agent.update(&buffer, cfg.batch_size, &mut replay_rng)?;
                    log.updates += 1;
                }
                loss = Some(acc / cfg.updates_per_step.max(1) as f64);
            }
            log.rows.push(LogRow {
                iteration,
                episode,
                reward: reward / slots as f64,
                loss,
                noise_scale: scale,
            });
            states = next_states;
            iteration += 1;
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub alphas: Vec<Vec<f64>>,
    pub reports: Vec<RateReport>,
    /// Average group sum rate of the final allocation, bit/s.
    pub avg_sum_rate: f64,
    pub feasible: bool,
    pub rewards: Vec<f64>,
}

/// Noise-free episode from the reset state following the agent's policy.
pub fn greedy_rollout<A: Agent + ?Sized>(
    env: &mut NomaEnv,
    agent: &A,
    steps: usize,
) -> Result<Rollout> {
    let mut states = env.reset();
    let mut rewards = Vec::with_capacity(steps);
    for _ in 0..steps {
        let actions = states
            .iter()
            .map(|s| agent.policy(s))
            .collect::<Result<Vec<_>>>()?;
        let outcomes = env.step(&actions)?;
        rewards.push(outcomes.iter().map(|o| o.reward).sum::<f64>() / outcomes.len() as f64);
        states = outcomes.into_iter().map(|o| o.state).collect();
    }
    let reports = env.reports();
    let avg_sum_rate = reports.iter().map(|r| r.group_sum).sum::<f64>() / reports.len() as f64;
    Ok(Rollout {
        alphas: env.alphas().to_vec(),
        feasible: reports.iter().all(|r| r.feasible),
        reports,
        avg_sum_rate,
        rewards,
    })
}

/// Mean of the last 10% (at least one) of `rewards`.
pub fn final_reward(rewards: &[f64]) -> Option<f64> {
    if rewards.is_empty() {
        return None;
    }
    let n = (rewards.len() / 10).max(1);
    Some(rewards[rewards.len() - n..].iter().sum::<f64>() / n as f64)
}

/// First iteration at which the trailing `window`-step mean reward comes
/// within 5% of the final reward.
pub fn convergence_iteration(rewards: &[f64], window: usize) -> Option<usize> {
    let target = final_reward(rewards)?;
    let threshold = target - 0.05 * target.abs();
    let w = window.clamp(1, rewards.len());
    let mut sum: f64 = rewards[..w - 1].iter().sum();
    for t in (w - 1)..rewards.len() {
        sum += rewards[t];
        if sum / w as f64 >= threshold {
            return Some(t);
        }
        sum -= rewards[t + 1 - w];
    }
    None
}
