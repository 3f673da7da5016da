//! Power-allocation MDP.
//!
//! The state of a group lists, per user in order, the effective gain
//! normalized by the scenario's peak LOS gain, the current power fraction
//! and the noise variance relative to the configured `σ_t²`. An action is a
//! vector in `[-1, 1]`; the allocation moves by `δ·action` and is projected
//! back onto the ordered simplex. The reward is the average sum rate (scaled)
//! when every minimum-rate constraint holds, and `−λ·violation` otherwise.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::projection::project_alphas;
use crate::rates::{GroupLink, PowerAllocation, RateReport};
use crate::scenario::{AgentMode, RewardConfig, Scenario};

/// Features per user in a group state.
pub const FEATURES_PER_USER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig {
    /// Step size δ applied to actions.
    pub step_size: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { step_size: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward: f64,
    pub feasible: bool,
    /// Average sum rate over the groups involved, bit/s.
    pub sum_rate: f64,
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct NomaEnv {
    links: Vec<GroupLink>,
    alphas: Vec<Vec<f64>>,
    gamma_min: f64,
    include_cross: bool,
    reward: RewardConfig,
    mode: AgentMode,
    config: EnvConfig,
    max_gain: f64,
    noise_ratio: f64,
    steps: u64,
    trace: Option<String>,
}

impl NomaEnv {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_config(scenario, EnvConfig::default())
    }

    pub fn with_config(scenario: &Scenario, config: EnvConfig) -> Result<Self> {
        if !(config.step_size > 0.0 && config.step_size.is_finite()) {
            return Err(Error::Domain("step size must be positive".into()));
        }
        let links = scenario.group_links()?;
        if links.is_empty() {
            return Err(Error::Empty("groups"));
        }
        let mode = scenario.mode();
        if mode == AgentMode::PerGroup && links.iter().any(|l| l.size() != links[0].size()) {
            return Err(Error::Scenario(
                "per-group mode needs equal group sizes".into(),
            ));
        }
        let max_gain = scenario.max_los_gain();
        if !(max_gain > 0.0) {
            return Err(Error::Scenario("scenario has zero peak gain".into()));
        }
        let mut env = Self {
            alphas: links
                .iter()
                .map(|l| vec![1.0 / l.size() as f64; l.size()])
                .collect(),
            links,
            gamma_min: scenario.gamma_min(),
            include_cross: scenario.cross_rate_constraint(),
            reward: scenario.reward,
            mode,
            config,
            max_gain,
            // The simulated noise is the configured noise, so the ratio is 1.
            noise_ratio: 1.0,
            steps: 0,
            trace: None,
        };
        env.reset();
        Ok(env)
    }

    pub fn mode(&self) -> AgentMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: AgentMode) -> Result<()> {
        if mode == AgentMode::PerGroup
            && self.links.iter().any(|l| l.size() != self.links[0].size())
        {
            return Err(Error::Scenario(
                "per-group mode needs equal group sizes".into(),
            ));
        }
        self.mode = mode;
        Ok(())
    }

    pub fn links(&self) -> &[GroupLink] {
        &self.links
    }

    pub fn num_groups(&self) -> usize {
        self.links.len()
    }

    pub fn gamma_min(&self) -> f64 {
        self.gamma_min
    }

    pub fn include_cross(&self) -> bool {
        self.include_cross
    }

    pub fn reward_config(&self) -> RewardConfig {
        self.reward
    }

    pub fn config(&self) -> EnvConfig {
        self.config
    }

    pub fn alphas(&self) -> &[Vec<f64>] {
        &self.alphas
    }

    /// Action dimension of the agent for the current mode.
    pub fn action_dim(&self) -> usize {
        match self.mode {
            AgentMode::Joint => self.links.iter().map(GroupLink::size).sum(),
            AgentMode::PerGroup => self.links[0].size(),
        }
    }

    pub fn state_dim(&self) -> usize {
        FEATURES_PER_USER * self.action_dim()
    }

    /// Agent slots per step: one in joint mode, one per group otherwise.
    pub fn num_agents(&self) -> usize {
        match self.mode {
            AgentMode::Joint => 1,
            AgentMode::PerGroup => self.links.len(),
        }
    }

    /// Restores the equal split in every group. The environment is
    /// deterministic, so no seed is involved.
    pub fn reset(&mut self) -> Vec<Vec<f64>> {
        for (a, l) in self.alphas.iter_mut().zip(&self.links) {
            a.fill(1.0 / l.size() as f64);
        }
        self.observe()
    }

    /// Current observation per agent slot.
    pub fn observe(&self) -> Vec<Vec<f64>> {
        match self.mode {
            AgentMode::Joint => {
                let mut s = Vec::with_capacity(self.state_dim());
                for k in 0..self.links.len() {
                    self.push_group_state(k, &mut s);
                }
                vec![s]
            }
            AgentMode::PerGroup => (0..self.links.len())
                .map(|k| {
                    let mut s = Vec::with_capacity(self.state_dim());
                    self.push_group_state(k, &mut s);
                    s
                })
                .collect(),
        }
    }

    fn push_group_state(&self, k: usize, out: &mut Vec<f64>) {
        for (g, a) in self.links[k].gains.iter().zip(&self.alphas[k]) {
            out.push(g / self.max_gain);
            out.push(*a);
            out.push(self.noise_ratio);
        }
    }

    /// Applies one action per agent slot and returns the outcome per slot.
    pub fn step(&mut self, actions: &[Vec<f64>]) -> Result<Vec<StepOutcome>> {
        if actions.len() != self.num_agents() {
            return Err(Error::Dimension {
                expected: self.num_agents(),
                got: actions.len(),
            });
        }
        let dim = self.action_dim();
        for a in actions {
            if a.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: a.len(),
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("action"));
            }
        }
        match self.mode {
            AgentMode::Joint => {
                let mut offset = 0;
                for k in 0..self.links.len() {
                    let m = self.links[k].size();
                    self.apply(k, &actions[0][offset..offset + m])?;
                    offset += m;
                }
            }
            AgentMode::PerGroup => {
                for (k, a) in actions.iter().enumerate() {
                    self.apply(k, a)?;
                }
            }
        }
        self.steps += 1;
        let states = self.observe();
        let reports = self.reports();
        let outcomes: Vec<StepOutcome> = match self.mode {
            AgentMode::Joint => {
                let (reward, feasible, sum_rate, violation) = self.score(&reports);
                vec![StepOutcome {
                    state: states.into_iter().next().unwrap(),
                    reward,
                    feasible,
                    sum_rate,
                    violation,
                }]
            }
            AgentMode::PerGroup => states
                .into_iter()
                .zip(&reports)
                .map(|(state, r)| {
                    let (reward, feasible, sum_rate, violation) =
                        self.score(std::slice::from_ref(r));
                    StepOutcome {
                        state,
                        reward,
                        feasible,
                        sum_rate,
                        violation,
                    }
                })
                .collect(),
        };
        if let Some(trace) = self.trace.as_mut() {
            for (k, (a, r)) in self.alphas.iter().zip(&reports).enumerate() {
                let _ = write!(trace, "{},{}", self.steps, self.links[k].group_id);
                for x in a {
                    let _ = write!(trace, ",{x:.6}");
                }
                for x in &r.per_user_rates {
                    let _ = write!(trace, ",{x:.1}");
                }
                let _ = writeln!(trace, ",{}", r.feasible);
            }
        }
        Ok(outcomes)
    }

    fn apply(&mut self, k: usize, action: &[f64]) -> Result<()> {
        let delta = self.config.step_size;
        let raw: Vec<f64> = self.alphas[k]
            .iter()
            .zip(action)
            .map(|(a, x)| a + delta * x.clamp(-1.0, 1.0))
            .collect();
        self.alphas[k] = project_alphas(&raw)?;
        Ok(())
    }

    /// `(reward, feasible, average sum rate, violation)` over `reports`.
    fn score(&self, reports: &[RateReport]) -> (f64, bool, f64, f64) {
        let sum_rate = reports.iter().map(|r| r.group_sum).sum::<f64>() / reports.len() as f64;
        let violation: f64 = reports
            .iter()
            .map(|r| r.violations.iter().map(|v| v.magnitude).sum::<f64>())
            .sum();
        let feasible = reports.iter().all(|r| r.feasible);
        let reward = if feasible {
            sum_rate / self.reward.rate_scale_bps
        } else {
            -self.reward.penalty_weight * violation
        };
        (reward, feasible, sum_rate, violation)
    }

    /// Rate reports of the current allocation.
    pub fn reports(&self) -> Vec<RateReport> {
        self.links
            .iter()
            .zip(&self.alphas)
            .map(|(l, a)| {
                l.report(
                    &PowerAllocation::new(l.group_id, a.clone()),
                    self.gamma_min,
                    self.include_cross,
                )
            })
            .collect()
    }

    /// Sum of relative rate shortfalls plus any structural gaps of the
    /// current allocation.
    pub fn violation_measure(&self) -> f64 {
        self.reports()
            .iter()
            .flat_map(|r| r.violations.iter())
            .map(|v| v.magnitude)
            .sum()
    }

    /// Replaces the allocation of every group, projecting each onto the
    /// feasible set.
    pub fn set_alphas(&mut self, alphas: &[Vec<f64>]) -> Result<()> {
        if alphas.len() != self.links.len() {
            return Err(Error::Dimension {
                expected: self.links.len(),
                got: alphas.len(),
            });
        }
        for (k, a) in alphas.iter().enumerate() {
            if a.len() != self.links[k].size() {
                return Err(Error::Dimension {
                    expected: self.links[k].size(),
                    got: a.len(),
                });
            }
            self.alphas[k] = project_alphas(a)?;
        }
        Ok(())
    }

    /// Starts recording one CSV row per group and step.
    pub fn enable_trace(&mut self) {
        let m = self.links.iter().map(GroupLink::size).max().unwrap_or(0);
        let mut header = String::from("step,group");
        for i in 1..=m {
            let _ = write!(header, ",alpha_{i}");
        }
        for i in 1..=m {
            let _ = write!(header, ",rate_{i}");
        }
        header.push_str(",feasible\n");
        self.trace = Some(header);
    }

    pub fn take_trace(&mut self) -> Option<String> {
        self.trace.take()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> NomaEnv {
        NomaEnv::new(&Scenario::small_scenario()).unwrap()
    }

    #[test]
    fn reset_gives_equal_split() {
        let mut env = small();
        let s = env.reset();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), env.state_dim());
        assert_eq!(env.state_dim(), 12);
        for a in env.alphas() {
            assert_eq!(a, &vec![0.5, 0.5]);
        }
        assert_eq!(s[0][1], 0.5);
        assert_eq!(s[0][2], 1.0);
    }

    #[test]
    fn step_moves_then_projects() {
        let mut env = small();
        // (+1, -1) breaks the ordering and projects back to the equal split.
        env.step(&[vec![1.0, -1.0, 1.0, -1.0]]).unwrap();
        for a in env.alphas() {
            assert!((a[0] - 0.5).abs() < 1e-12 && (a[1] - 0.5).abs() < 1e-12);
        }
        // (-1, +1) keeps the ordering.
        env.step(&[vec![-1.0, 1.0, -1.0, 1.0]]).unwrap();
        for a in env.alphas() {
            assert!((a[0] - 0.45).abs() < 1e-12 && (a[1] - 0.55).abs() < 1e-12);
        }
    }

    #[test]
    fn reward_sign_follows_feasibility() {
        let mut env = small();
        let out = env.step(&[vec![0.0; 4]]).unwrap();
        let o = &out[0];
        if o.feasible {
            assert!(o.reward > 0.0);
            assert!((o.reward - o.sum_rate / 1e9).abs() < 1e-12);
        } else {
            assert!(o.reward < 0.0);
            assert!((o.reward + o.violation).abs() < 1e-12);
        }
        assert!((env.violation_measure() - o.violation).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_actions() {
        let mut env = small();
        assert!(env.step(&[vec![0.0; 3]]).is_err());
        assert!(env.step(&[vec![f64::NAN, 0.0, 0.0, 0.0]]).is_err());
        assert!(env.step(&[]).is_err());
    }

    #[test]
    fn per_group_mode_splits_slots() {
        let mut env = small();
        env.set_mode(AgentMode::PerGroup).unwrap();
        assert_eq!(env.action_dim(), 2);
        assert_eq!(env.num_agents(), 2);
        let out = env.step(&[vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(env.alphas()[1], vec![0.5, 0.5]);
    }

    #[test]
    fn trace_has_row_per_group_and_step() {
        let mut env = small();
        env.enable_trace();
        env.step(&[vec![0.0; 4]]).unwrap();
        env.step(&[vec![0.0; 4]]).unwrap();
        let t = env.take_trace().unwrap();
        assert_eq!(t.lines().count(), 1 + 2 * 2);
        assert!(t.starts_with("step,group,alpha_1,alpha_2,rate_1,rate_2,feasible"));
    }
}
