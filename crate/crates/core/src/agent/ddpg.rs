//! Deep deterministic policy gradient baseline.
//!
//! The actor maps states to `tanh`-bounded actions; the critic takes the
//! state and action concatenated at its input. Hidden widths mirror the NAF
//! network (a 32-wide first layer, then three layers of 16).

use rand::{Rng, RngCore};

use crate::agent::naf::OUTPUT_INIT;
use crate::agent::replay::{Experience, ReplayBuffer};
use crate::agent::{Agent, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::adam::Adam;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{Activation, DenseNet};

pub const HIDDEN: [usize; 4] = [32, 16, 16, 16];

fn sizes(input: usize, output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(&HIDDEN);
    s.push(output);
    s
}

fn concat(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + action.len());
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}

/// Critic loss `(1/I) Σ (y_n − Q(s_n, a_n))²` with
/// `y_n = r_n + ς·Q_T(s'_n, actor_T(s'_n))`, and its critic gradient.
pub fn critic_loss_and_grads(
    critic: &DenseNet,
    actor_target: &DenseNet,
    critic_target: &DenseNet,
    batch: &[&Experience],
    discount: f64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    let mut grads = critic.zero_grads();
    let mut loss = 0.0;
    let inv = 1.0 / batch.len() as f64;
    for e in batch {
        let next_action = actor_target.predict(&e.next_state)?;
        let y =
            e.reward + discount * critic_target.predict(&concat(&e.next_state, &next_action))?[0];
        let (q, cache) = critic.forward(&concat(&e.state, &e.action))?;
        let err = y - q[0];
        loss += err * err * inv;
        critic.backward(&cache, &[-2.0 * err * inv], &mut grads)?;
    }
    Ok((loss, grads))
}

/// Actor objective `J = (1/I) Σ Q(s_n, actor(s_n))` and `∂J/∂θ_actor`.
pub fn actor_objective_and_grads(
    actor: &DenseNet,
    critic: &DenseNet,
    batch: &[&Experience],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    let state_dim = actor.input_dim();
    let mut grads = actor.zero_grads();
    let mut scratch = critic.zero_grads();
    let mut objective = 0.0;
    let inv = 1.0 / batch.len() as f64;
    for e in batch {
        let (a, actor_cache) = actor.forward(&e.state)?;
        let (q, critic_cache) = critic.forward(&concat(&e.state, &a))?;
        objective += q[0] * inv;
        let dx = critic.backward(&critic_cache, &[inv], &mut scratch)?;
        actor.backward(&actor_cache, &dx[state_dim..], &mut grads)?;
    }
    Ok((objective, grads))
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: DenseNet,
    pub critic: DenseNet,
    pub actor_target: DenseNet,
    pub critic_target: DenseNet,
    actor_adam: Adam,
    critic_adam: Adam,
    pub discount: f64,
    pub tau: f64,
    /// Actor objective of the latest update.
    pub last_actor_objective: Option<f64>,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Self {
        let actor = DenseNet::init(
            &sizes(state_dim, action_dim),
            Activation::Relu,
            Activation::Tanh,
            OUTPUT_INIT,
            rng,
        );
        let critic = DenseNet::init(
            &sizes(state_dim + action_dim, 1),
            Activation::Relu,
            Activation::Linear,
            OUTPUT_INIT,
            rng,
        );
        Self::from_networks(actor, critic, cfg)
    }

    pub fn from_networks(actor: DenseNet, critic: DenseNet, cfg: &TrainConfig) -> Self {
        Self {
            actor_adam: Adam::new(cfg.adam, &[actor.num_params()]),
            critic_adam: Adam::new(cfg.adam, &[critic.num_params()]),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            discount: cfg.discount,
            tau: cfg.tau,
            last_actor_objective: None,
        }
    }

    /// Critic update, then actor update against the refreshed critic, then
    /// soft updates of both targets. Returns `(critic_loss, actor_objective)`.
    pub fn train_on(&mut self, batch: &[&Experience]) -> Result<(f64, f64)> {
        let (critic_loss, mut gc) = critic_loss_and_grads(
            &self.critic,
            &self.actor_target,
            &self.critic_target,
            batch,
            self.discount,
        )?;
        self.critic_adam
            .step(&mut [self.critic.params_mut()], &mut [&mut gc])?;
        let (objective, mut ga) = actor_objective_and_grads(&self.actor, &self.critic, batch)?;
        // Ascend J by descending −J.
        ga.iter_mut().for_each(|g| *g = -*g);
        self.actor_adam
            .step(&mut [self.actor.params_mut()], &mut [&mut ga])?;
        self.actor_target.soft_update(&self.actor, self.tau)?;
        self.critic_target.soft_update(&self.critic, self.tau)?;
        self.last_actor_objective = Some(objective);
        Ok((critic_loss, objective))
    }

    pub fn ddpg_train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let batch = buffer.sample(batch_size, rng)?;
        self.train_on(&batch)
    }

    pub fn load(ck: &Checkpoint, cfg: &TrainConfig) -> Result<Self> {
        let get = |name: &str| {
            ck.get(name)
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("missing network `{name}`")))
        };
        let actor = get("actor")?;
        let critic = get("critic")?;
        if critic.input_dim() != actor.input_dim() + actor.output_dim() || critic.output_dim() != 1
        {
            return Err(Error::Architecture("critic does not match actor".into()));
        }
        let mut agent = Self::from_networks(actor, critic, cfg);
        agent.actor_target = get("actor_target")?;
        agent.critic_target = get("critic_target")?;
        if !agent.actor_target.same_architecture(&agent.actor)
            || !agent.critic_target.same_architecture(&agent.critic)
        {
            return Err(Error::Architecture(
                "target networks differ from their sources".into(),
            ));
        }
        Ok(agent)
    }
}

impl Agent for DdpgAgent {
    fn name(&self) -> &'static str {
        "ddpg"
    }

    fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    fn policy(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.predict(state)
    }

    fn update(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        Ok(self.ddpg_train_step(buffer, batch_size, rng)?.0)
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.push("actor", &self.actor);
        ck.push("critic", &self.critic);
        ck.push("actor_target", &self.actor_target);
        ck.push("critic_target", &self.critic_target);
        ck
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(rng: &mut ChaCha8Rng, n: usize, s: usize, a: usize) -> Vec<Experience> {
        (0..n)
            .map(|_| Experience {
                state: (0..s).map(|_| rng.random_range(-1.0..1.0)).collect(),
                action: (0..a).map(|_| rng.random_range(-1.0..1.0)).collect(),
                reward: rng.random_range(-1.0..1.0),
                next_state: (0..s).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn actor_outputs_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = DdpgAgent::new(3, 2, &TrainConfig::default(), &mut rng);
        // Blow up the output layer so tanh saturates.
        let n = agent.actor.num_params();
        for w in &mut agent.actor.params_mut()[n - 40..] {
            *w *= 1e4;
        }
        for e in batch(&mut rng, 50, 3, 2) {
            assert!(agent
                .policy(&e.state)
                .unwrap()
                .iter()
                .all(|x| (-1.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn zero_discount_targets_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let agent = DdpgAgent::new(3, 2, &TrainConfig::default(), &mut rng);
        let b = batch(&mut rng, 1, 3, 2);
        let e = &b[0];
        let q = agent.critic.predict(&concat(&e.state, &e.action)).unwrap()[0];
        let (loss, _) = critic_loss_and_grads(
            &agent.critic,
            &agent.actor_target,
            &agent.critic_target,
            &[e],
            0.0,
        )
        .unwrap();
        assert!((loss - (e.reward - q).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn zero_action_gradient_leaves_actor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = TrainConfig::default();
        let mut agent = DdpgAgent::new(3, 2, &cfg, &mut rng);
        // A critic that ignores its input has zero action gradient.
        let n = agent.critic.num_params();
        agent.critic.params_mut()[..n - 1].fill(0.0);
        agent.critic_target.copy_from(&agent.critic).unwrap();
        let actor_before = agent.actor.clone();
        let b = batch(&mut rng, 4, 3, 2);
        let refs: Vec<&Experience> = b.iter().collect();
        let (_, ga) = actor_objective_and_grads(&agent.actor, &agent.critic, &refs).unwrap();
        assert!(ga.iter().all(|&g| g == 0.0));
        agent.train_on(&refs).unwrap();
        // Only the critic's output bias may have moved; its hidden weights are
        // still zero, so the actor saw no gradient.
        assert_eq!(agent.actor.params(), actor_before.params());
    }

    fn check_fd(f: impl Fn(&DenseNet) -> f64, net: &DenseNet, analytic: &[f64]) {
        let h = 1e-6;
        for i in 0..net.num_params() {
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let up = f(&p);
            p.params_mut()[i] -= 2.0 * h;
            let down = f(&p);
            let fd = (up - down) / (2.0 * h);
            let a = analytic[i];
            assert!(
                (fd - a).abs() <= 1e-6 + 1e-4 * fd.abs().max(a.abs()),
                "param {i}: fd {fd} analytic {a}"
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let agent = DdpgAgent::new(3, 2, &TrainConfig::default(), &mut rng);
        // Perturb targets so they differ from the trained nets.
        let other = DdpgAgent::new(3, 2, &TrainConfig::default(), &mut rng);
        let b = batch(&mut rng, 4, 3, 2);
        let refs: Vec<&Experience> = b.iter().collect();
        let (_, gc) =
            critic_loss_and_grads(&agent.critic, &other.actor, &other.critic, &refs, 0.9).unwrap();
        check_fd(
            |c| {
                critic_loss_and_grads(c, &other.actor, &other.critic, &refs, 0.9)
                    .unwrap()
                    .0
            },
            &agent.critic,
            &gc,
        );
        let (_, ga) = actor_objective_and_grads(&agent.actor, &agent.critic, &refs).unwrap();
        check_fd(
            |a| {
                actor_objective_and_grads(a, &agent.critic, &refs)
                    .unwrap()
                    .0
            },
            &agent.actor,
            &ga,
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let agent = DdpgAgent::new(
            3,
            2,
            &TrainConfig::default(),
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        let text = agent.checkpoint().to_text();
        let back = DdpgAgent::load(
            &Checkpoint::from_text(&text).unwrap(),
            &TrainConfig::default(),
        )
        .unwrap();
        assert_eq!(back.checkpoint().to_text(), text);
    }
}
