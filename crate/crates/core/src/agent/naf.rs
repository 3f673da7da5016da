//! Normalized advantage function agent.
//!
//! `Q(s, a) = V(s) − ½ (a − μ(s))ᵀ P(s) (a − μ(s))` with `P = L Lᵀ`. A shared
//! trunk feeds three heads producing `V`, `μ` and the lower triangle of `L`,
//! whose diagonal is exponentiated so `P` is positive definite.

use rand::{Rng, RngCore};

use crate::agent::replay::{Experience, ReplayBuffer};
use crate::agent::{Agent, TrainConfig};
use crate::error::{Error, Result};
use crate::nn::adam::Adam;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{Activation, DenseNet, ForwardCache};

/// Trunk width and head hidden layers.
pub const TRUNK_WIDTH: usize = 32;
pub const V_HIDDEN: [usize; 3] = [16, 16, 16];
pub const MU_HIDDEN: [usize; 3] = [16, 16, 16];
pub const L_HIDDEN: [usize; 3] = [32, 32, 32];
/// Output-layer initialization range.
pub const OUTPUT_INIT: f64 = 3e-3;
/// Raw diagonal entries are clamped before exponentiation.
const LOG_DIAG_LIMIT: f64 = 15.0;

pub fn tril_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn tril_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

fn head_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct NafNetwork {
    pub trunk: DenseNet,
    pub v: DenseNet,
    pub mu: DenseNet,
    pub l: DenseNet,
    action_dim: usize,
}

/// Intermediate values of one NAF forward pass.
#[derive(Debug, Clone)]
pub struct NafForward {
    trunk: ForwardCache,
    v_cache: ForwardCache,
    mu_cache: ForwardCache,
    l_cache: ForwardCache,
    pub value: f64,
    pub mu: Vec<f64>,
    /// Dense row-major `n × n` lower-triangular `L`.
    pub l: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValue {
    pub q: f64,
    pub value: f64,
    pub advantage: f64,
}

/// Gradient buffers matching the four sub-networks.
#[derive(Debug, Clone, PartialEq)]
pub struct NafGrads {
    pub trunk: Vec<f64>,
    pub v: Vec<f64>,
    pub mu: Vec<f64>,
    pub l: Vec<f64>,
}

impl NafGrads {
    pub fn flatten(&self) -> Vec<f64> {
        [&self.trunk[..], &self.v, &self.mu, &self.l].concat()
    }
}

impl NafNetwork {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, rng: &mut R) -> Self {
        let trunk = DenseNet::init(
            &[state_dim, TRUNK_WIDTH],
            Activation::Relu,
            Activation::Relu,
            0.0,
            rng,
        );
        // The single trunk layer is hidden; give it He scaling too.
        let trunk = {
            let mut t = trunk;
            let bound = (6.0 / state_dim as f64).sqrt();
            let n = state_dim * TRUNK_WIDTH;
            for w in &mut t.params_mut()[..n] {
                *w = rng.random_range(-bound..=bound);
            }
            t
        };
        let v = DenseNet::init(
            &head_sizes(TRUNK_WIDTH, &V_HIDDEN, 1),
            Activation::Relu,
            Activation::Linear,
            OUTPUT_INIT,
            rng,
        );
        let mu = DenseNet::init(
            &head_sizes(TRUNK_WIDTH, &MU_HIDDEN, action_dim),
            Activation::Relu,
            Activation::Linear,
            OUTPUT_INIT,
            rng,
        );
        let l = DenseNet::init(
            &head_sizes(TRUNK_WIDTH, &L_HIDDEN, tril_len(action_dim)),
            Activation::Relu,
            Activation::Linear,
            OUTPUT_INIT,
            rng,
        );
        Self {
            trunk,
            v,
            mu,
            l,
            action_dim,
        }
    }

    /// Assembles a network from parts; checks the heads fit the trunk.
    pub fn from_parts(trunk: DenseNet, v: DenseNet, mu: DenseNet, l: DenseNet) -> Result<Self> {
        let h = trunk.output_dim();
        if v.input_dim() != h || mu.input_dim() != h || l.input_dim() != h {
            return Err(Error::Architecture(
                "heads must take the trunk output".into(),
            ));
        }
        if v.output_dim() != 1 {
            return Err(Error::Architecture("V head must be scalar".into()));
        }
        let action_dim = mu.output_dim();
        if l.output_dim() != tril_len(action_dim) {
            return Err(Error::Architecture(format!(
                "L head has {} outputs, expected {}",
                l.output_dim(),
                tril_len(action_dim)
            )));
        }
        Ok(Self {
            trunk,
            v,
            mu,
            l,
            action_dim,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn zero_grads(&self) -> NafGrads {
        NafGrads {
            trunk: self.trunk.zero_grads(),
            v: self.v.zero_grads(),
            mu: self.mu.zero_grads(),
            l: self.l.zero_grads(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.trunk.num_params() + self.v.num_params() + self.mu.num_params() + self.l.num_params()
    }

    pub fn forward(&self, state: &[f64]) -> Result<NafForward> {
        let (h, trunk) = self.trunk.forward(state)?;
        let (v, v_cache) = self.v.forward(&h)?;
        let (mu, mu_cache) = self.mu.forward(&h)?;
        let (raw, l_cache) = self.l.forward(&h)?;
        let n = self.action_dim;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                l[i * n + j] = raw[tril_index(i, j)];
            }
            l[i * n + i] = raw[tril_index(i, i)]
                .clamp(-LOG_DIAG_LIMIT, LOG_DIAG_LIMIT)
                .exp();
        }
        Ok(NafForward {
            trunk,
            v_cache,
            mu_cache,
            l_cache,
            value: v[0],
            mu,
            l,
        })
    }

    /// `V(s)` through the trunk and V head only.
    pub fn value(&self, state: &[f64]) -> Result<f64> {
        let h = self.trunk.predict(state)?;
        Ok(self.v.predict(&h)?[0])
    }

    pub fn mu(&self, state: &[f64]) -> Result<Vec<f64>> {
        let h = self.trunk.predict(state)?;
        self.mu.predict(&h)
    }

    /// `P = L Lᵀ`, row-major.
    pub fn p_matrix(&self, state: &[f64]) -> Result<Vec<f64>> {
        let f = self.forward(state)?;
        let n = self.action_dim;
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                p[i * n + j] = (0..=i.min(j))
                    .map(|k| f.l[i * n + k] * f.l[j * n + k])
                    .sum();
            }
        }
        Ok(p)
    }

    pub fn q_value(&self, state: &[f64], action: &[f64]) -> Result<QValue> {
        let f = self.forward(state)?;
        self.q_from(&f, action)
    }

    /// Q, V and A for a cached forward pass.
    pub fn q_from(&self, f: &NafForward, action: &[f64]) -> Result<QValue> {
        let n = self.action_dim;
        if action.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: action.len(),
            });
        }
        let d: Vec<f64> = action.iter().zip(&f.mu).map(|(a, m)| a - m).collect();
        let u = lt_times(&f.l, &d, n);
        let advantage = -0.5 * u.iter().map(|x| x * x).sum::<f64>();
        Ok(QValue {
            q: f.value + advantage,
            value: f.value,
            advantage,
        })
    }

    /// Accumulates `scale · ∂Q(s, a)/∂θ` into `grads`.
    pub fn backward_q(
        &self,
        f: &NafForward,
        action: &[f64],
        scale: f64,
        grads: &mut NafGrads,
    ) -> Result<()> {
        let n = self.action_dim;
        let d: Vec<f64> = action.iter().zip(&f.mu).map(|(a, m)| a - m).collect();
        let u = lt_times(&f.l, &d, n);
        // ∂A/∂μ = L u = P d.
        let mut dmu = vec![0.0; n];
        for i in 0..n {
            dmu[i] = scale * (0..=i).map(|j| f.l[i * n + j] * u[j]).sum::<f64>();
        }
        // ∂A/∂L_ij = −u_j d_i, times L_ii on the exponentiated diagonal.
        let mut dl = vec![0.0; tril_len(n)];
        for i in 0..n {
            for j in 0..i {
                dl[tril_index(i, j)] = -scale * u[j] * d[i];
            }
            let raw = f.l_cache.output()[tril_index(i, i)];
            let inside = raw.abs() < LOG_DIAG_LIMIT;
            dl[tril_index(i, i)] = if inside {
                -scale * u[i] * d[i] * f.l[i * n + i]
            } else {
                0.0
            };
        }
        let mut dh = self.v.backward(&f.v_cache, &[scale], &mut grads.v)?;
        let dh_mu = self.mu.backward(&f.mu_cache, &dmu, &mut grads.mu)?;
        let dh_l = self.l.backward(&f.l_cache, &dl, &mut grads.l)?;
        for ((a, b), c) in dh.iter_mut().zip(&dh_mu).zip(&dh_l) {
            *a += b + c;
        }
        self.trunk.backward(&f.trunk, &dh, &mut grads.trunk)?;
        Ok(())
    }

    /// Soft update of all four sub-networks toward `eval`.
    pub fn soft_update(&mut self, eval: &NafNetwork, tau: f64) -> Result<()> {
        self.trunk.soft_update(&eval.trunk, tau)?;
        self.v.soft_update(&eval.v, tau)?;
        self.mu.soft_update(&eval.mu, tau)?;
        self.l.soft_update(&eval.l, tau)
    }

    pub fn push_to(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.push(&format!("{prefix}trunk"), &self.trunk);
        ck.push(&format!("{prefix}v"), &self.v);
        ck.push(&format!("{prefix}mu"), &self.mu);
        ck.push(&format!("{prefix}l"), &self.l);
    }

    pub fn from_checkpoint(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let get = |name: &str| {
            ck.get(&format!("{prefix}{name}"))
                .cloned()
                .ok_or_else(|| Error::Checkpoint(format!("missing network `{prefix}{name}`")))
        };
        Self::from_parts(get("trunk")?, get("v")?, get("mu")?, get("l")?)
    }
}

/// `Lᵀ d` for dense row-major lower-triangular `L`.
fn lt_times(l: &[f64], d: &[f64], n: usize) -> Vec<f64> {
    let mut u = vec![0.0; n];
    for i in 0..n {
        let di = d[i];
        if di == 0.0 {
            continue;
        }
        let row = &l[i * n..i * n + i + 1];
        for (uj, &lij) in u.iter_mut().zip(row) {
            *uj += lij * di;
        }
    }
    u
}

/// NAF loss `(1/I) Σ (z_n − Q(s_n, a_n))²` with `z_n = r_n + ς·V_T(s'_n)`,
/// and its gradient with respect to the evaluation network.
pub fn naf_loss_and_grads(
    eval: &NafNetwork,
    target: &NafNetwork,
    batch: &[&Experience],
    discount: f64,
) -> Result<(f64, NafGrads)> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    let mut grads = eval.zero_grads();
    let mut loss = 0.0;
    let inv = 1.0 / batch.len() as f64;
    for e in batch {
        let z = e.reward + discount * target.value(&e.next_state)?;
        let f = eval.forward(&e.state)?;
        let q = eval.q_from(&f, &e.action)?.q;
        let err = z - q;
        loss += err * err * inv;
        eval.backward_q(&f, &e.action, -2.0 * err * inv, &mut grads)?;
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone)]
pub struct NafAgent {
    pub eval: NafNetwork,
    pub target: NafNetwork,
    adam: Adam,
    pub discount: f64,
    pub tau: f64,
}

impl NafAgent {
    /// Fresh agent; the target starts as a copy of the evaluation network.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Self {
        let eval = NafNetwork::new(state_dim, action_dim, rng);
        Self::from_network(eval, cfg)
    }

    pub fn from_network(eval: NafNetwork, cfg: &TrainConfig) -> Self {
        let sizes = [
            eval.trunk.num_params(),
            eval.v.num_params(),
            eval.mu.num_params(),
            eval.l.num_params(),
        ];
        Self {
            target: eval.clone(),
            eval,
            adam: Adam::new(cfg.adam, &sizes),
            discount: cfg.discount,
            tau: cfg.tau,
        }
    }

    /// `clip(μ(s) + noise, −1, 1)`.
    pub fn select_action(&self, state: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        let mu = self.eval.mu(state)?;
        if noise.len() != mu.len() {
            return Err(Error::Dimension {
                expected: mu.len(),
                got: noise.len(),
            });
        }
        Ok(mu
            .iter()
            .zip(noise)
            .map(|(m, n)| (m + n).clamp(-1.0, 1.0))
            .collect())
    }

    /// One minibatch update of the evaluation network followed by a soft
    /// target update. Returns the pre-update loss.
    pub fn train_on(&mut self, batch: &[&Experience]) -> Result<f64> {
        let (loss, mut g) = naf_loss_and_grads(&self.eval, &self.target, batch, self.discount)?;
        let e = &mut self.eval;
        self.adam.step(
            &mut [
                e.trunk.params_mut(),
                e.v.params_mut(),
                e.mu.params_mut(),
                e.l.params_mut(),
            ],
            &mut [&mut g.trunk, &mut g.v, &mut g.mu, &mut g.l],
        )?;
        self.target.soft_update(&self.eval, self.tau)?;
        Ok(loss)
    }

    /// Samples `batch_size` experiences and trains on them.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let batch = buffer.sample(batch_size, rng)?;
        self.train_on(&batch)
    }

    pub fn load(ck: &Checkpoint, cfg: &TrainConfig) -> Result<Self> {
        let eval = NafNetwork::from_checkpoint(ck, "eval.")?;
        let target = NafNetwork::from_checkpoint(ck, "target.")?;
        let mut agent = Self::from_network(eval, cfg);
        agent.target = target;
        Ok(agent)
    }
}

impl Agent for NafAgent {
    fn name(&self) -> &'static str {
        "naf"
    }

    fn state_dim(&self) -> usize {
        self.eval.state_dim()
    }

    fn action_dim(&self) -> usize {
        self.eval.action_dim()
    }

    fn policy(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .eval
            .mu(state)?
            .into_iter()
            .map(|m| m.clamp(-1.0, 1.0))
            .collect())
    }

    fn update(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        rng: &mut dyn RngCore,
    ) -> Result<f64> {
        self.train_step(buffer, batch_size, rng)
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        self.eval.push_to(&mut ck, "eval.");
        self.target.push_to(&mut ck, "target.");
        ck
    }
}


#[cfg(test)]
mod learning_tests {
    use super::*;
    use crate::nn::adam::AdamConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn learns_quadratic_bandit() {
        let target = [0.6, -0.3];
        let mut cfg = TrainConfig {
            discount: 0.0,
            ..Default::default()
        };
        cfg.adam = AdamConfig {
            learning_rate: 1e-3,
            ..cfg.adam
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut agent = NafAgent::new(2, 2, &cfg, &mut rng);
        let mut buffer = ReplayBuffer::new(10_000);
        for _ in 0..6000 {
            let s = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = -a
                .iter()
                .zip(&target)
                .map(|(x, t)| (x - t) * (x - t))
                .sum::<f64>();
            buffer.push(Experience {
                state: s.to_vec(),
                action: a,
                reward: r,
                next_state: s.to_vec(),
            });
            if buffer.len() >= 32 {
                agent.train_step(&buffer, 32, &mut rng).unwrap();
            }
        }
        let mu = agent.eval.mu(&[0.1, 0.2]).unwrap();
        assert!(
            (mu[0] - target[0]).abs() < 0.1 && (mu[1] - target[1]).abs() < 0.1,
            "{mu:?}"
        );
    }
}
