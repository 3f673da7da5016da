//! Experiment runner: one method on one scenario and seed, or a comparison
//! across methods and seeds.
//!
//! Scores use the QoS-constrained average sum rate: a group whose final
//! allocation violates any constraint contributes nothing. The unconstrained
//! figure is reported next to it as `raw_avg_sum_rate_bps`.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{
    convergence_iteration, final_reward, greedy_rollout, run_training, Agent, DdpgAgent, NafAgent,
    TrainConfig, TrainingLog,
};
use crate::baselines::{default_grid, exhaustive_group, fixed_allocation, grpa_allocation};
use crate::env::NomaEnv;
use crate::error::{Error, Result};
use crate::nn::checkpoint::Checkpoint;
use crate::rates::{PowerAllocation, RateReport};
use crate::scenario::{AgentMode, Scenario};
use crate::seed::{SeedStreams, WEIGHT_INIT};

/// Crate version stamped into every summary.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Naf,
    Ddpg,
    Grpa,
    Exhaustive,
    Fixed,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Naf,
        Method::Ddpg,
        Method::Grpa,
        Method::Exhaustive,
        Method::Fixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Naf => "naf",
            Method::Ddpg => "ddpg",
            Method::Grpa => "grpa",
            Method::Exhaustive => "exhaustive",
            Method::Fixed => "fixed",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, Method::Naf | Method::Ddpg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Scenario file; the bundled default scenario when absent.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    pub method: Method,
    pub seed: u64,
    pub episodes: usize,
    pub steps: usize,
    /// Exhaustive-search grid resolution; per-group default when absent.
    #[serde(default)]
    pub grid: Option<usize>,
    /// Overrides the scenario's agent mode.
    #[serde(default)]
    pub mode: Option<AgentMode>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunManifest {
    pub fn new(method: Method, seed: u64) -> Self {
        let cfg = TrainConfig::default();
        RunManifest {
            scenario: None,
            method,
            seed,
            episodes: cfg.episodes,
            steps: cfg.steps_per_episode,
            grid: None,
            mode: None,
            out_dir: None,
        }
    }

    pub fn load_scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            Some(path) => Scenario::load(path),
            None => Ok(Scenario::default_scenario()),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            episodes: self.episodes,
            steps_per_episode: self.steps,
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub group_id: usize,
    pub alphas: Vec<f64>,
    pub per_user_rates_bps: Vec<f64>,
    pub sum_rate_bps: f64,
    pub feasible: bool,
}

impl GroupResult {
    fn from_report(alphas: Vec<f64>, report: &RateReport) -> Self {
        GroupResult {
            group_id: report.group_id,
            alphas,
            per_user_rates_bps: report.per_user_rates.clone(),
            sum_rate_bps: report.group_sum,
            feasible: report.feasible,
        }
    }
}

/// Outcome of one method on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub seed: u64,
    pub avg_sum_rate_bps: f64,
    pub raw_avg_sum_rate_bps: f64,
    pub feasible: bool,
    pub convergence_iter: Option<usize>,
    pub final_reward: Option<f64>,
    pub per_group: Vec<GroupResult>,
}

impl MethodResult {
    fn from_groups(method: Method, seed: u64, per_group: Vec<GroupResult>) -> Result<Self> {
        if per_group.is_empty() {
            return Err(Error::Empty("groups"));
        }
        let k = per_group.len() as f64;
        let raw = per_group.iter().map(|g| g.sum_rate_bps).sum::<f64>() / k;
        let constrained = per_group
            .iter()
            .filter(|g| g.feasible)
            .fold(0.0, |acc, g| acc + g.sum_rate_bps)
            / k;
        Ok(MethodResult {
            method,
            seed,
            avg_sum_rate_bps: constrained,
            raw_avg_sum_rate_bps: raw,
            feasible: per_group.iter().all(|g| g.feasible),
            convergence_iter: None,
            final_reward: None,
            per_group,
        })
    }
}

/// A finished run: the scored result plus training artefacts for learners.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: MethodResult,
    pub log: Option<TrainingLog>,
    pub checkpoint: Option<Checkpoint>,
}

fn evaluate_static(
    scenario: &Scenario,
    method: Method,
    seed: u64,
    allocs: Vec<PowerAllocation>,
) -> Result<MethodResult> {
    let links = scenario.group_links()?;
    let groups = links
        .iter()
        .zip(allocs)
        .map(|(link, alloc)| {
            let report = link.report(
                &alloc,
                scenario.gamma_min(),
                scenario.cross_rate_constraint(),
            );
            GroupResult::from_report(alloc.alphas, &report)
        })
        .collect();
    MethodResult::from_groups(method, seed, groups)
}

/// Allocation chosen by a non-learning method for every group.
///
/// Groups with no feasible grid point fall back to the equal split.
pub fn baseline_allocations(
    scenario: &Scenario,
    method: Method,
    grid: Option<usize>,
) -> Result<Vec<PowerAllocation>> {
    let links = scenario.group_links()?;
    links
        .iter()
        .map(|link| match method {
            Method::Grpa => grpa_allocation(link),
            Method::Fixed => fixed_allocation(link, None),
            Method::Exhaustive => {
                let g = grid.unwrap_or_else(|| default_grid(link.size()));
                let search = exhaustive_group(
                    link,
                    scenario.gamma_min(),
                    scenario.cross_rate_constraint(),
                    g,
                )?;
                match search.best {
                    Some((alphas, _)) => Ok(PowerAllocation::new(link.group_id, alphas)),
                    None => fixed_allocation(link, None),
                }
            }
            Method::Naf | Method::Ddpg => Err(Error::Domain(format!("{method} is not a baseline"))),
        })
        .collect()
}

fn train_agent<A: Agent>(
    env: &mut NomaEnv,
    mut agent: A,
    cfg: &TrainConfig,
    manifest: &RunManifest,
) -> Result<RunOutput> {
    let log = run_training(env, &mut agent, cfg, manifest.seed)?;
    let result = score_agent(
        env,
        &agent,
        manifest.method,
        manifest.seed,
        cfg.steps_per_episode,
    )?;
    let rewards = log.rewards();
    let result = MethodResult {
        convergence_iter: convergence_iteration(&rewards, cfg.steps_per_episode),
        final_reward: final_reward(&rewards),
        ..result
    };
    Ok(RunOutput {
        result,
        checkpoint: Some(agent.checkpoint()),
        log: Some(log),
    })
}

/// Scores a trained agent by one noise-free episode from the reset state.
pub fn score_agent<A: Agent + ?Sized>(
    env: &mut NomaEnv,
    agent: &A,
    method: Method,
    seed: u64,
    steps: usize,
) -> Result<MethodResult> {
    let rollout = greedy_rollout(env, agent, steps)?;
    let groups = rollout
        .alphas
        .iter()
        .zip(&rollout.reports)
        .map(|(a, r)| GroupResult::from_report(a.clone(), r))
        .collect();
    MethodResult::from_groups(method, seed, groups)
}

/// Builds the environment for `scenario`, honouring a mode override.
pub fn make_env(scenario: &Scenario, mode: Option<AgentMode>) -> Result<NomaEnv> {
    let mut env = NomaEnv::new(scenario)?;
    if let Some(mode) = mode {
        env.set_mode(mode)?;
    }
    Ok(env)
}

/// Runs the manifest's method on an already loaded scenario.
pub fn run_method(scenario: &Scenario, manifest: &RunManifest) -> Result<RunOutput> {
    let method = manifest.method;
    if !method.is_learning() {
        let allocs = baseline_allocations(scenario, method, manifest.grid)?;
        let result = evaluate_static(scenario, method, manifest.seed, allocs)?;
        return Ok(RunOutput {
            result,
            log: None,
            checkpoint: None,
        });
    }
    let cfg = manifest.train_config();
    cfg.validate()?;
    let mut env = make_env(scenario, manifest.mode)?;
    let mut rng = SeedStreams::new(manifest.seed).stream(WEIGHT_INIT);
    match method {
        Method::Naf => {
            let agent = NafAgent::new(env.state_dim(), env.action_dim(), &cfg, &mut rng);
            train_agent(&mut env, agent, &cfg, manifest)
        }
        _ => {
            let agent = DdpgAgent::new(env.state_dim(), env.action_dim(), &cfg, &mut rng);
            train_agent(&mut env, agent, &cfg, manifest)
        }
    }
}

/// Run metadata written next to the learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub scenario_name: String,
    pub scenario_hash: String,
    pub manifest: RunManifest,
    #[serde(flatten)]
    pub result: MethodResult,
}

impl RunSummary {
    pub fn new(scenario: &Scenario, manifest: &RunManifest, result: &MethodResult) -> Self {
        RunSummary {
            version: VERSION.to_string(),
            scenario_name: scenario.spec.name.clone(),
            scenario_hash: scenario.hash(),
            manifest: manifest.clone(),
            result: result.clone(),
        }
    }
}

/// Files written by [`write_run`].
pub const CURVE_FILE: &str = "learning_curve.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";

/// Writes the learning curve, checkpoint and JSON summary into `dir`.
pub fn write_run(
    dir: &Path,
    scenario: &Scenario,
    manifest: &RunManifest,
    output: &RunOutput,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    if let Some(log) = &output.log {
        std::fs::write(dir.join(CURVE_FILE), log.to_csv())?;
    }
    if let Some(ck) = &output.checkpoint {
        ck.save(dir.join(CHECKPOINT_FILE))?;
    }
    let summary = RunSummary::new(scenario, manifest, &output.result);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(dir.join(SUMMARY_FILE), json + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    pub method: Method,
    pub runs: usize,
    pub feasible_runs: usize,
    pub mean_avg_sum_rate_bps: f64,
    pub std_avg_sum_rate_bps: f64,
    pub mean_raw_avg_sum_rate_bps: f64,
    /// Over runs that converged; `None` when none did.
    pub mean_convergence_iter: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

impl MethodStats {
    pub fn from_results(method: Method, results: &[&MethodResult]) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::Empty("results"));
        }
        let rates: Vec<f64> = results.iter().map(|r| r.avg_sum_rate_bps).collect();
        let (mean, std) = mean_std(&rates);
        let raw: Vec<f64> = results.iter().map(|r| r.raw_avg_sum_rate_bps).collect();
        let conv: Vec<f64> = results
            .iter()
            .filter_map(|r| r.convergence_iter)
            .map(|c| c as f64)
            .collect();
        Ok(MethodStats {
            method,
            runs: results.len(),
            feasible_runs: results.iter().filter(|r| r.feasible).count(),
            mean_avg_sum_rate_bps: mean,
            std_avg_sum_rate_bps: std,
            mean_raw_avg_sum_rate_bps: mean_std(&raw).0,
            mean_convergence_iter: (!conv.is_empty()).then(|| mean_std(&conv).0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub version: String,
    pub scenario_hash: String,
    pub results: Vec<MethodResult>,
    pub stats: Vec<MethodStats>,
}

impl Comparison {
    pub fn stats_for(&self, method: Method) -> Option<&MethodStats> {
        self.stats.iter().find(|s| s.method == method)
    }

    pub fn results_for(&self, method: Method) -> impl Iterator<Item = &MethodResult> {
        self.results.iter().filter(move |r| r.method == method)
    }

    /// One row per (method, seed).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,seed,avg_sum_rate_bps,raw_avg_sum_rate_bps,feasible,convergence_iter,final_reward\n");
        for r in &self.results {
            let conv = r
                .convergence_iter
                .map(|c| c.to_string())
                .unwrap_or_default();
            let fin = r.final_reward.map(|f| f.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.method, r.seed, r.avg_sum_rate_bps, r.raw_avg_sum_rate_bps, r.feasible, conv, fin
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Runs every method for every seed using `base` for counts, grid and mode.
pub fn run_compare(
    scenario: &Scenario,
    methods: &[Method],
    seeds: &[u64],
    base: &RunManifest,
) -> Result<Comparison> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::Empty("methods or seeds"));
    }
    let mut results = Vec::with_capacity(methods.len() * seeds.len());
    for &method in methods {
        for &seed in seeds {
            let manifest = RunManifest {
                method,
                seed,
                ..base.clone()
            };
            results.push(run_method(scenario, &manifest)?.result);
        }
    }
    let stats = methods
        .iter()
        .map(|&m| {
            let rs: Vec<&MethodResult> = results.iter().filter(|r| r.method == m).collect();
            MethodStats::from_results(m, &rs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        version: VERSION.to_string(),
        scenario_hash: scenario.hash(),
        results,
        stats,
    })
}
