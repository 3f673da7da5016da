use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use owc_noma::agent::{DdpgAgent, NafAgent};
use owc_noma::harness::{self, Method, RunManifest};
use owc_noma::nn::checkpoint::Checkpoint;
use owc_noma::rlnc;
use owc_noma::{AgentMode, Scenario, SeedStreams};

#[derive(Parser)]
#[command(
    name = "owc-noma",
    version,
    about = "Power allocation experiments for NOMA optical wireless networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or evaluate, for baselines) one method and write its run directory.
    Train(RunArgs),
    /// Score a method; learners need `--checkpoint`.
    Evaluate(EvalArgs),
    /// Run several methods over several seeds.
    Compare(CompareArgs),
    /// Empirical RLNC decoding statistics over GF(2^8).
    RlncStats(RlncArgs),
    /// Load a scenario, resolve it and report its groups.
    ValidateScenario(ScenarioArg),
}

#[derive(Args, Clone)]
struct ScenarioArg {
    /// Scenario file (.toml or .json); the bundled default when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct Common {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Exhaustive-search grid resolution G.
    #[arg(long)]
    grid: Option<usize>,
    /// Agent mode override: joint or per-group.
    #[arg(long)]
    mode: Option<AgentMode>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "naf")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; defaults to `runs/<method>-<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "fixed")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory for summary.json and the per-step trace.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated methods.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "naf,ddpg,grpa,exhaustive,fixed"
    )]
    method: Vec<Method>,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value = "runs/compare")]
    out: PathBuf,
}

#[derive(Args)]
struct RlncArgs {
    /// Generation sizes to test.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    generation: Vec<usize>,
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    #[arg(long, default_value_t = 1_000)]
    round_trips: usize,
    #[arg(long, default_value_t = 64)]
    packet_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_scenario(arg: &ScenarioArg) -> Result<Scenario> {
    match &arg.scenario {
        Some(p) => Scenario::load(p).with_context(|| format!("loading scenario {}", p.display())),
        None => Ok(Scenario::default_scenario()),
    }
}

fn manifest(common: &Common, method: Method, seed: u64, out: Option<PathBuf>) -> RunManifest {
    RunManifest {
        scenario: common.scenario.scenario.clone(),
        method,
        seed,
        episodes: common.episodes,
        steps: common.steps,
        grid: common.grid,
        mode: common.mode,
        out_dir: out,
    }
}

fn print_result(r: &owc_noma::MethodResult) {
    println!(
        "{} seed {}: avg sum rate {:.4} Gbps (raw {:.4} Gbps), feasible {}",
        r.method,
        r.seed,
        r.avg_sum_rate_bps / 1e9,
        r.raw_avg_sum_rate_bps / 1e9,
        r.feasible
    );
    if let Some(c) = r.convergence_iter {
        println!("  converged at iteration {c}");
    }
    for g in &r.per_group {
        let alphas: Vec<String> = g.alphas.iter().map(|a| format!("{a:.3}")).collect();
        let rates: Vec<String> = g
            .per_user_rates_bps
            .iter()
            .map(|x| format!("{:.0}", x / 1e6))
            .collect();
        println!(
            "  group {}: alpha [{}] rates [{}] Mbps{}",
            g.group_id,
            alphas.join(", "),
            rates.join(", "),
            if g.feasible { "" } else { " (infeasible)" }
        );
    }
}

fn train(args: RunArgs) -> Result<()> {
    let scenario = load_scenario(&args.common.scenario)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", args.method, args.seed)));
    let m = manifest(&args.common, args.method, args.seed, Some(out.clone()));
    let output = harness::run_method(&scenario, &m)?;
    harness::write_run(&out, &scenario, &m, &output)?;
    print_result(&output.result);
    println!("wrote {}", out.display());
    Ok(())
}

fn evaluate(args: EvalArgs) -> Result<()> {
    let scenario = load_scenario(&args.common.scenario)?;
    let m = manifest(&args.common, args.method, args.seed, args.out.clone());
    let mut env = harness::make_env(&scenario, args.common.mode)?;
    env.enable_trace();
    let result = if args.method.is_learning() {
        let Some(path) = &args.checkpoint else {
            bail!("--checkpoint is required to evaluate {}", args.method);
        };
        let ck = Checkpoint::load(path)
            .with_context(|| format!("reading checkpoint {}", path.display()))?;
        let cfg = m.train_config();
        match args.method {
            Method::Naf => harness::score_agent(
                &mut env,
                &NafAgent::load(&ck, &cfg)?,
                m.method,
                m.seed,
                m.steps,
            )?,
            _ => harness::score_agent(
                &mut env,
                &DdpgAgent::load(&ck, &cfg)?,
                m.method,
                m.seed,
                m.steps,
            )?,
        }
    } else {
        harness::run_method(&scenario, &m)?.result
    };
    print_result(&result);
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let summary = harness::RunSummary::new(&scenario, &m, &result);
        std::fs::write(
            dir.join(harness::SUMMARY_FILE),
            serde_json::to_string_pretty(&summary)? + "\n",
        )?;
        if let Some(trace) = env.take_trace().filter(|t| t.lines().count() > 1) {
            std::fs::write(dir.join("trace.csv"), trace)?;
        }
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let scenario = load_scenario(&args.common.scenario)?;
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
    let base = manifest(
        &args.common,
        Method::Fixed,
        args.seed,
        Some(args.out.clone()),
    );
    let cmp = harness::run_compare(&scenario, &args.method, &seeds, &base)?;
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("comparison.csv"), cmp.to_csv())?;
    std::fs::write(args.out.join("comparison.json"), cmp.to_json()? + "\n")?;
    println!(
        "{:<11} {:>5} {:>9} {:>14} {:>10} {:>12}",
        "method", "runs", "feasible", "avg Gbps", "std", "conv iter"
    );
    for s in &cmp.stats {
        let conv = s
            .mean_convergence_iter
            .map(|c| format!("{c:.0}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<11} {:>5} {:>9} {:>14.4} {:>10.4} {:>12}",
            s.method.as_str(),
            s.runs,
            s.feasible_runs,
            s.mean_avg_sum_rate_bps / 1e9,
            s.std_avg_sum_rate_bps / 1e9,
            conv
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn rlnc_stats(args: RlncArgs) -> Result<()> {
    let streams = SeedStreams::new(args.seed);
    let mut rng = streams.stream("rlnc");
    println!(
        "{:>4} {:>12} {:>12} {:>10} {:>8} {:>11}",
        "f", "empirical", "theory", "z", "trials", "round-trip"
    );
    for &f in &args.generation {
        if f == 0 {
            bail!("generation size must be positive");
        }
        let full = rlnc::count_full_rank(f, args.trials, &mut rng);
        let p_hat = full as f64 / args.trials as f64;
        let p = rlnc::full_rank_probability(f);
        let se = (p * (1.0 - p) / args.trials as f64).sqrt();
        let mut ok = 0;
        for _ in 0..args.round_trips {
            ok += usize::from(rlnc::round_trip(f, args.packet_len, &mut rng)?);
        }
        println!(
            "{f:>4} {p_hat:>12.8} {p:>12.8} {:>10.3} {:>8} {:>6}/{}",
            (p_hat - p) / se,
            args.trials,
            ok,
            args.round_trips
        );
    }
    Ok(())
}

fn validate(arg: ScenarioArg) -> Result<()> {
    let scenario = load_scenario(&arg)?;
    print_scenario(&scenario, arg.scenario.as_deref())
}

fn print_scenario(scenario: &Scenario, path: Option<&Path>) -> Result<()> {
    let name = path
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "bundled default".into());
    println!(
        "scenario {} ({name}) hash {}",
        scenario.spec.name,
        scenario.hash()
    );
    println!(
        "{} access points, {} users, {} groups, mode {}, gamma_min {:.0} Mbps",
        scenario.aps.len(),
        scenario.users.len(),
        scenario.num_groups(),
        scenario.mode(),
        scenario.gamma_min() / 1e6
    );
    let equal = harness::run_method(scenario, &RunManifest::new(Method::Fixed, 0))?.result;
    for g in &equal.per_group {
        let rates: Vec<String> = g
            .per_user_rates_bps
            .iter()
            .map(|x| format!("{:.0}", x / 1e6))
            .collect();
        println!(
            "  group {}: {} users, equal-split rates [{}] Mbps, {}",
            g.group_id,
            g.alphas.len(),
            rates.join(", "),
            if g.feasible { "feasible" } else { "infeasible" }
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::RlncStats(a) => rlnc_stats(a),
        Command::ValidateScenario(a) => validate(a),
    }
}
