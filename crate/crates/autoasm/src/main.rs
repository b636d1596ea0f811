//! The `autoasm` command line: generate task pools, train the networks,
//! search for programs, run the benchmark suite, and inspect artifacts.
//!
//! Exit codes are a stable contract: 0 success, 1 synthesis failure,
//! 2 usage error, 3 unreadable or corrupt input, 4 missing artifact.

use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use autoasm::formats::checkpoint::{self, CheckpointError, MAGIC};
use autoasm::formats::config::{apply_train_config, parse_temperature_list};
use autoasm::formats::pool::{
    self, describe_pool, load_pool, parse_state, save_pool, save_suites, PoolFileError,
    SUITE_HEADER_TAG,
};
use autoasm::run::{run_bench, run_training, synthesize_traced, BenchRequest, NetDims};
use autoasm_core::bench::{build_suites, suite_space, Baseline, BenchBudget, L2Heuristic, SUITE_PAIRS};
use autoasm_core::machine::SpaceConfig;
use autoasm_core::mcts::{SearchConfig, StateValue};
use autoasm_core::seeds::{rng_for, streams};
use autoasm_core::taskgen::{build_pool, IoPair, PilotConfig, Task};
use autoasm_core::trainer::TrainConfig;

#[derive(Parser)]
#[command(name = "autoasm", version, about = "Neural program synthesis for a reduced x86")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a pool of random synthesis tasks.
    GenPool(GenPoolArgs),
    /// Pretrain on gold programs, then train policy and value networks.
    Train(TrainArgs),
    /// Search for a program matching the given input/output pairs.
    Search(SearchArgs),
    /// Run baselines over the benchmark suite and write reports.
    Bench(BenchArgs),
    /// Summarize a pool, suite, or checkpoint file.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct GenPoolArgs {
    /// Number of distinct tasks.
    #[arg(long)]
    n: usize,
    /// Instructions per pilot program.
    #[arg(long, default_value_t = 3)]
    lines: usize,
    /// Live registers, 1 through 4.
    #[arg(long, default_value_t = 4)]
    regs: usize,
    /// Add the four stack cells to the space.
    #[arg(long)]
    ram: bool,
    /// Input/output pairs per task.
    #[arg(long, default_value_t = 2)]
    pairs: usize,
    /// Falls back to AUTOASM_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Smallest initial cell value.
    #[arg(long, default_value_t = 0)]
    lo: i32,
    /// Largest initial cell value.
    #[arg(long, default_value_t = 9)]
    hi: i32,
    /// Pool file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Task pool to train on.
    #[arg(long)]
    pool: PathBuf,
    /// Directory for checkpoints and metrics.csv.
    #[arg(long, default_value = "train-out")]
    out: PathBuf,
    /// `key = value` file applied before any flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Required: pass the flag or set AUTOASM_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Tasks sampled per epoch.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Comma-separated sampling temperatures.
    #[arg(long)]
    temperatures: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Imitation weight at epoch 0.
    #[arg(long)]
    lambda0: Option<f64>,
    /// Per-epoch decay of the imitation weight.
    #[arg(long)]
    lambda_decay: Option<f64>,
    /// Episode length cap.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    policy_lr: Option<f64>,
    #[arg(long)]
    value_lr: Option<f64>,
    /// Weight each step by its own reward instead of the episode return.
    #[arg(long)]
    per_step_returns: bool,
    #[arg(long)]
    pretrain_epochs: Option<usize>,
    #[arg(long)]
    pretrain_batch: Option<usize>,
    #[arg(long)]
    pretrain_lr: Option<f64>,
    /// Fraction of tasks withheld from pretraining for accuracy reporting.
    #[arg(long)]
    holdout_fraction: Option<f64>,
    /// Pretraining stops early at this hold-out accuracy.
    #[arg(long)]
    pretrain_target_accuracy: Option<f64>,
    #[arg(long)]
    plateau_window: Option<usize>,
    #[arg(long)]
    plateau_min_gain: Option<f64>,
    /// Stop after pretraining; write only the imitation checkpoint.
    #[arg(long)]
    pretrain_only: bool,
    /// Value-embedding width.
    #[arg(long, default_value_t = 16)]
    d_emb: usize,
    /// Hidden width of every layer.
    #[arg(long, default_value_t = 128)]
    hidden: usize,
}

#[derive(Args)]
struct SearchArgs {
    /// Policy checkpoint.
    #[arg(long)]
    policy: PathBuf,
    /// Value checkpoint; a distance heuristic fills in when absent.
    #[arg(long)]
    value: Option<PathBuf>,
    /// Input state, repeatable; registers comma-separated, stack cells
    /// after a `:` (e.g. `1,2,0,0` or `1,2:0,0,0,0`).
    #[arg(long = "input")]
    inputs: Vec<String>,
    /// Target state, repeatable; pairs with --input by position.
    #[arg(long = "output")]
    outputs: Vec<String>,
    /// Falls back to AUTOASM_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Exploration weight in the tree policy.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Longest program the search may commit to.
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    /// Greedy rollout length per evaluation.
    #[arg(long, default_value_t = 5)]
    rollout_limit: usize,
    /// Simulations per committed instruction.
    #[arg(long, default_value_t = 200)]
    sims: usize,
    /// Children a node may grow before it counts as fully expanded.
    #[arg(long, default_value_t = 8)]
    expansion_width: usize,
    /// Dump the explored tree to stderr after each committed step.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated subset of imitation, reinforce, mcts-prior,
    /// autoassemblet.
    #[arg(long, default_value = "imitation,reinforce,mcts-prior,autoassemblet")]
    baselines: String,
    /// Policy checkpoint for the sampling and prior-tree baselines.
    #[arg(long)]
    policy: PathBuf,
    /// Separately trained policy for reinforce and autoassemblet; defaults
    /// to --policy.
    #[arg(long)]
    rl_policy: Option<PathBuf>,
    /// Value checkpoint; the autoassemblet baseline requires it.
    #[arg(long)]
    value: Option<PathBuf>,
    /// Required: pass the flag or set AUTOASM_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Seed the suite generator separately from the solvers.
    #[arg(long, default_value_t = 0)]
    suite_seed: u64,
    /// Sampled programs per task for the sampling baselines.
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// Simulations per committed instruction for the tree baselines.
    #[arg(long, default_value_t = 200)]
    sims: usize,
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    /// Worker threads; results are identical at any count.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory for report.txt and report.csv.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Also write the generated suite as a records file.
    #[arg(long)]
    dump_suite: Option<PathBuf>,
}

const EXIT_SYNTHESIS_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BAD_INPUT: u8 = 3;
const EXIT_MISSING_ARTIFACT: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code_for(&err)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenPool(args) => cmd_gen_pool(args),
        Command::Train(args) => cmd_train(args),
        Command::Search(args) => cmd_search(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Inspect { path } => cmd_inspect(&path),
    }
}

/// Missing files are missing artifacts; everything else that errors out is
/// unreadable input or a failed write.
fn exit_code_for(err: &anyhow::Error) -> ExitCode {
    let for_kind = |kind: io::ErrorKind| {
        if kind == io::ErrorKind::NotFound {
            ExitCode::from(EXIT_MISSING_ARTIFACT)
        } else {
            ExitCode::from(EXIT_BAD_INPUT)
        }
    };
    for cause in err.chain() {
        if let Some(io_err) = cause.downcast_ref::<io::Error>() {
            return for_kind(io_err.kind());
        }
        if let Some(CheckpointError::Io(io_err)) = cause.downcast_ref::<CheckpointError>() {
            return for_kind(io_err.kind());
        }
        if let Some(PoolFileError::Io(io_err)) = cause.downcast_ref::<PoolFileError>() {
            return for_kind(io_err.kind());
        }
    }
    ExitCode::from(EXIT_BAD_INPUT)
}

fn usage(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_USAGE)
}

fn missing(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_MISSING_ARTIFACT)
}

/// Flag value, then AUTOASM_SEED, then `None`. A set but unparsable
/// environment seed is an error rather than a silent default.
fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("AUTOASM_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("AUTOASM_SEED is not a valid seed: `{text}`")),
        Err(_) => Ok(None),
    }
}

fn cmd_gen_pool(args: GenPoolArgs) -> Result<ExitCode> {
    if !(1..=4).contains(&args.regs) {
        return Ok(usage(format!("--regs must be 1..=4, got {}", args.regs)));
    }
    if args.n == 0 || args.lines == 0 || args.pairs == 0 {
        return Ok(usage("--n, --lines, and --pairs must be at least 1"));
    }
    if args.lo > args.hi {
        return Ok(usage(format!("--lo {} exceeds --hi {}", args.lo, args.hi)));
    }
    let seed = match resolve_seed(args.seed) {
        Ok(seed) => seed.unwrap_or(0),
        Err(m) => return Ok(usage(m)),
    };
    let config = PilotConfig {
        program_length: args.lines,
        space: SpaceConfig::new(args.regs, args.ram),
        pairs_per_task: args.pairs,
        init_value_range: (args.lo, args.hi),
    };
    let build = build_pool(args.n, &config, &mut rng_for(seed, streams::POOL))
        .map_err(|e| anyhow::anyhow!("pool generation failed: {e}"))?;
    save_pool(&build.pool, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "pool: {} tasks -> {} ({} duplicates and {} degenerate programs dropped)",
        build.pool.len(),
        args.out.display(),
        build.duplicate_drops,
        build.degenerate_drops
    );
    Ok(ExitCode::SUCCESS)
}

fn train_config_from(args: &TrainArgs) -> Result<Result<TrainConfig, ExitCode>> {
    let mut config = TrainConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        config = apply_train_config(&text, config)?;
    }
    if let Some(text) = &args.temperatures {
        match parse_temperature_list(text) {
            Ok(temps) => config.temperatures = temps,
            Err(m) => return Ok(Err(usage(m))),
        }
    }
    macro_rules! override_field {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { config.$field = v; })*
        };
    }
    override_field!(
        epochs, batch_size, gamma, lambda0, lambda_decay, max_steps, policy_lr, value_lr,
        pretrain_epochs, pretrain_batch, pretrain_lr, holdout_fraction,
        pretrain_target_accuracy, plateau_window, plateau_min_gain
    );
    if args.per_step_returns {
        config.per_step_returns = true;
    }
    match resolve_seed(args.seed) {
        Ok(Some(seed)) => config.seed = seed,
        Ok(None) => return Ok(Err(usage("train needs --seed or AUTOASM_SEED"))),
        Err(m) => return Ok(Err(usage(m))),
    }
    if let Err(m) = check_train_config(&config) {
        return Ok(Err(usage(m)));
    }
    Ok(Ok(config))
}

fn check_train_config(config: &TrainConfig) -> Result<(), String> {
    if config.temperatures.is_empty() || config.temperatures.iter().any(|&t| t <= 0.0) {
        return Err("temperatures must be a non-empty list of positive reals".into());
    }
    if config.batch_size == 0 || config.max_steps == 0 {
        return Err("--batch-size and --max-steps must be at least 1".into());
    }
    if !(config.gamma > 0.0 && config.gamma <= 1.0) {
        return Err(format!("--gamma must be in (0,1], got {}", config.gamma));
    }
    if !(config.lambda_decay > 0.0 && config.lambda_decay <= 1.0) {
        return Err(format!("--lambda-decay must be in (0,1], got {}", config.lambda_decay));
    }
    if !(0.0..1.0).contains(&config.holdout_fraction) {
        return Err(format!(
            "--holdout-fraction must be in [0,1), got {}",
            config.holdout_fraction
        ));
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let config = match train_config_from(&args)? {
        Ok(config) => config,
        Err(code) => return Ok(code),
    };
    if args.d_emb == 0 || args.hidden == 0 {
        return Ok(usage("--d-emb and --hidden must be at least 1"));
    }
    let mut pool = load_pool(&args.pool)
        .with_context(|| format!("loading pool {}", args.pool.display()))?;
    let dims = NetDims { d_emb: args.d_emb, hidden: args.hidden };
    let arts = run_training(&mut pool, &config, dims, &args.out, args.pretrain_only)?;
    println!("imitation policy: {}", arts.imitation_policy.display());
    if let (Some(policy), Some(value), Some(metrics)) = (&arts.policy, &arts.value, &arts.metrics) {
        println!("policy: {}", policy.display());
        println!("value: {}", value.display());
        println!("metrics: {}", metrics.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_states(texts: &[String], space: SpaceConfig) -> Result<Vec<autoasm_core::machine::MachineState>, String> {
    texts
        .iter()
        .map(|t| parse_state(t, space).map_err(|m| format!("state `{t}`: {m}")))
        .collect()
}

fn cmd_search(args: SearchArgs) -> Result<ExitCode> {
    let policy = checkpoint::load_policy(&args.policy)
        .with_context(|| format!("loading policy {}", args.policy.display()))?;
    let space = policy.config().space;
    if args.inputs.is_empty() {
        return Ok(usage("pass at least one --input/--output pair"));
    }
    if args.inputs.len() != args.outputs.len() {
        return Ok(usage(format!(
            "{} --input states but {} --output states",
            args.inputs.len(),
            args.outputs.len()
        )));
    }
    let (inputs, outputs) = match (parse_states(&args.inputs, space), parse_states(&args.outputs, space)) {
        (Ok(i), Ok(o)) => (i, o),
        (Err(m), _) | (_, Err(m)) => return Ok(usage(m)),
    };
    let value_net = match &args.value {
        Some(path) => {
            let net = checkpoint::load_value(path)
                .with_context(|| format!("loading value {}", path.display()))?;
            if net.config().space != space {
                return Ok(usage("policy and value checkpoints disagree on the space"));
            }
            Some(net)
        }
        None => None,
    };
    let value: &dyn StateValue = match &value_net {
        Some(net) => net,
        None => &L2Heuristic,
    };
    let seed = match resolve_seed(args.seed) {
        Ok(seed) => seed.unwrap_or(0),
        Err(m) => return Ok(usage(m)),
    };
    let config = SearchConfig {
        epsilon: args.epsilon,
        gamma: args.gamma,
        max_depth: args.max_depth,
        rollout_limit: args.rollout_limit,
        simulations_per_move: args.sims,
        expansion_width: args.expansion_width,
        seed,
    };
    if let Err(m) = check_search_config(&config) {
        return Ok(usage(m));
    }

    let task = Task {
        id: 0,
        pairs: inputs
            .into_iter()
            .zip(outputs)
            .map(|(input, output)| IoPair { input, output })
            .collect(),
        gold: None,
    };
    let trace = args.trace;
    let result = synthesize_traced(&task, &policy, value, space, config, |step, instr, records| {
        if trace {
            eprintln!("step {step}: committed {instr}");
            for r in records {
                eprintln!(
                    "  depth {:>2}  {:<18}  N={:<6} mean={:.3}",
                    r.depth,
                    r.action.to_string(),
                    r.visits,
                    r.mean_value
                );
            }
        }
    });
    match result {
        Ok(found) => {
            print!("{}", found.program);
            println!("OK ({} simulator calls)", found.sim_calls);
            Ok(ExitCode::SUCCESS)
        }
        Err(failure) => {
            eprintln!("{failure} ({} simulator calls)", failure.sim_calls);
            println!("FAIL");
            Ok(ExitCode::from(EXIT_SYNTHESIS_FAILURE))
        }
    }
}

fn check_search_config(config: &SearchConfig) -> Result<(), String> {
    if config.epsilon < 0.0 {
        return Err(format!("--epsilon must be non-negative, got {}", config.epsilon));
    }
    if !(config.gamma > 0.0 && config.gamma <= 1.0) {
        return Err(format!("--gamma must be in (0,1], got {}", config.gamma));
    }
    if config.max_depth == 0
        || config.rollout_limit == 0
        || config.simulations_per_move == 0
        || config.expansion_width == 0
    {
        return Err(
            "--max-depth, --rollout-limit, --sims, and --expansion-width must be at least 1"
                .into(),
        );
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let mut baselines = Vec::new();
    for name in args.baselines.split(',') {
        let name = name.trim();
        match Baseline::from_str(name) {
            Ok(b) if !baselines.contains(&b) => baselines.push(b),
            Ok(_) => {}
            Err(_) => return Ok(usage(format!("unknown baseline `{name}`"))),
        }
    }
    if baselines.is_empty() {
        return Ok(usage("--baselines selects nothing"));
    }
    let seed = match resolve_seed(args.seed) {
        Ok(Some(seed)) => seed,
        Ok(None) => return Ok(usage("bench needs --seed or AUTOASM_SEED")),
        Err(m) => return Ok(usage(m)),
    };
    if args.samples == 0 || args.sims == 0 || args.max_depth == 0 || args.jobs == 0 {
        return Ok(usage("--samples, --sims, --max-depth, and --jobs must be at least 1"));
    }

    if let Some(path) = &args.dump_suite {
        save_suites(&build_suites(args.suite_seed), path)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("suite -> {}", path.display());
    }

    let check_shape = |config: &autoasm_core::nn::NetConfig, what: &str| -> Result<(), String> {
        if config.space != suite_space() || config.pairs != SUITE_PAIRS {
            return Err(format!(
                "{what} checkpoint must use 4 registers, no stack cells, and {SUITE_PAIRS} pairs"
            ));
        }
        Ok(())
    };
    let policy = checkpoint::load_policy(&args.policy)
        .with_context(|| format!("loading policy {}", args.policy.display()))?;
    if let Err(m) = check_shape(policy.config(), "policy") {
        return Ok(usage(m));
    }
    let rl_policy = match &args.rl_policy {
        Some(path) => {
            let net = checkpoint::load_policy(path)
                .with_context(|| format!("loading policy {}", path.display()))?;
            if let Err(m) = check_shape(net.config(), "rl-policy") {
                return Ok(usage(m));
            }
            Some(net)
        }
        None => None,
    };
    let value = match &args.value {
        Some(path) => {
            let net = checkpoint::load_value(path)
                .with_context(|| format!("loading value {}", path.display()))?;
            if let Err(m) = check_shape(net.config(), "value") {
                return Ok(usage(m));
            }
            Some(net)
        }
        None => None,
    };
    if baselines.contains(&Baseline::AutoAssemblet) && value.is_none() {
        return Ok(missing("the autoassemblet baseline needs --value <checkpoint>"));
    }

    let request = BenchRequest {
        baselines,
        policy,
        rl_policy,
        value,
        budget: BenchBudget {
            program_samples: args.samples,
            search: SearchConfig {
                simulations_per_move: args.sims,
                max_depth: args.max_depth,
                ..SearchConfig::default()
            },
        },
        seed,
        suite_seed: args.suite_seed,
        jobs: args.jobs,
    };
    let arts = run_bench(&request, &args.out)?;
    print!("{}", arts.text);
    println!("report: {}", arts.report_text_path.display());
    println!("report: {}", arts.report_csv_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(path: &std::path::Path) -> Result<ExitCode> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(MAGIC) {
        let header = checkpoint::peek_header(&bytes)?;
        println!("{}", header.describe());
        return Ok(ExitCode::SUCCESS);
    }
    let text = String::from_utf8_lossy(&bytes);
    if text.starts_with(SUITE_HEADER_TAG) {
        let mut lines = text.lines();
        println!("{}", lines.next().unwrap_or_default());
        println!("{} records", lines.filter(|l| !l.trim().is_empty()).count());
        return Ok(ExitCode::SUCCESS);
    }
    let pool = pool::read_pool(bytes.as_slice())?;
    print!("{}", describe_pool(&pool));
    Ok(ExitCode::SUCCESS)
}
