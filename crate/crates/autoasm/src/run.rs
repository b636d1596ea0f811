//! Orchestration behind the binary: training runs that leave checkpoints
//! and a metrics log on disk, benchmark runs that leave report files, and a
//! search loop that can narrate its tree.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use anyhow::{Context, Result};
use autoasm_core::bench::{
    build_suites, report, report_csv, report_text, run_baseline, Baseline, BenchBudget,
    BenchTask, ReportRow, TaskOutcome,
};
use autoasm_core::machine::{run as execute, state_equals, Program, SpaceConfig};
use autoasm_core::mcts::{
    ActionSampler, SearchConfig, SearchTree, StateValue, SynthesisFailure, Synthesized,
    TraceRecord,
};
use autoasm_core::nn::{NetConfig, PolicyNet, ValueNet};
use autoasm_core::seeds::{rng_for, streams};
use autoasm_core::taskgen::{Task, TaskPool};
use autoasm_core::trainer::{
    plateaued, pretrain_imitation, train_epoch, Optimizers, PretrainReport, TrainConfig,
};

use crate::formats::checkpoint;
use crate::formats::metrics::{metrics_row, METRICS_HEADER};

pub const IMITATION_CHECKPOINT: &str = "policy-imitation.ckpt";
pub const POLICY_CHECKPOINT: &str = "policy.ckpt";
pub const VALUE_CHECKPOINT: &str = "value.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const REPORT_CSV_FILE: &str = "report.csv";

/// Network width knobs. Everything else about the architecture follows from
/// the pool's space and pair count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetDims {
    pub d_emb: usize,
    pub hidden: usize,
}

impl Default for NetDims {
    fn default() -> NetDims {
        NetDims { d_emb: 16, hidden: 128 }
    }
}

#[derive(Debug)]
pub struct TrainingArtifacts {
    pub imitation_policy: PathBuf,
    pub policy: Option<PathBuf>,
    pub value: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub pretrain: PretrainReport,
    pub epochs_run: usize,
    pub converged: bool,
}

/// Pretrains on the pool's gold programs, then runs the main loop until the
/// epoch budget runs out or the success rate plateaus. Checkpoints are
/// rewritten after every epoch, so a killed run keeps its latest state.
pub fn run_training(
    pool: &mut TaskPool,
    config: &TrainConfig,
    dims: NetDims,
    out_dir: &Path,
    pretrain_only: bool,
) -> Result<TrainingArtifacts> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let net_config = NetConfig {
        d_emb: dims.d_emb,
        hidden: dims.hidden,
        ..NetConfig::new(pool.config.space, pool.config.pairs_per_task)
    };

    let mut policy = PolicyNet::new(net_config, &mut rng_for(config.seed, streams::POLICY_INIT));
    let mut pretrain_rng = rng_for(config.seed, streams::PRETRAIN);
    let pretrain = pretrain_imitation(&mut policy, pool, config, &mut pretrain_rng, |e| {
        println!(
            "pretrain epoch {:>4}: loss {:.4}, holdout accuracy {:.3}",
            e.epoch, e.loss, e.holdout_accuracy
        );
    })
    .map_err(|e| anyhow::anyhow!("{e}"))?;
    let imitation_policy = out_dir.join(IMITATION_CHECKPOINT);
    checkpoint::save_policy(&policy, &imitation_policy)?;
    println!(
        "pretraining done after {} epochs: holdout accuracy {:.3} over {} held-out tasks -> {}",
        pretrain.epochs_run,
        pretrain.holdout_accuracy,
        pretrain.holdout_tasks,
        imitation_policy.display()
    );
    if pretrain_only {
        return Ok(TrainingArtifacts {
            imitation_policy,
            policy: None,
            value: None,
            metrics: None,
            pretrain,
            epochs_run: 0,
            converged: false,
        });
    }

    let mut value = ValueNet::new(net_config, &mut rng_for(config.seed, streams::VALUE_INIT));
    let mut opts = Optimizers::new(&policy, &value, config);
    let mut train_rng = rng_for(config.seed, streams::TRAIN);

    let metrics_path = out_dir.join(METRICS_FILE);
    let mut metrics = BufWriter::new(File::create(&metrics_path)?);
    writeln!(metrics, "{METRICS_HEADER}")?;
    let policy_path = out_dir.join(POLICY_CHECKPOINT);
    let value_path = out_dir.join(VALUE_CHECKPOINT);

    let mut history = Vec::new();
    let mut epochs_run = 0;
    let mut converged = false;
    for epoch in 0..config.epochs {
        let start = Instant::now();
        let m = train_epoch(&mut policy, &mut value, pool, &mut opts, config, epoch, &mut train_rng);
        let wall = start.elapsed().as_secs_f64();
        writeln!(metrics, "{}", metrics_row(&m, wall))?;
        metrics.flush()?;
        checkpoint::save_policy(&policy, &policy_path)?;
        checkpoint::save_value(&value, &value_path)?;
        println!(
            "epoch {:>4}: success {:>5.1}%, mean length {:.2}, loss im {:.4} rl {:+.4} value {:.4}, lambda {:.3}, {:.1}s",
            m.epoch,
            m.success_rate * 100.0,
            m.mean_episode_len,
            m.loss_imitation,
            m.loss_rl,
            m.loss_value,
            m.lambda,
            wall
        );
        epochs_run = epoch + 1;
        history.push(m.success_rate);
        if plateaued(&history, config.plateau_window, config.plateau_min_gain) {
            converged = true;
            println!("success rate plateaued; stopping after epoch {epoch}");
            break;
        }
    }

    Ok(TrainingArtifacts {
        imitation_policy,
        policy: Some(policy_path),
        value: Some(value_path),
        metrics: Some(metrics_path),
        pretrain,
        epochs_run,
        converged,
    })
}

pub struct BenchRequest {
    pub baselines: Vec<Baseline>,
    /// Drives the sampling baselines and the prior-guided tree.
    pub policy: PolicyNet,
    /// Optional separately trained policy for the reinforcement baselines;
    /// falls back to `policy`.
    pub rl_policy: Option<PolicyNet>,
    /// Required by [`Baseline::AutoAssemblet`].
    pub value: Option<ValueNet>,
    pub budget: BenchBudget,
    pub seed: u64,
    pub suite_seed: u64,
    pub jobs: usize,
}

pub struct BenchArtifacts {
    /// Every per-task result, in baseline-then-suite order.
    pub outcomes: Vec<TaskOutcome>,
    pub rows: Vec<ReportRow>,
    pub text: String,
    pub report_text_path: PathBuf,
    pub report_csv_path: PathBuf,
}

/// Runs every requested baseline over the generated suite and writes the
/// text and CSV reports. Outcomes do not depend on `jobs`: per-task RNG
/// streams are keyed by task id, and workers take contiguous slices.
pub fn run_bench(request: &BenchRequest, out_dir: &Path) -> Result<BenchArtifacts> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let suites = build_suites(request.suite_seed);
    let mut outcomes = Vec::new();
    for &baseline in &request.baselines {
        let policy = match baseline {
            Baseline::Imitation | Baseline::MctsPrior => &request.policy,
            Baseline::Reinforce | Baseline::AutoAssemblet => {
                request.rl_policy.as_ref().unwrap_or(&request.policy)
            }
        };
        let start = Instant::now();
        let outs = run_suite(
            baseline,
            policy,
            request.value.as_ref(),
            &suites.tasks,
            &request.budget,
            request.seed,
            request.jobs,
        );
        let solved = outs.iter().filter(|o| o.solved).count();
        println!(
            "{baseline}: {solved}/{} solved in {:.1}s",
            outs.len(),
            start.elapsed().as_secs_f64()
        );
        outcomes.extend(outs);
    }
    let rows = report(&outcomes);
    let text = report_text(&rows);
    let budget_label = format!(
        "samples={};sims={}",
        request.budget.program_samples, request.budget.search.simulations_per_move
    );
    let csv = report_csv(&rows, &budget_label);
    let report_text_path = out_dir.join(REPORT_TEXT_FILE);
    let report_csv_path = out_dir.join(REPORT_CSV_FILE);
    fs::write(&report_text_path, &text)?;
    fs::write(&report_csv_path, csv)?;
    Ok(BenchArtifacts { outcomes, rows, text, report_text_path, report_csv_path })
}

fn run_suite(
    baseline: Baseline,
    policy: &PolicyNet,
    value: Option<&ValueNet>,
    tasks: &[BenchTask],
    budget: &BenchBudget,
    seed: u64,
    jobs: usize,
) -> Vec<TaskOutcome> {
    if jobs <= 1 || tasks.len() < 2 {
        return run_baseline(baseline, policy, value, tasks, budget, seed);
    }
    let chunk = tasks.len().div_ceil(jobs);
    thread::scope(|scope| {
        let handles = tasks
            .chunks(chunk)
            .map(|slice| {
                scope.spawn(move || run_baseline(baseline, policy, value, slice, budget, seed))
            })
            .collect::<Vec<_>>();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("bench worker panicked"))
            .collect()
    })
}

/// [`autoasm_core::mcts::synthesize`] with a narrator: after each search
/// batch, `on_move` sees the committed step index, the chosen instruction,
/// and the explored subtree that justified it.
pub fn synthesize_traced<P, V>(
    task: &Task,
    policy: &P,
    value: &V,
    space: SpaceConfig,
    config: SearchConfig,
    mut on_move: impl FnMut(usize, &autoasm_core::machine::Instruction, &[TraceRecord]),
) -> Result<Synthesized, SynthesisFailure>
where
    P: ActionSampler + ?Sized,
    V: StateValue + ?Sized,
{
    let mut tree = SearchTree::new(task, space, config);
    let mut instructions = Vec::new();
    while !tree.root().terminal {
        if tree.root().depth >= config.max_depth {
            return Err(SynthesisFailure {
                steps_taken: instructions.len(),
                sim_calls: tree.sim_calls(),
            });
        }
        let action = tree.search_step(policy, value);
        let instruction = tree.actions().get(action);
        on_move(instructions.len(), &instruction, &tree.trace_records());
        instructions.push(instruction);
        tree.advance_root(action);
    }
    let program = Program(instructions);
    for pair in &task.pairs {
        let end = execute(&pair.input, &program).expect("synthesized program executes");
        assert!(
            state_equals(&end, &pair.output).expect("states share a configuration"),
            "synthesized program failed post-hoc verification"
        );
    }
    Ok(Synthesized { program, sim_calls: tree.sim_calls() })
}
