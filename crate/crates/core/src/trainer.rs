//! Training loop: imitation pretraining on pool gold programs, episode
//! collection at several sampling temperatures, combined policy-gradient +
//! imitation updates with a decaying imitation weight, value regression on
//! collected returns, and failure-driven pool re-weighting.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::machine::{state_equals, step, MachineState, SpaceConfig};
use crate::nn::{
    encode_state, loss_hybrid, loss_imitation, loss_value, Adam, EpisodeSample, ImitationSample,
    PolicyNet, StateEncoding, ValueNet,
};
use crate::taskgen::{Task, TaskPool};

/// One executed action inside an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStep {
    /// Encoding of the state the action was chosen in.
    pub encoding: StateEncoding,
    pub action: crate::machine::Instruction,
    /// `γ^(T−t)` on success, 0 on failure.
    pub reward: f64,
}

/// One policy rollout on one task at one temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub task_id: u64,
    pub steps: Vec<EpisodeStep>,
    pub success: bool,
    pub temperature: f64,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn to_sample(&self) -> EpisodeSample {
        EpisodeSample {
            steps: self
                .steps
                .iter()
                .map(|s| ImitationSample { encoding: s.encoding.clone(), action: s.action })
                .collect(),
            rewards: self.steps.iter().map(|s| s.reward).collect(),
        }
    }
}

/// Knobs for pretraining and the main loop.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Sampling temperatures; each collected task yields one episode per
    /// entry.
    pub temperatures: Vec<f64>,
    /// Tasks sampled per epoch.
    pub batch_size: usize,
    pub epochs: usize,
    pub gamma: f64,
    /// Imitation weight at epoch 0.
    pub lambda0: f64,
    /// Multiplicative decay of the imitation weight per epoch.
    pub lambda_decay: f64,
    /// Episode length cap.
    pub max_steps: usize,
    pub policy_lr: f64,
    pub value_lr: f64,
    /// Weight each step by its own reward instead of the episode return.
    pub per_step_returns: bool,
    pub pretrain_epochs: usize,
    pub pretrain_batch: usize,
    pub pretrain_lr: f64,
    /// Fraction of pool tasks withheld from pretraining for accuracy
    /// reporting.
    pub holdout_fraction: f64,
    /// Pretraining stops early once hold-out accuracy reaches this.
    pub pretrain_target_accuracy: f64,
    /// Epochs without improvement before training counts as converged.
    pub plateau_window: usize,
    /// Smallest success-rate gain that resets the plateau clock.
    pub plateau_min_gain: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            temperatures: alloc::vec![0.5, 1.0, 2.0],
            batch_size: 32,
            epochs: 50,
            gamma: 0.9,
            lambda0: 1.0,
            lambda_decay: 0.95,
            max_steps: 12,
            policy_lr: 1e-3,
            value_lr: 1e-3,
            per_step_returns: false,
            pretrain_epochs: 20,
            pretrain_batch: 64,
            pretrain_lr: 1e-3,
            holdout_fraction: 0.1,
            pretrain_target_accuracy: 0.95,
            plateau_window: 20,
            plateau_min_gain: 0.005,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) {
        assert!(!self.temperatures.is_empty(), "need at least one temperature");
        assert!(
            self.temperatures.iter().all(|&t| t > 0.0),
            "temperatures must be positive"
        );
        assert!(self.batch_size >= 1, "batch_size must be at least 1");
        assert!(self.max_steps >= 1, "max_steps must be at least 1");
        assert!(self.gamma > 0.0 && self.gamma <= 1.0, "gamma must be in (0,1]");
        assert!(
            self.lambda_decay > 0.0 && self.lambda_decay <= 1.0,
            "lambda_decay must be in (0,1]"
        );
        assert!(
            (0.0..1.0).contains(&self.holdout_fraction),
            "holdout_fraction must be in [0,1)"
        );
    }

    /// Imitation weight `λ₀ · decay^epoch`.
    pub fn lambda_at(&self, epoch: usize) -> f64 {
        self.lambda0 * libm::pow(self.lambda_decay, epoch as f64)
    }
}

/// A task was asked for gold-program supervision it does not carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MissingGold {
    pub task_id: u64,
}

impl core::fmt::Display for MissingGold {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "task {} has no gold program", self.task_id)
    }
}

impl core::error::Error for MissingGold {}

/// `γ^(T−t)` for each of `len` steps of a successful episode, zeros for a
/// failed one. The final step of a success earns exactly 1.
pub fn discounted_rewards(len: usize, success: bool, gamma: f64) -> Vec<f64> {
    (0..len)
        .map(|i| if success { libm::pow(gamma, (len - 1 - i) as f64) } else { 0.0 })
        .collect()
}

/// Unrolls a task's gold program into per-step (encoding, instruction)
/// supervision pairs.
pub fn imitation_samples(
    task: &Task,
    space: SpaceConfig,
) -> Result<Vec<ImitationSample>, MissingGold> {
    let gold = task.gold.as_ref().ok_or(MissingGold { task_id: task.id })?;
    let mut currents: Vec<MachineState> = task.inputs().copied().collect();
    let targets: Vec<MachineState> = task.outputs().copied().collect();
    let mut samples = Vec::with_capacity(gold.len());
    for instr in gold.iter() {
        samples.push(ImitationSample {
            encoding: encode_state(&currents, &targets, space),
            action: *instr,
        });
        for s in currents.iter_mut() {
            *s = step(s, instr).expect("gold programs execute");
        }
    }
    Ok(samples)
}

/// Fraction of samples whose greedy decode reproduces the gold line exactly.
pub fn exact_line_accuracy(policy: &PolicyNet, samples: &[ImitationSample]) -> f64 {
    assert!(!samples.is_empty(), "accuracy over an empty sample set");
    let correct = samples
        .iter()
        .filter(|s| policy.greedy_action(&s.encoding) == s.action)
        .count();
    correct as f64 / samples.len() as f64
}

/// Per-epoch pretraining progress.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainEpoch {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub loss: f64,
    pub holdout_accuracy: f64,
}

/// Outcome of a pretraining run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PretrainReport {
    pub epochs_run: usize,
    pub final_loss: f64,
    pub holdout_accuracy: f64,
    pub holdout_tasks: usize,
    pub train_samples: usize,
}

/// Supervised training on the pool's gold programs. Tasks are split at the
/// task level; accuracy is greedy exact-line match on the withheld split
/// (on the training samples when the split is empty). Stops early once the
/// target accuracy is reached.
pub fn pretrain_imitation<R: Rng>(
    policy: &mut PolicyNet,
    pool: &TaskPool,
    config: &TrainConfig,
    rng: &mut R,
    mut progress: impl FnMut(&PretrainEpoch),
) -> Result<PretrainReport, MissingGold> {
    config.validate();
    assert!(!pool.is_empty(), "pretraining needs a non-empty pool");
    let space = pool.config.space;

    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(rng);
    let holdout_tasks =
        ((pool.len() as f64 * config.holdout_fraction) as usize).min(pool.len() - 1);
    let (hold_idx, train_idx) = order.split_at(holdout_tasks);

    let mut train = Vec::new();
    for &i in train_idx {
        train.extend(imitation_samples(&pool.tasks()[i], space)?);
    }
    let mut hold = Vec::new();
    for &i in hold_idx {
        hold.extend(imitation_samples(&pool.tasks()[i], space)?);
    }
    assert!(!train.is_empty(), "pool gold programs are all empty");

    let mut opt = Adam::for_params(config.pretrain_lr, policy.params());
    let mut epochs_run = 0;
    let mut last = PretrainEpoch { epoch: 0, loss: f64::INFINITY, holdout_accuracy: 0.0 };
    for epoch in 0..config.pretrain_epochs {
        train.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for batch in train.chunks(config.pretrain_batch.max(1)) {
            let (loss, grads) = loss_imitation(policy, batch);
            opt.step(&mut policy.params_mut(), &grads).expect("shapes never change");
            loss_sum += loss;
            batches += 1;
        }
        let eval = if hold.is_empty() { &train } else { &hold };
        last = PretrainEpoch {
            epoch,
            loss: loss_sum / batches as f64,
            holdout_accuracy: exact_line_accuracy(policy, eval),
        };
        epochs_run = epoch + 1;
        progress(&last);
        if last.holdout_accuracy >= config.pretrain_target_accuracy {
            break;
        }
    }
    Ok(PretrainReport {
        epochs_run,
        final_loss: last.loss,
        holdout_accuracy: last.holdout_accuracy,
        holdout_tasks,
        train_samples: train.len(),
    })
}

/// Rolls one episode on `task` at `temperature`, stopping on success or at
/// `max_steps`.
pub fn rollout_episode<R: Rng>(
    policy: &PolicyNet,
    task: &Task,
    space: SpaceConfig,
    temperature: f64,
    max_steps: usize,
    gamma: f64,
    rng: &mut R,
) -> Episode {
    let mut currents: Vec<MachineState> = task.inputs().copied().collect();
    let targets: Vec<MachineState> = task.outputs().copied().collect();
    let solved = |currents: &[MachineState]| {
        currents
            .iter()
            .zip(&targets)
            .all(|(c, t)| state_equals(c, t).expect("pairs share a configuration"))
    };
    let mut taken = Vec::new();
    let mut success = solved(&currents);
    while !success && taken.len() < max_steps {
        let encoding = encode_state(&currents, &targets, space);
        let sampled = policy.sample_action(&encoding, temperature, rng);
        for s in currents.iter_mut() {
            *s = step(s, &sampled.instruction).expect("sampled actions execute");
        }
        taken.push((encoding, sampled.instruction));
        success = solved(&currents);
    }
    let rewards = discounted_rewards(taken.len(), success, gamma);
    Episode {
        task_id: task.id,
        steps: taken
            .into_iter()
            .zip(rewards)
            .map(|((encoding, action), reward)| EpisodeStep { encoding, action, reward })
            .collect(),
        success,
        temperature,
    }
}

/// One episode per task per temperature, task-major. Every episode's outcome
/// is fed back into the pool weights.
pub fn collect_episodes<R: Rng>(
    policy: &PolicyNet,
    pool: &mut TaskPool,
    task_ids: &[u64],
    config: &TrainConfig,
    rng: &mut R,
) -> Vec<Episode> {
    config.validate();
    let space = pool.config.space;
    let mut episodes = Vec::with_capacity(task_ids.len() * config.temperatures.len());
    for &id in task_ids {
        let task = pool.task(id).expect("sampled task ids exist").clone();
        for &temperature in &config.temperatures {
            let episode = rollout_episode(
                policy,
                &task,
                space,
                temperature,
                config.max_steps,
                config.gamma,
                rng,
            );
            pool.update_weight(id, episode.success).expect("task id exists");
            episodes.push(episode);
        }
    }
    episodes
}

/// Optimizer pair for the main loop.
pub struct Optimizers {
    pub policy: Adam,
    pub value: Adam,
}

impl Optimizers {
    pub fn new(policy: &PolicyNet, value: &ValueNet, config: &TrainConfig) -> Optimizers {
        Optimizers {
            policy: Adam::for_params(config.policy_lr, policy.params()),
            value: Adam::for_params(config.value_lr, value.params()),
        }
    }
}

/// Scalar record of one training epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lambda: f64,
    pub success_rate: f64,
    pub mean_episode_len: f64,
    pub loss_imitation: f64,
    pub loss_rl: f64,
    pub loss_value: f64,
}

/// One epoch: sample tasks by weight, collect episodes at every temperature,
/// apply one combined policy update (gradient terms plus λ-scaled imitation
/// on the sampled tasks' gold lines) and one value regression on all
/// collected steps.
pub fn train_epoch<R: Rng>(
    policy: &mut PolicyNet,
    value: &mut ValueNet,
    pool: &mut TaskPool,
    opts: &mut Optimizers,
    config: &TrainConfig,
    epoch: usize,
    rng: &mut R,
) -> EpochMetrics {
    config.validate();
    let ids = pool.sample_batch(config.batch_size, rng);
    let episodes = collect_episodes(policy, pool, &ids, config, rng);
    let lambda = config.lambda_at(epoch);

    let episode_samples: Vec<EpisodeSample> = episodes.iter().map(Episode::to_sample).collect();
    let mut imitation = Vec::new();
    for &id in &ids {
        let task = pool.task(id).expect("sampled task ids exist");
        if task.gold.is_some() {
            imitation
                .extend(imitation_samples(task, pool.config.space).expect("gold is present"));
        }
    }
    let (hybrid, grads) =
        loss_hybrid(policy, &episode_samples, &imitation, lambda, config.per_step_returns);
    opts.policy.step(&mut policy.params_mut(), &grads).expect("shapes never change");

    let value_batch: Vec<(StateEncoding, f64)> = episodes
        .iter()
        .flat_map(|e| e.steps.iter().map(|s| (s.encoding.clone(), s.reward)))
        .collect();
    let (loss_v, value_grads) = loss_value(value, &value_batch);
    opts.value.step(&mut value.params_mut(), &value_grads).expect("shapes never change");

    let successes = episodes.iter().filter(|e| e.success).count();
    let total_len: usize = episodes.iter().map(Episode::len).sum();
    EpochMetrics {
        epoch,
        lambda,
        success_rate: successes as f64 / episodes.len() as f64,
        mean_episode_len: total_len as f64 / episodes.len() as f64,
        loss_imitation: hybrid.imitation,
        loss_rl: hybrid.rl,
        loss_value: loss_v,
    }
}

/// True once the best success rate of the trailing `window` epochs no longer
/// beats the best before them by more than `min_gain`.
pub fn plateaued(success_history: &[f64], window: usize, min_gain: f64) -> bool {
    if success_history.len() <= window {
        return false;
    }
    let split = success_history.len() - window;
    let best = |xs: &[f64]| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    best(&success_history[split..]) - best(&success_history[..split]) <= min_gain
}
