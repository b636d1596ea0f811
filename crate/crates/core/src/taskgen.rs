//! Task generation and the weighted task pool.
//!
//! Tasks come from *pilot programs*: random straight-line programs executed
//! on random input states to produce input/output pairs. The generating
//! program is kept as the gold trace for imitation; tasks whose pairs never
//! change any cell, and tasks whose pair set duplicates an earlier task, are
//! dropped. The pool keeps one weight per task and samples training batches
//! through a softmax over those weights, so tasks the learner keeps failing
//! are revisited more often.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::machine::{
    run, state_equals, ActionSpace, MachineState, Program, SpaceConfig,
};

/// One input/output example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IoPair {
    pub input: MachineState,
    pub output: MachineState,
}

/// A synthesis task: reach every pair's output from its input with one
/// shared program.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub id: u64,
    pub pairs: Vec<IoPair>,
    /// The program that generated the pairs, when one exists.
    pub gold: Option<Program>,
}

impl Task {
    pub fn inputs(&self) -> impl Iterator<Item = &MachineState> {
        self.pairs.iter().map(|p| &p.input)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &MachineState> {
        self.pairs.iter().map(|p| &p.output)
    }
}

/// Knobs for pilot-program task generation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PilotConfig {
    /// Instructions per pilot program. Must be at least 1.
    pub program_length: usize,
    pub space: SpaceConfig,
    pub pairs_per_task: usize,
    /// Inclusive range for the initial value of every active cell.
    pub init_value_range: (i32, i32),
}

impl Default for PilotConfig {
    fn default() -> PilotConfig {
        PilotConfig {
            program_length: 3,
            space: SpaceConfig::default(),
            pairs_per_task: 2,
            init_value_range: (0, 9),
        }
    }
}

/// Failures task generation and the pool can report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TaskGenError {
    /// Every resampled input set left all pairs unchanged.
    DegenerateTask,
    /// The attempt budget ran out before the pool reached its target size.
    PoolExhausted,
    /// A weight update named a task id the pool does not hold.
    UnknownTask { id: u64 },
    /// Tasks and weights of different lengths, or non-contiguous ids.
    InconsistentPool,
}

impl fmt::Display for TaskGenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskGenError::DegenerateTask => {
                f.write_str("program leaves every sampled input unchanged")
            }
            TaskGenError::PoolExhausted => {
                f.write_str("attempt budget exhausted before pool was filled")
            }
            TaskGenError::UnknownTask { id } => write!(f, "no task with id {id}"),
            TaskGenError::InconsistentPool => {
                f.write_str("tasks and weights do not line up")
            }
        }
    }
}

impl core::error::Error for TaskGenError {}

/// Input resamples `make_task` tries before declaring a program degenerate.
pub const MAX_TASK_RESAMPLES: usize = 100;

/// Generation attempts `build_pool` spends per requested task.
pub const POOL_ATTEMPTS_PER_TASK: usize = 1000;

fn random_state<R: Rng>(cfg: &PilotConfig, rng: &mut R) -> MachineState {
    let (lo, hi) = cfg.init_value_range;
    assert!(lo <= hi, "empty init value range {lo}..={hi}");
    let mut state = MachineState::zeroed(cfg.space.ram_enabled);
    for i in 0..cfg.space.num_registers {
        state.regs[i] = rng.gen_range(lo..=hi);
    }
    if let Some(ram) = state.ram.as_mut() {
        for cell in ram.iter_mut() {
            *cell = rng.gen_range(lo..=hi);
        }
    }
    state
}

fn pilot_program_in<R: Rng>(actions: &ActionSpace, length: usize, rng: &mut R) -> Program {
    assert!(length >= 1, "pilot programs must have at least one instruction");
    (0..length)
        .map(|_| actions.get(rng.gen_range(0..actions.len()) as u16))
        .collect()
}

/// Draws a uniformly random program over the configured action space.
pub fn generate_pilot_program<R: Rng>(cfg: &PilotConfig, rng: &mut R) -> Program {
    let actions = ActionSpace::enumerate(cfg.space);
    pilot_program_in(&actions, cfg.program_length, rng)
}

/// Runs a program on freshly sampled inputs until at least one pair changes
/// state, keeping the program as the gold trace.
pub fn make_task<R: Rng>(
    id: u64,
    program: Program,
    cfg: &PilotConfig,
    rng: &mut R,
) -> Result<Task, TaskGenError> {
    for _ in 0..MAX_TASK_RESAMPLES {
        let pairs: Vec<IoPair> = (0..cfg.pairs_per_task)
            .map(|_| {
                let input = random_state(cfg, rng);
                let output = run(&input, &program)
                    .expect("pilot program must execute in the task space");
                IoPair { input, output }
            })
            .collect();
        let changed = pairs.iter().any(|p| {
            !state_equals(&p.input, &p.output).expect("pair states share a configuration")
        });
        if changed {
            return Ok(Task { id, pairs, gold: Some(program) });
        }
    }
    Err(TaskGenError::DegenerateTask)
}

/// A 64-bit key identifying a task by its pair multiset, independent of pair
/// order (FNV-1a over per-pair cell bytes).
pub fn task_fingerprint(pairs: &[IoPair], space: SpaceConfig) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let fnv = |h: &mut u64, bytes: &[u8]| {
        for &b in bytes {
            *h ^= b as u64;
            *h = h.wrapping_mul(PRIME);
        }
    };
    let mut keys: Vec<u64> = pairs
        .iter()
        .map(|p| {
            let mut h = OFFSET;
            for state in [&p.input, &p.output] {
                let cells = state.cells(space).expect("pair states match the space");
                for v in cells {
                    fnv(&mut h, &v.to_le_bytes());
                }
            }
            h
        })
        .collect();
    keys.sort_unstable();
    let mut h = OFFSET;
    for k in keys {
        fnv(&mut h, &k.to_le_bytes());
    }
    h
}

/// A freshly built pool plus counts of what was thrown away on the way.
#[derive(Debug)]
pub struct PoolBuild {
    pub pool: TaskPool,
    pub duplicate_drops: usize,
    pub degenerate_drops: usize,
}

/// Generates tasks until `n` distinct ones exist. Duplicates (by pair
/// multiset) and degenerate programs are dropped and replaced; the total
/// attempt budget is [`POOL_ATTEMPTS_PER_TASK`]`· n`.
pub fn build_pool<R: Rng>(
    n: usize,
    cfg: &PilotConfig,
    rng: &mut R,
) -> Result<PoolBuild, TaskGenError> {
    let actions = ActionSpace::enumerate(cfg.space);
    let mut tasks: Vec<Task> = Vec::with_capacity(n);
    let mut seen = alloc::collections::BTreeSet::new();
    let mut duplicate_drops = 0;
    let mut degenerate_drops = 0;
    let budget = POOL_ATTEMPTS_PER_TASK.saturating_mul(n);
    for _ in 0..budget {
        if tasks.len() == n {
            break;
        }
        let program = pilot_program_in(&actions, cfg.program_length, rng);
        let task = match make_task(tasks.len() as u64, program, cfg, rng) {
            Ok(task) => task,
            Err(TaskGenError::DegenerateTask) => {
                degenerate_drops += 1;
                continue;
            }
            Err(other) => return Err(other),
        };
        if !seen.insert(task_fingerprint(&task.pairs, cfg.space)) {
            duplicate_drops += 1;
            continue;
        }
        tasks.push(task);
    }
    if tasks.len() < n {
        return Err(TaskGenError::PoolExhausted);
    }
    Ok(PoolBuild {
        pool: TaskPool::from_parts(tasks, alloc::vec![0.0; n], *cfg)?,
        duplicate_drops,
        degenerate_drops,
    })
}

/// Limit on the absolute value of any task weight.
pub const WEIGHT_CLAMP: f64 = 10.0;

/// A set of tasks with per-task sampling weights.
#[derive(Clone, Debug)]
pub struct TaskPool {
    tasks: Vec<Task>,
    weights: Vec<f64>,
    pub config: PilotConfig,
    /// When set, weight updates reward success instead of failure, shifting
    /// sampling toward tasks the learner already solves.
    pub weight_successes: bool,
}

impl TaskPool {
    /// Assembles a pool from pre-built parts. Ids must equal positions and
    /// every task needs a weight.
    pub fn from_parts(
        tasks: Vec<Task>,
        weights: Vec<f64>,
        config: PilotConfig,
    ) -> Result<TaskPool, TaskGenError> {
        if tasks.len() != weights.len() {
            return Err(TaskGenError::InconsistentPool);
        }
        if tasks.iter().enumerate().any(|(i, t)| t.id != i as u64) {
            return Err(TaskGenError::InconsistentPool);
        }
        Ok(TaskPool { tasks, weights, config, weight_successes: false })
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: u64) -> Option<&Task> {
        self.tasks.get(id as usize)
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn weight(&self, id: u64) -> Option<f64> {
        self.weights.get(id as usize).copied()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Softmax of the weights.
    pub fn sampling_probabilities(&self) -> Vec<f64> {
        let max = self.weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = self.weights.iter().map(|w| libm::exp(w - max)).collect();
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        probs
    }

    /// Draws `batch_size` task ids with replacement from the softmax
    /// distribution.
    pub fn sample_batch<R: Rng>(&self, batch_size: usize, rng: &mut R) -> Vec<u64> {
        assert!(!self.is_empty(), "cannot sample from an empty pool");
        let probs = self.sampling_probabilities();
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in probs {
            acc += p;
            cumulative.push(acc);
        }
        (0..batch_size)
            .map(|_| {
                let u: f64 = rng.gen();
                let i = cumulative.partition_point(|&c| c <= u);
                i.min(self.tasks.len() - 1) as u64
            })
            .collect()
    }

    /// Moves a task's weight one unit toward "resample me" on failure and
    /// away on success (flipped by [`weight_successes`]), clamped to
    /// ±[`WEIGHT_CLAMP`].
    ///
    /// [`weight_successes`]: TaskPool::weight_successes
    pub fn update_weight(&mut self, id: u64, success: bool) -> Result<(), TaskGenError> {
        let w = self
            .weights
            .get_mut(id as usize)
            .ok_or(TaskGenError::UnknownTask { id })?;
        let mut delta = if success { -1.0 } else { 1.0 };
        if self.weight_successes {
            delta = -delta;
        }
        *w = (*w + delta).clamp(-WEIGHT_CLAMP, WEIGHT_CLAMP);
        Ok(())
    }
}
