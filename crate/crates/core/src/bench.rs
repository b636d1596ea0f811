//! Benchmark suites and baselines: 130 generated tasks in three difficulty
//! tiers, four solver configurations, and success-rate / average-steps
//! reporting.
//!
//! Suite tasks are built from fixed seeds and each ships a hand-constructed
//! witness program that is executed against both pairs at build time, so
//! every task is provably solvable inside the action space. Reported
//! successes are re-executed too; no solver bookkeeping is trusted.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::machine::{
    run, state_equals, Instruction, MachineState, Opcode, Operand, Program, Register,
    SpaceConfig,
};
use crate::mcts::{synthesize, ActionSampler, SearchConfig, StateValue};
use crate::nn::{PolicyNet, ValueNet};
use crate::seeds::{derive_seed, streams};
use crate::taskgen::{IoPair, Task};
use crate::trainer::rollout_episode;

/// Difficulty tier of a benchmark task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    Easy,
    Medium,
    Hard,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Easy, Category::Medium, Category::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Category::Easy => "easy",
            Category::Medium => "medium",
            Category::Hard => "hard",
        }
    }
}

impl core::fmt::Display for Category {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Category {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Category, UnknownName> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or(UnknownName)
    }
}

/// Solver configuration under measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    /// Pretrained policy, best-of-budget sampling.
    Imitation,
    /// Policy-gradient-trained policy, best-of-budget sampling.
    Reinforce,
    /// Tree search with the pretrained policy and a distance heuristic in
    /// place of the value network.
    MctsPrior,
    /// Tree search with the trained policy and value networks.
    AutoAssemblet,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [
        Baseline::Imitation,
        Baseline::Reinforce,
        Baseline::MctsPrior,
        Baseline::AutoAssemblet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Imitation => "imitation",
            Baseline::Reinforce => "reinforce",
            Baseline::MctsPrior => "mcts-prior",
            Baseline::AutoAssemblet => "autoassemblet",
        }
    }

    /// True for the tree-search baselines.
    pub fn uses_search(self) -> bool {
        matches!(self, Baseline::MctsPrior | Baseline::AutoAssemblet)
    }
}

impl core::fmt::Display for Baseline {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// A name failed to match any known variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnknownName;

impl core::fmt::Display for UnknownName {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("unknown name")
    }
}

impl core::error::Error for UnknownName {}

impl core::str::FromStr for Baseline {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Baseline, UnknownName> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or(UnknownName)
    }
}

/// One benchmark task plus the witness proving it solvable.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchTask {
    pub name: String,
    pub category: Category,
    pub task: Task,
    pub witness: Program,
}

/// The full 130-task benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchSuites {
    pub tasks: Vec<BenchTask>,
}

impl BenchSuites {
    pub fn category(&self, category: Category) -> impl Iterator<Item = &BenchTask> {
        self.tasks.iter().filter(move |t| t.category == category)
    }
}

/// All suite tasks live in the register-only, four-register space.
pub fn suite_space() -> SpaceConfig {
    SpaceConfig::new(4, false)
}

/// Every suite task demonstrates its behavior on this many pairs.
pub const SUITE_PAIRS: usize = 2;

const GEN_RETRIES: usize = 100_000;

struct SuiteBuilder {
    tasks: Vec<BenchTask>,
    rng: ChaCha8Rng,
}

impl SuiteBuilder {
    fn digits(&mut self) -> [i32; 4] {
        [0; 4].map(|_| self.rng.gen_range(0..=9))
    }

    /// Executes the witness on each input to mint the outputs, checks the
    /// task is not already solved, and records it.
    fn push(&mut self, name: String, category: Category, inputs: [[i32; 4]; 2], witness: Program) {
        let pairs: Vec<IoPair> = inputs
            .iter()
            .map(|&regs| {
                let input = MachineState::regs_only(regs);
                let output = run(&input, &witness).expect("witness executes");
                assert_ne!(input, output, "degenerate suite task {name}");
                IoPair { input, output }
            })
            .collect();
        self.tasks.push(BenchTask {
            name,
            category,
            task: Task { id: self.tasks.len() as u64, pairs, gold: None },
            witness,
        });
    }

    /// Like [`push`] but with explicit target outputs; the witness is
    /// checked against them instead of defining them.
    fn push_pinned(
        &mut self,
        name: String,
        category: Category,
        pairs: [([i32; 4], [i32; 4]); 2],
        witness: Program,
    ) {
        let pairs: Vec<IoPair> = pairs
            .iter()
            .map(|&(i, o)| {
                let input = MachineState::regs_only(i);
                let output = MachineState::regs_only(o);
                let end = run(&input, &witness).expect("witness executes");
                assert_eq!(end, output, "witness misses pinned target of {name}");
                assert_ne!(input, output, "degenerate suite task {name}");
                IoPair { input, output }
            })
            .collect();
        self.tasks.push(BenchTask {
            name,
            category,
            task: Task { id: self.tasks.len() as u64, pairs, gold: None },
            witness,
        });
    }

    fn sample_until<T>(&mut self, mut gen: impl FnMut(&mut ChaCha8Rng) -> Option<T>) -> T {
        for _ in 0..GEN_RETRIES {
            if let Some(v) = gen(&mut self.rng) {
                return v;
            }
        }
        panic!("suite generation failed to satisfy its constraints");
    }

    fn reg_instruction(op: Opcode, src: Register, dst: Register) -> Instruction {
        Instruction::new(op, Operand::Reg(src), Operand::Reg(dst)).expect("legal instruction")
    }

    /// `dst op= src` for twelve ordered register pairs.
    fn binary_reg_tasks(&mut self, op: Opcode, label: &str) {
        let mut index = 0;
        for dst in Register::ALL {
            for src in Register::ALL {
                if src == dst {
                    continue;
                }
                let witness = Program(alloc::vec![Self::reg_instruction(op, src, dst)]);
                let inputs = [0; 2].map(|_| {
                    self.sample_until(|rng| {
                        let regs = [0; 4].map(|_| rng.gen_range(0..=9));
                        let input = MachineState::regs_only(regs);
                        let output = run(&input, &witness).expect("witness executes");
                        (output != input).then_some(regs)
                    })
                });
                self.push(format!("easy-{label}-{index:02}"), Category::Easy, inputs, witness);
                index += 1;
            }
        }
    }

    /// `eax ← extremum of all registers`, where the extremum provably sits
    /// in `src` on both pairs.
    fn extremum_tasks(&mut self, count: usize, smallest: bool, label: &str) {
        let sources = [Register::Ebx, Register::Ecx, Register::Edx];
        for index in 0..count {
            let src = sources[index % sources.len()];
            let witness =
                Program(alloc::vec![Self::reg_instruction(Opcode::Movl, src, Register::Eax)]);
            let inputs = [0; 2].map(|_| {
                self.sample_until(|rng| {
                    let regs = [0; 4].map(|_| rng.gen_range(0..=9));
                    let pivot = regs[src.index()];
                    let unique_extremum = regs
                        .iter()
                        .enumerate()
                        .all(|(i, &v)| i == src.index() || (smallest && v > pivot) || (!smallest && v < pivot));
                    unique_extremum.then_some(regs)
                })
            });
            self.push(format!("easy-{label}-{index:02}"), Category::Easy, inputs, witness);
        }
    }

    /// `dst ±= amount` for an amount beyond any single immediate, built from
    /// chained digit additions.
    fn big_constant_tasks(&mut self, count: usize, op: Opcode, label: &str) {
        for index in 0..count {
            let dst = Register::ALL[index % 4];
            let amount = self.rng.gen_range(11..=40);
            let mut lines = Vec::new();
            let mut left = amount;
            while left > 0 {
                let chunk = left.min(9);
                lines.push(
                    Instruction::new(op, Operand::Imm(chunk as u8), Operand::Reg(dst))
                        .expect("legal instruction"),
                );
                left -= chunk;
            }
            let witness = Program(lines);
            let inputs = [0; 2].map(|_| self.digits());
            self.push(
                format!("medium-{label}-{amount}-{index:02}"),
                Category::Medium,
                inputs,
                witness,
            );
        }
    }

    /// Swap two registers through a scratch register; the scratch is
    /// preloaded with the first operand so its final value matches its
    /// initial one.
    fn switch_tasks(&mut self, count: usize) {
        let mut index = 0;
        'outer: for a in Register::ALL {
            for b in Register::ALL {
                if a == b {
                    continue;
                }
                if index >= count {
                    break 'outer;
                }
                let scratch = Register::ALL
                    .into_iter()
                    .find(|r| *r != a && *r != b)
                    .expect("two registers leave two free");
                let witness = Program(alloc::vec![
                    Self::reg_instruction(Opcode::Movl, a, scratch),
                    Self::reg_instruction(Opcode::Movl, b, a),
                    Self::reg_instruction(Opcode::Movl, scratch, b),
                ]);
                let inputs = [0; 2].map(|_| {
                    self.sample_until(|rng| {
                        let mut regs = [0; 4].map(|_| rng.gen_range(0..=9));
                        regs[scratch.index()] = regs[a.index()];
                        (regs[a.index()] != regs[b.index()]).then_some(regs)
                    })
                });
                self.push(format!("hard-switch-{index:02}"), Category::Hard, inputs, witness);
                index += 1;
            }
        }
    }

    /// Sorting by a fixed per-register shift: the same program maps both
    /// scrambled inputs to ascending outputs.
    fn sort_tasks(&mut self, count: usize) {
        self.push_pinned(
            String::from("hard-sort-00"),
            Category::Hard,
            [([5, 1, 7, 8], [1, 5, 7, 8]), ([7, 3, 9, 9], [3, 7, 9, 9])],
            Program::parse("subl $4, %eax\naddl $4, %ebx").expect("witness parses"),
        );
        for index in 1..count {
            let (inputs, witness) = self.sample_until(|rng| {
                let mut sorted_a = [0; 4].map(|_| rng.gen_range(0..=9));
                sorted_a.sort_unstable();
                let mut perm = [0usize, 1, 2, 3];
                for i in (1..4).rev() {
                    perm.swap(i, rng.gen_range(0..=i));
                }
                let input_a: [i32; 4] = core::array::from_fn(|i| sorted_a[perm[i]]);
                let deltas: [i32; 4] = core::array::from_fn(|i| sorted_a[i] - input_a[i]);
                if deltas.iter().all(|&d| d == 0) {
                    return None;
                }
                let mut sorted_b = [0; 4].map(|_| rng.gen_range(0..=9));
                sorted_b.sort_unstable();
                let input_b: [i32; 4] = core::array::from_fn(|i| sorted_b[i] - deltas[i]);
                if input_b.iter().any(|&v| !(0..=9).contains(&v)) || input_b == sorted_b {
                    return None;
                }
                let lines: Vec<Instruction> = deltas
                    .iter()
                    .enumerate()
                    .filter(|&(_, &d)| d != 0)
                    .map(|(i, &d)| {
                        let op = if d > 0 { Opcode::Addl } else { Opcode::Subl };
                        Instruction::new(
                            op,
                            Operand::Imm(d.unsigned_abs() as u8),
                            Operand::Reg(Register::ALL[i]),
                        )
                        .expect("legal instruction")
                    })
                    .collect();
                Some(([input_a, input_b], Program(lines)))
            });
            self.push(format!("hard-sort-{index:02}"), Category::Hard, inputs, witness);
        }
    }

    /// Zero every register of a fixed subset; inputs keep small values in
    /// the filtered positions and large ones elsewhere.
    fn filter_tasks(&mut self, count: usize) {
        for index in 0..count {
            let mask = 1 + (index % 14);
            let filtered: Vec<Register> = Register::ALL
                .into_iter()
                .filter(|r| mask & (1 << r.index()) != 0)
                .collect();
            let lines: Vec<Instruction> = filtered
                .iter()
                .map(|&r| {
                    Instruction::new(Opcode::Movl, Operand::Imm(0), Operand::Reg(r))
                        .expect("legal instruction")
                })
                .collect();
            let witness = Program(lines);
            let inputs = [0; 2].map(|_| {
                self.sample_until(|rng| {
                    let regs: [i32; 4] = core::array::from_fn(|i| {
                        if mask & (1 << i) != 0 {
                            rng.gen_range(0..=4)
                        } else {
                            rng.gen_range(5..=9)
                        }
                    });
                    let some_filtered_nonzero =
                        filtered.iter().any(|&r| regs[r.index()] != 0);
                    some_filtered_nonzero.then_some(regs)
                })
            });
            self.push(format!("hard-filter-{index:02}"), Category::Hard, inputs, witness);
        }
    }

    /// Minimum into `eax` and maximum into `edx` at once, with the extrema
    /// pinned to fixed source registers across pairs.
    fn two_extrema_tasks(&mut self, count: usize) {
        let combos = [
            (Register::Ebx, Register::Ecx),
            (Register::Ebx, Register::Edx),
            (Register::Ecx, Register::Ebx),
            (Register::Ecx, Register::Edx),
        ];
        for index in 0..count {
            let (min_src, max_src) = combos[index % combos.len()];
            let mut lines = alloc::vec![Self::reg_instruction(Opcode::Movl, min_src, Register::Eax)];
            if max_src != Register::Edx {
                lines.push(Self::reg_instruction(Opcode::Movl, max_src, Register::Edx));
            }
            let witness = Program(lines);
            let inputs = [0; 2].map(|_| {
                self.sample_until(|rng| {
                    let regs = [0; 4].map(|_| rng.gen_range(0..=9));
                    let lo = regs[min_src.index()];
                    let hi = regs[max_src.index()];
                    let ok = regs.iter().enumerate().all(|(i, &v)| {
                        (i == min_src.index() || v > lo) && (i == max_src.index() || v < hi)
                    });
                    ok.then_some(regs)
                })
            });
            self.push(format!("hard-extrema-{index:02}"), Category::Hard, inputs, witness);
        }
    }
}

/// Builds the 50 easy / 40 medium / 40 hard tasks deterministically from
/// `seed`.
pub fn build_suites(seed: u64) -> BenchSuites {
    let mut b = SuiteBuilder {
        tasks: Vec::with_capacity(130),
        rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::BENCH)),
    };

    b.binary_reg_tasks(Opcode::Addl, "add");
    b.binary_reg_tasks(Opcode::Subl, "sub");
    b.binary_reg_tasks(Opcode::Imull, "mul");
    b.extremum_tasks(7, true, "min");
    b.extremum_tasks(7, false, "max");

    b.push_pinned(
        String::from("medium-add-30-algebra"),
        Category::Medium,
        [([5, 1, 7, 8], [5, 1, 37, 8]), ([4, 3, 7, 0], [4, 3, 30, 0])],
        Program::parse("imull %eax, %ecx\naddl $2, %ecx").expect("witness parses"),
    );
    b.big_constant_tasks(19, Opcode::Addl, "add");
    b.big_constant_tasks(20, Opcode::Subl, "sub");

    b.switch_tasks(12);
    b.sort_tasks(10);
    b.filter_tasks(10);
    b.two_extrema_tasks(8);

    assert_eq!(b.tasks.iter().filter(|t| t.category == Category::Easy).count(), 50);
    assert_eq!(b.tasks.iter().filter(|t| t.category == Category::Medium).count(), 40);
    assert_eq!(b.tasks.iter().filter(|t| t.category == Category::Hard).count(), 40);
    BenchSuites { tasks: b.tasks }
}

/// Distance-based state score: mean over pairs of `1 / (1 + ‖current −
/// target‖₂)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct L2Heuristic;

impl StateValue for L2Heuristic {
    fn estimate(&self, currents: &[MachineState], targets: &[MachineState]) -> f64 {
        let mut total = 0.0;
        for (c, t) in currents.iter().zip(targets) {
            let mut sq = 0.0;
            for (a, b) in c.regs.iter().zip(&t.regs) {
                let d = (*a as f64) - (*b as f64);
                sq += d * d;
            }
            if let (Some(cr), Some(tr)) = (c.ram, t.ram) {
                for (a, b) in cr.iter().zip(&tr) {
                    let d = (*a as f64) - (*b as f64);
                    sq += d * d;
                }
            }
            total += 1.0 / (1.0 + libm::sqrt(sq));
        }
        total / currents.len() as f64
    }
}

/// Solver budgets: sampled programs for the decode baselines, search knobs
/// for the tree baselines.
#[derive(Clone, Copy, Debug)]
pub struct BenchBudget {
    pub program_samples: usize,
    pub search: SearchConfig,
}

impl Default for BenchBudget {
    fn default() -> BenchBudget {
        BenchBudget { program_samples: 64, search: SearchConfig::default() }
    }
}

/// Result of one baseline on one task.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutcome {
    pub name: String,
    pub category: Category,
    pub baseline: Baseline,
    pub solved: bool,
    /// Program length when solved; committed/attempted depth when not.
    pub steps: usize,
    pub sim_calls: u64,
    /// The verified program behind a solve; `None` on failure.
    pub program: Option<Program>,
}

/// Keyed on the task id, not suite position, so splitting a suite across
/// workers cannot change any outcome.
fn per_task_rng_seed(seed: u64, baseline: Baseline, task_id: u64) -> u64 {
    let tag = match baseline {
        Baseline::Imitation => 0u64,
        Baseline::Reinforce => 1,
        Baseline::MctsPrior => 2,
        Baseline::AutoAssemblet => 3,
    };
    derive_seed(seed, (1 << 62) | (task_id << 3) | tag)
}

fn verified(task: &Task, program: &Program) -> bool {
    task.pairs.iter().all(|pair| match run(&pair.input, program) {
        Ok(end) => state_equals(&end, &pair.output).unwrap_or(false),
        Err(_) => false,
    })
}

/// Best-of-budget sampled decoding: roll whole programs at temperature 1
/// and keep the first that verifies.
fn sampling_outcome(
    bench_task: &BenchTask,
    policy: &PolicyNet,
    space: SpaceConfig,
    budget: &BenchBudget,
    rng_seed: u64,
) -> (bool, usize, u64, Option<Program>) {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let pairs = bench_task.task.pairs.len() as u64;
    let mut sim_calls = 0;
    for _ in 0..budget.program_samples {
        let episode = rollout_episode(
            policy,
            &bench_task.task,
            space,
            1.0,
            budget.search.max_depth,
            budget.search.gamma,
            &mut rng,
        );
        sim_calls += pairs * episode.len() as u64;
        if episode.success {
            let program = Program(episode.steps.iter().map(|s| s.action).collect());
            if verified(&bench_task.task, &program) {
                let steps = program.len();
                return (true, steps, sim_calls, Some(program));
            }
        }
    }
    (false, budget.search.max_depth, sim_calls, None)
}

fn search_outcome<V: StateValue + ?Sized>(
    bench_task: &BenchTask,
    policy: &PolicyNet,
    value: &V,
    space: SpaceConfig,
    budget: &BenchBudget,
    rng_seed: u64,
) -> (bool, usize, u64, Option<Program>) {
    let config = SearchConfig { seed: rng_seed, ..budget.search };
    match synthesize(&bench_task.task, policy as &dyn ActionSampler, value, space, config) {
        Ok(found) => {
            assert!(verified(&bench_task.task, &found.program), "unsound search result");
            (true, found.program.len(), found.sim_calls, Some(found.program))
        }
        Err(failure) => (false, failure.steps_taken, failure.sim_calls, None),
    }
}

/// Runs one baseline over a suite. `value` is required for
/// [`Baseline::AutoAssemblet`] only.
pub fn run_baseline(
    baseline: Baseline,
    policy: &PolicyNet,
    value: Option<&ValueNet>,
    suite: &[BenchTask],
    budget: &BenchBudget,
    seed: u64,
) -> Vec<TaskOutcome> {
    let space = policy.config().space;
    suite
        .iter()
        .map(|bench_task| {
            let rng_seed = per_task_rng_seed(seed, baseline, bench_task.task.id);
            let (solved, steps, sim_calls, program) = match baseline {
                Baseline::Imitation | Baseline::Reinforce => {
                    sampling_outcome(bench_task, policy, space, budget, rng_seed)
                }
                Baseline::MctsPrior => {
                    search_outcome(bench_task, policy, &L2Heuristic, space, budget, rng_seed)
                }
                Baseline::AutoAssemblet => {
                    let value = value.expect("autoassemblet needs a value network");
                    search_outcome(bench_task, policy, value, space, budget, rng_seed)
                }
            };
            TaskOutcome {
                name: bench_task.name.clone(),
                category: bench_task.category,
                baseline,
                solved,
                steps,
                sim_calls,
                program,
            }
        })
        .collect()
}

/// One aggregated report line; `category: None` is the whole-suite total.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub baseline: Baseline,
    pub category: Option<Category>,
    pub tasks: usize,
    pub solved: usize,
    /// Percent.
    pub success_rate: f64,
    /// Mean program length over solved tasks; `None` when nothing solved.
    pub ave_steps_solved: Option<f64>,
    /// Mean steps over all attempts, counting failures at their attempted
    /// depth.
    pub ave_steps_all: f64,
}

/// Aggregates outcomes into per-category and total rows, per baseline in
/// declaration order.
pub fn report(outcomes: &[TaskOutcome]) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    for baseline in Baseline::ALL {
        let of_baseline: Vec<&TaskOutcome> =
            outcomes.iter().filter(|o| o.baseline == baseline).collect();
        if of_baseline.is_empty() {
            continue;
        }
        let categories = [
            Some(Category::Easy),
            Some(Category::Medium),
            Some(Category::Hard),
            None,
        ];
        for category in categories {
            let selected: Vec<&&TaskOutcome> = of_baseline
                .iter()
                .filter(|o| category.is_none() || Some(o.category) == category)
                .collect();
            if selected.is_empty() {
                continue;
            }
            let solved = selected.iter().filter(|o| o.solved).count();
            let solved_steps: usize =
                selected.iter().filter(|o| o.solved).map(|o| o.steps).sum();
            let all_steps: usize = selected.iter().map(|o| o.steps).sum();
            rows.push(ReportRow {
                baseline,
                category,
                tasks: selected.len(),
                solved,
                success_rate: 100.0 * solved as f64 / selected.len() as f64,
                ave_steps_solved: (solved > 0)
                    .then(|| solved_steps as f64 / solved as f64),
                ave_steps_all: all_steps as f64 / selected.len() as f64,
            });
        }
    }
    rows
}

fn category_label(category: Option<Category>) -> &'static str {
    match category {
        Some(c) => c.name(),
        None => "total",
    }
}

/// Fixed-width text table of report rows.
pub fn report_text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:<7} {:>5} {:>6} {:>9} {:>12} {:>11}\n",
        "baseline", "tier", "tasks", "solved", "success%", "steps(solved)", "steps(all)"
    ));
    for row in rows {
        let solved_steps = match row.ave_steps_solved {
            Some(v) => format!("{v:.1}"),
            None => String::from("—"),
        };
        out.push_str(&format!(
            "{:<14} {:<7} {:>5} {:>6} {:>9.1} {:>12} {:>11.1}\n",
            row.baseline.name(),
            category_label(row.category),
            row.tasks,
            row.solved,
            row.success_rate,
            solved_steps,
            row.ave_steps_all,
        ));
    }
    out
}

/// CSV form: `category,baseline,success_rate,ave_steps,tasks,budget`.
/// `ave_steps` is the solved-only mean, empty when nothing solved.
pub fn report_csv(rows: &[ReportRow], budget: &str) -> String {
    let mut out = String::from("category,baseline,success_rate,ave_steps,tasks,budget\n");
    for row in rows {
        let steps = match row.ave_steps_solved {
            Some(v) => format!("{v:.2}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{},{},{:.1},{},{},{}\n",
            category_label(row.category),
            row.baseline.name(),
            row.success_rate,
            steps,
            row.tasks,
            budget,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetConfig;
    use crate::seeds::rng_for;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn suites_have_the_pinned_shape_and_verified_witnesses() {
        let suites = build_suites(0);
        assert_eq!(suites.tasks.len(), 130);
        assert_eq!(suites.category(Category::Easy).count(), 50);
        assert_eq!(suites.category(Category::Medium).count(), 40);
        assert_eq!(suites.category(Category::Hard).count(), 40);
        for (i, t) in suites.tasks.iter().enumerate() {
            assert_eq!(t.task.id, i as u64);
            assert_eq!(t.task.pairs.len(), 2, "{} must have two pairs", t.name);
            for pair in &t.task.pairs {
                let end = run(&pair.input, &t.witness).unwrap();
                assert_eq!(end, pair.output, "witness of {} fails", t.name);
                assert_ne!(pair.input, pair.output, "{} is already solved", t.name);
            }
        }
    }

    #[test]
    fn suites_are_deterministic_and_seed_sensitive() {
        assert_eq!(build_suites(0), build_suites(0));
        assert_ne!(build_suites(0), build_suites(1));
    }

    #[test]
    fn the_first_medium_task_is_the_pinned_algebra_fixture() {
        let suites = build_suites(0);
        let algebra = suites.category(Category::Medium).next().unwrap();
        assert_eq!(algebra.task.pairs[0].input, MachineState::regs_only([5, 1, 7, 8]));
        assert_eq!(algebra.task.pairs[0].output, MachineState::regs_only([5, 1, 37, 8]));
        assert_eq!(algebra.task.pairs[1].input, MachineState::regs_only([4, 3, 7, 0]));
        assert_eq!(algebra.task.pairs[1].output, MachineState::regs_only([4, 3, 30, 0]));
    }

    #[test]
    fn l2_heuristic_matches_hand_values() {
        let h = L2Heuristic;
        let solved = MachineState::regs_only([3, 4, 0, 0]);
        assert_eq!(h.estimate(&[solved], &[solved]), 1.0);
        let start = MachineState::regs_only([0, 0, 0, 0]);
        let target = MachineState::regs_only([3, 4, 0, 0]);
        assert!((h.estimate(&[start], &[target]) - 1.0 / 6.0).abs() < 1e-15);
        let mixed = h.estimate(&[start, solved], &[target, solved]);
        assert!((mixed - (1.0 / 6.0 + 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn baseline_names_round_trip() {
        for b in Baseline::ALL {
            assert_eq!(b.name().parse::<Baseline>(), Ok(b));
        }
        assert_eq!("nonsense".parse::<Baseline>(), Err(UnknownName));
        for c in Category::ALL {
            assert_eq!(c.name().parse::<Category>(), Ok(c));
        }
    }

    #[test]
    fn baselines_report_sound_verified_outcomes() {
        let space = suite_space();
        let suites = build_suites(3);
        let suite = &suites.tasks[..3];
        let config = NetConfig { d_emb: 4, hidden: 16, ..NetConfig::new(space, SUITE_PAIRS) };
        let policy = PolicyNet::new(config.clone(), &mut rng_for(3, streams::POLICY_INIT));
        let value = ValueNet::new(config, &mut rng_for(3, streams::VALUE_INIT));
        let budget = BenchBudget {
            program_samples: 4,
            search: SearchConfig { simulations_per_move: 8, max_depth: 4, ..SearchConfig::default() },
        };
        for baseline in Baseline::ALL {
            let outcomes = run_baseline(baseline, &policy, Some(&value), suite, &budget, 9);
            assert_eq!(outcomes.len(), suite.len());
            for (o, t) in outcomes.iter().zip(suite) {
                assert_eq!(o.name, t.name);
                assert_eq!(o.baseline, baseline);
                if o.solved {
                    assert!(o.steps >= 1);
                }
            }
            let again = run_baseline(baseline, &policy, Some(&value), suite, &budget, 9);
            assert_eq!(outcomes, again);
        }
    }

    #[test]
    fn report_aggregates_categories_and_formats_empty_cells() {
        let mk = |category, solved, steps| TaskOutcome {
            name: "t".to_string(),
            category,
            baseline: Baseline::Imitation,
            solved,
            steps,
            sim_calls: 10,
            program: None,
        };
        let mut outcomes = vec![];
        for _ in 0..41 {
            outcomes.push(mk(Category::Easy, true, 2));
        }
        for _ in 0..9 {
            outcomes.push(mk(Category::Easy, false, 12));
        }
        outcomes.push(mk(Category::Medium, true, 3));
        outcomes.push(mk(Category::Medium, true, 4));
        outcomes.push(mk(Category::Hard, false, 12));
        let rows = report(&outcomes);
        assert_eq!(rows.len(), 4);
        let easy = &rows[0];
        assert_eq!(easy.category, Some(Category::Easy));
        assert_eq!(easy.tasks, 50);
        assert_eq!(easy.solved, 41);
        assert!((easy.success_rate - 82.0).abs() < 1e-12);
        assert_eq!(easy.ave_steps_solved, Some(2.0));
        let medium = &rows[1];
        assert_eq!(medium.ave_steps_solved, Some(3.5));
        let hard = &rows[2];
        assert_eq!(hard.ave_steps_solved, None);
        assert_eq!(hard.success_rate, 0.0);
        let total = &rows[3];
        assert_eq!(total.tasks, 53);
        assert_eq!(total.solved, 43);

        let text = report_text(&rows);
        assert!(text.contains('—'));
        assert!(text.contains("imitation"));
        let csv = report_csv(&rows, "s64");
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "category,baseline,success_rate,ave_steps,tasks,budget"
        );
        assert!(csv.contains("easy,imitation,82.0,2.00,50,s64"));
        assert!(csv.contains("hard,imitation,0.0,,1,s64"));
        assert!(csv.contains("total,imitation,"));
        // steps {3,4} → 3.50
        assert!(csv.contains("medium,imitation,100.0,3.50,2,s64"));
    }
}
