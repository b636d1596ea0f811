//! Acceptance gate: one test per release criterion. Every test prints a
//! single `criterion N: PASS — ...` line with its measured numbers; the
//! tolerances and time budgets it holds itself to are pinned as constants
//! right here.

use std::collections::HashMap;
use std::time::Instant;

use autoasm::formats::checkpoint;
use autoasm::run::{run_bench, run_training, BenchRequest, NetDims};
use autoasm_core::bench::{build_suites, suite_space, Baseline, BenchBudget, Category, SUITE_PAIRS};
use autoasm_core::machine::{
    run, state_equals, step, ActionSpace, MachineState, Program, SpaceConfig,
};
use autoasm_core::mcts::{synthesize, ConstantValue, SearchConfig, SearchTree, UniformPolicy};
use autoasm_core::nn::{
    encode_state, entropy, loss_hybrid, loss_imitation, loss_policy_gradient, loss_value,
    masked_softmax, EpisodeSample, ImitationSample, NetConfig, PolicyNet, StateEncoding, ValueNet,
};
use autoasm_core::seeds::{derive_seed, rng_for, streams};
use autoasm_core::taskgen::{build_pool, make_task, PilotConfig, Task, TaskPool};
use autoasm_core::trainer::{
    discounted_rewards, imitation_samples, pretrain_imitation, train_epoch, Optimizers,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURE_BUDGET_S: f64 = 1.0;

const ORACLE_PROGRAMS: usize = 10_000;
const ORACLE_MAX_LINES: usize = 5;
const ORACLE_BUDGET_S: f64 = 10.0;

const GRAD_SAMPLES_PER_LOSS: usize = 250;
const GRAD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
/// Relative error turns into an absolute check below this gradient scale,
/// keeping finite-difference roundoff out of the verdict.
const GRAD_DENOM_FLOOR: f64 = 1e-3;
const GRAD_BUDGET_S: f64 = 30.0;

const TEMPERATURE_VECTORS: usize = 100;
const TEMPERATURE_LADDER: [f64; 3] = [0.5, 1.0, 2.0];
const TEMPERATURE_BUDGET_S: f64 = 1.0;

const REWEIGHT_DRAWS: usize = 100_000;
const REWEIGHT_TOLERANCE_SIGMAS: f64 = 3.0;
const REWEIGHT_BUDGET_S: f64 = 5.0;

const BOOKKEEPING_SIMULATIONS: usize = 500;
const BOOKKEEPING_BUDGET_S: f64 = 10.0;

const DEPTH1_TASKS: usize = 100;
const DEPTH1_MIN_SOLVED: usize = 99;
const DEPTH1_BUDGET_S: f64 = 60.0;

const LEARNING_POOL_TASKS: usize = 5_200;
const LEARNING_TRAIN_TASKS: usize = 5_000;
const LEARNING_EVAL_TASKS: usize = 200;
const LEARNING_MIN_HOLDOUT_ACCURACY: f64 = 0.80;
const LEARNING_SIMULATIONS_PER_MOVE: usize = 200;
const LEARNING_BUDGET_S: f64 = 1_800.0;

const HARNESS_BUDGET_S: f64 = 1_200.0;

fn assert_budget(start: Instant, budget_s: f64, criterion: usize) -> f64 {
    let secs = start.elapsed().as_secs_f64();
    assert!(
        secs < budget_s,
        "criterion {criterion} took {secs:.1}s, budget is {budget_s:.0}s"
    );
    secs
}

#[test]
fn criterion_1_pinned_programs_replay_bit_exactly() {
    let start = Instant::now();

    let register_fixtures: &[(&str, &str, &[([i32; 4], [i32; 4])])] = &[
        (
            "algebra",
            "imull %eax, %ecx\naddl $2, %ecx",
            &[([5, 1, 7, 8], [5, 1, 37, 8]), ([4, 3, 7, 0], [4, 3, 30, 0])],
        ),
        (
            "map",
            "addl $1, %ebx\naddl $1, %edx\naddl $1, %eax\naddl $2, %ecx\nsubl $0, %ecx\nsubl $1, %ecx",
            &[([8, 1, 0, 7], [9, 2, 1, 8]), ([2, 4, 5, 7], [3, 5, 6, 8])],
        ),
        ("sort", "addl $4, %ebx\nsubl $4, %eax", &[([5, 1, 7, 8], [1, 5, 7, 8])]),
    ];
    let mut pairs_checked = 0;
    for (name, text, cases) in register_fixtures {
        let program = Program::parse(text).expect("fixture parses");
        for &(input, expected) in *cases {
            let end = run(&MachineState::regs_only(input), &program).expect("fixture executes");
            assert_eq!(end, MachineState::regs_only(expected), "{name} fixture diverged");
            pairs_checked += 1;
        }
    }

    let load_store =
        Program::parse("movl -8(%rbp), %ebx\nsubl $3, %ebx\nmovl %ebx, -4(%rbp)").unwrap();
    let ram_cases =
        [([2, 8, 0, 1], [0, -3, 0, 0], [2, -3, 0, 1]), ([6, 5, 4, 9], [0, 1, 0, 0], [6, 1, 4, 9])];
    for (ram_in, regs_out, ram_out) in ram_cases {
        let end = run(&MachineState::with_ram([0; 4], ram_in), &load_store).unwrap();
        assert_eq!(end, MachineState::with_ram(regs_out, ram_out), "load/store fixture diverged");
        pairs_checked += 1;
    }

    // Parse-only fixture: its recorded end states contradict executing its
    // own listing, so only the text round-trip is held.
    let filter = Program::parse(
        "subl $1, %ecx\nsubl $2, %eax\naddl $4, %edx\nsubl $4, %edx\naddl $4, %edx",
    )
    .unwrap();
    assert_eq!(filter.len(), 5);
    assert_eq!(Program::parse(&filter.to_string()).unwrap(), filter);

    let secs = assert_budget(start, FIXTURE_BUDGET_S, 1);
    println!(
        "criterion 1: PASS — 4 fixture programs bit-exact on {pairs_checked} state pairs, \
         1 parse-only, in {secs:.3}s"
    );
}

/// Reference operand of the interpreter below: everything is re-derived
/// from instruction text, never from the library's data model.
enum RefOperand {
    Imm(i64),
    Reg(usize),
    Mem(usize),
}

fn ref_operand(text: &str) -> RefOperand {
    let text = text.trim();
    if let Some(digits) = text.strip_prefix('$') {
        return RefOperand::Imm(digits.parse().expect("immediate digits"));
    }
    match text {
        "%eax" => RefOperand::Reg(0),
        "%ebx" => RefOperand::Reg(1),
        "%ecx" => RefOperand::Reg(2),
        "%edx" => RefOperand::Reg(3),
        _ => {
            let offset: usize = text
                .strip_prefix('-')
                .and_then(|t| t.strip_suffix("(%rbp)"))
                .expect("operand is a stack slot")
                .parse()
                .expect("slot offset");
            RefOperand::Mem(offset / 4)
        }
    }
}

/// Two's-complement 32-bit wrap of an exact integer result.
fn ref_wrap(value: i64) -> i32 {
    (((value + (1i64 << 31)).rem_euclid(1i64 << 32)) - (1i64 << 31)) as i32
}

/// Independent interpreter: parses instruction text itself and computes in
/// exact `i64` arithmetic before wrapping.
fn ref_execute(text: &str, mut regs: [i32; 4], mut ram: [i32; 4]) -> ([i32; 4], [i32; 4]) {
    let read = |op: &RefOperand, regs: &[i32; 4], ram: &[i32; 4]| -> i64 {
        match op {
            RefOperand::Imm(v) => *v,
            RefOperand::Reg(i) => regs[*i] as i64,
            RefOperand::Mem(i) => ram[*i] as i64,
        }
    };
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (mnemonic, rest) = line.split_once(' ').expect("opcode then operands");
        let (src_text, dst_text) = rest.split_once(',').expect("two operands");
        let src = ref_operand(src_text);
        let dst = ref_operand(dst_text);
        let s = read(&src, &regs, &ram);
        let d = read(&dst, &regs, &ram);
        let exact = match mnemonic {
            "addl" => d + s,
            "subl" => d - s,
            "imull" => d * s,
            "movl" => s,
            other => panic!("unknown opcode {other}"),
        };
        let value = ref_wrap(exact);
        match dst {
            RefOperand::Reg(i) => regs[i] = value,
            RefOperand::Mem(i) => ram[i] = value,
            RefOperand::Imm(_) => panic!("immediate destination"),
        }
    }
    (regs, ram)
}

#[test]
fn criterion_2_simulator_agrees_with_reference_interpreter() {
    let start = Instant::now();
    let space = SpaceConfig::new(4, true);
    let actions = ActionSpace::enumerate(space);
    assert_eq!(actions.len(), 456);

    let extremes = [i32::MIN, i32::MAX, 0, 1, -1];
    let mut rng = ChaCha8Rng::seed_from_u64(2_000);
    for case in 0..ORACLE_PROGRAMS {
        let lines = rng.gen_range(1..=ORACLE_MAX_LINES);
        let program: Program = (0..lines)
            .map(|_| actions.get(rng.gen_range(0..actions.len()) as u16))
            .collect();
        let mut regs = [0i32; 4];
        let mut ram = [0i32; 4];
        for cell in regs.iter_mut().chain(ram.iter_mut()) {
            *cell = match case % 3 {
                0 => rng.gen_range(-9..=9),
                1 => rng.gen(),
                _ => extremes[rng.gen_range(0..extremes.len())],
            };
        }

        let text = program.to_string();
        let (ref_regs, ref_ram) = ref_execute(&text, regs, ram);
        let end = run(&MachineState::with_ram(regs, ram), &program).expect("program executes");
        assert_eq!(
            (end.regs, end.ram.unwrap()),
            (ref_regs, ref_ram),
            "case {case} diverged on regs {regs:?} ram {ram:?}:\n{text}"
        );
    }

    let secs = assert_budget(start, ORACLE_BUDGET_S, 2);
    println!(
        "criterion 2: PASS — {ORACLE_PROGRAMS} random programs (≤{ORACLE_MAX_LINES} lines, \
         RAM on) match the reference interpreter exactly in {secs:.2}s"
    );
}

fn relative_error(finite_difference: f64, gradient: f64) -> f64 {
    (finite_difference - gradient).abs()
        / finite_difference.abs().max(gradient.abs()).max(GRAD_DENOM_FLOOR)
}

/// All `(tensor, element)` coordinates of a parameter list, shuffled.
fn shuffled_coordinates(lens: &[usize], rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    use rand::seq::SliceRandom;
    let mut coords: Vec<(usize, usize)> = lens
        .iter()
        .enumerate()
        .flat_map(|(t, &len)| (0..len).map(move |i| (t, i)))
        .collect();
    coords.shuffle(rng);
    coords
}

#[test]
fn criterion_3_loss_gradients_match_central_differences() {
    let start = Instant::now();
    let space = SpaceConfig::new(2, false);
    let net_config = NetConfig { d_emb: 4, hidden: 8, pairs: 2, space };
    let mut policy = PolicyNet::new(net_config, &mut ChaCha8Rng::seed_from_u64(3_000));
    let mut value_net = ValueNet::new(net_config, &mut ChaCha8Rng::seed_from_u64(3_001));

    let pilot = PilotConfig {
        program_length: 2,
        space,
        pairs_per_task: 2,
        init_value_range: (0, 9),
    };
    let pool = build_pool(4, &pilot, &mut ChaCha8Rng::seed_from_u64(3_002)).unwrap().pool;

    let mut imitation = Vec::new();
    for task in pool.tasks() {
        imitation.extend(imitation_samples(task, space).unwrap());
    }
    let mut episodes = Vec::new();
    for task in pool.tasks() {
        let gold = task.gold.clone().unwrap();
        let targets: Vec<MachineState> = task.outputs().copied().collect();
        let mut currents: Vec<MachineState> = task.inputs().copied().collect();
        let mut steps = Vec::new();
        for instr in gold.iter() {
            steps.push(ImitationSample {
                encoding: encode_state(&currents, &targets, space),
                action: *instr,
            });
            for state in currents.iter_mut() {
                *state = step(state, instr).unwrap();
            }
        }
        let rewards = discounted_rewards(steps.len(), true, 0.9);
        episodes.push(EpisodeSample { steps, rewards });
    }
    let value_batch: Vec<(StateEncoding, f64)> = episodes
        .iter()
        .flat_map(|e| e.steps.iter().zip(&e.rewards).map(|(s, &r)| (s.encoding.clone(), r)))
        .collect();

    let mut coord_rng = ChaCha8Rng::seed_from_u64(3_003);
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;

    let hybrid_lambda = 0.7;
    let policy_losses: Vec<(&str, Box<dyn Fn(&PolicyNet) -> f64>)> = vec![
        ("imitation", Box::new(|net: &PolicyNet| loss_imitation(net, &imitation).0)),
        (
            "policy-gradient",
            Box::new(|net: &PolicyNet| loss_policy_gradient(net, &episodes, false).0),
        ),
        (
            "hybrid",
            Box::new(|net: &PolicyNet| {
                loss_hybrid(net, &episodes, &imitation, hybrid_lambda, false).0.total
            }),
        ),
    ];
    for (name, eval) in &policy_losses {
        let gradients = match *name {
            "imitation" => loss_imitation(&policy, &imitation).1,
            "policy-gradient" => loss_policy_gradient(&policy, &episodes, false).1,
            _ => loss_hybrid(&policy, &episodes, &imitation, hybrid_lambda, false).1,
        };
        let lens: Vec<usize> = policy.params().iter().map(|p| p.data.len()).collect();
        for &(t, i) in shuffled_coordinates(&lens, &mut coord_rng)
            .iter()
            .take(GRAD_SAMPLES_PER_LOSS)
        {
            let origin = policy.params()[t].data[i];
            policy.params_mut()[t].data[i] = origin + GRAD_STEP;
            let plus = eval(&policy);
            policy.params_mut()[t].data[i] = origin - GRAD_STEP;
            let minus = eval(&policy);
            policy.params_mut()[t].data[i] = origin;
            let fd = (plus - minus) / (2.0 * GRAD_STEP);
            let rel = relative_error(fd, gradients[t].data[i]);
            assert!(
                rel < GRAD_REL_TOL,
                "{name} loss gradient off at tensor {t}[{i}]: fd {fd:.3e} vs grad {:.3e}",
                gradients[t].data[i]
            );
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }

    let value_gradients = loss_value(&value_net, &value_batch).1;
    let lens: Vec<usize> = value_net.params().iter().map(|p| p.data.len()).collect();
    for &(t, i) in shuffled_coordinates(&lens, &mut coord_rng)
        .iter()
        .take(GRAD_SAMPLES_PER_LOSS)
    {
        let origin = value_net.params()[t].data[i];
        value_net.params_mut()[t].data[i] = origin + GRAD_STEP;
        let plus = loss_value(&value_net, &value_batch).0;
        value_net.params_mut()[t].data[i] = origin - GRAD_STEP;
        let minus = loss_value(&value_net, &value_batch).0;
        value_net.params_mut()[t].data[i] = origin;
        let fd = (plus - minus) / (2.0 * GRAD_STEP);
        let rel = relative_error(fd, value_gradients[t].data[i]);
        assert!(
            rel < GRAD_REL_TOL,
            "value loss gradient off at tensor {t}[{i}]: fd {fd:.3e} vs grad {:.3e}",
            value_gradients[t].data[i]
        );
        max_rel = max_rel.max(rel);
        checked += 1;
    }

    assert!(checked >= 1_000, "only {checked} coordinates were checked");
    let secs = assert_budget(start, GRAD_BUDGET_S, 3);
    println!(
        "criterion 3: PASS — max relative error {max_rel:.2e} over {checked} sampled \
         parameters across 4 losses in {secs:.2}s"
    );
}

#[test]
fn criterion_4_temperature_shapes_entropy_but_not_argmax() {
    let start = Instant::now();
    let legal: Vec<u16> = (0..22).collect();
    let argmax = |values: &[f64]| {
        values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0
    };

    let mut rng = ChaCha8Rng::seed_from_u64(4_000);
    for _ in 0..TEMPERATURE_VECTORS {
        let logits: Vec<f64> = (0..legal.len()).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let sharpest = argmax(&logits);
        let entropies: Vec<f64> = TEMPERATURE_LADDER
            .iter()
            .map(|&tau| {
                let probs = masked_softmax(&logits, &legal, tau);
                assert_eq!(argmax(&probs), sharpest, "argmax moved at temperature {tau}");
                entropy(&probs)
            })
            .collect();
        assert!(
            entropies[0] < entropies[1] && entropies[1] < entropies[2],
            "entropy not strictly increasing in temperature: {entropies:?}"
        );
    }

    let secs = assert_budget(start, TEMPERATURE_BUDGET_S, 4);
    println!(
        "criterion 4: PASS — entropy strictly increasing over τ {TEMPERATURE_LADDER:?} and \
         argmax invariant on {TEMPERATURE_VECTORS} logit vectors in {secs:.3}s"
    );
}

#[test]
fn criterion_5_failure_weighting_dominates_sampling() {
    let start = Instant::now();
    let pilot = PilotConfig {
        program_length: 1,
        space: SpaceConfig::new(1, false),
        pairs_per_task: 1,
        init_value_range: (0, 9),
    };
    let mut pool = build_pool(10, &pilot, &mut ChaCha8Rng::seed_from_u64(5_000)).unwrap().pool;
    let failing_task = 3u64;
    for _ in 0..5 {
        pool.update_weight(failing_task, false).unwrap();
    }

    let expected = 5f64.exp() / (5f64.exp() + 9.0);
    let probability = pool.sampling_probabilities()[failing_task as usize];
    assert!((probability - expected).abs() < 1e-12, "softmax drifted: {probability}");
    assert!(probability > 0.5);

    let draws = pool.sample_batch(REWEIGHT_DRAWS, &mut ChaCha8Rng::seed_from_u64(5_001));
    let hits = draws.iter().filter(|&&id| id == failing_task).count();
    let frequency = hits as f64 / REWEIGHT_DRAWS as f64;
    let sigma = (expected * (1.0 - expected) / REWEIGHT_DRAWS as f64).sqrt();
    assert!(
        (frequency - expected).abs() <= REWEIGHT_TOLERANCE_SIGMAS * sigma,
        "frequency {frequency:.5} not within {REWEIGHT_TOLERANCE_SIGMAS}σ of {expected:.5} \
         (σ = {sigma:.2e})"
    );

    let secs = assert_budget(start, REWEIGHT_BUDGET_S, 5);
    println!(
        "criterion 5: PASS — probability {probability:.4}, frequency {frequency:.4} within \
         {REWEIGHT_TOLERANCE_SIGMAS}σ of {expected:.4} over {REWEIGHT_DRAWS} draws in {secs:.2}s"
    );
}

#[test]
fn criterion_6_search_bookkeeping_stays_consistent() {
    let start = Instant::now();
    let space = SpaceConfig::new(4, false);
    let pilot = PilotConfig {
        program_length: 3,
        space,
        pairs_per_task: 2,
        init_value_range: (0, 9),
    };
    let pool = build_pool(6, &pilot, &mut ChaCha8Rng::seed_from_u64(6_000)).unwrap().pool;

    let uniform = UniformPolicy(ActionSpace::enumerate(space));
    let flat_value = ConstantValue(0.25);
    let net_config = NetConfig { d_emb: 4, hidden: 8, pairs: 2, space };
    let policy_net = PolicyNet::new(net_config, &mut ChaCha8Rng::seed_from_u64(6_001));
    let value_net = ValueNet::new(net_config, &mut ChaCha8Rng::seed_from_u64(6_002));

    let mut nodes_checked = 0usize;
    for (index, task) in pool.tasks().iter().enumerate() {
        let config = SearchConfig {
            simulations_per_move: BOOKKEEPING_SIMULATIONS,
            max_depth: 5,
            expansion_width: 8,
            seed: 6_100 + index as u64,
            ..SearchConfig::default()
        };
        let mut tree = SearchTree::new(task, space, config);
        if index % 2 == 0 {
            tree.search_step(&uniform, &flat_value);
        } else {
            tree.search_step(&policy_net, &value_net);
        }

        assert_eq!(tree.root().n, BOOKKEEPING_SIMULATIONS as u64, "root visits != simulations");
        for node_index in 0..tree.node_count() {
            let node = tree.node(node_index);
            let child_visits: u64 =
                node.children.iter().map(|&(_, child)| tree.node(child).n).sum();
            assert_eq!(
                node.n,
                node.evals + child_visits,
                "visit conservation broken at node {node_index} of task {index}"
            );
            let mean = node.mean_value();
            assert!(
                (0.0..=1.0).contains(&mean),
                "mean value {mean} outside [0,1] at node {node_index}"
            );
            nodes_checked += 1;
        }
    }

    let secs = assert_budget(start, BOOKKEEPING_BUDGET_S, 6);
    println!(
        "criterion 6: PASS — {nodes_checked} nodes over {} searches of \
         {BOOKKEEPING_SIMULATIONS} simulations conserve visits with means in [0,1] in {secs:.2}s",
        pool.len()
    );
}

#[test]
fn criterion_7_single_step_search_matches_brute_force() {
    let start = Instant::now();
    let space = SpaceConfig::new(4, false);
    let actions = ActionSpace::enumerate(space);
    assert_eq!(actions.len(), 224);

    let pilot = PilotConfig {
        program_length: 1,
        space,
        pairs_per_task: 2,
        init_value_range: (0, 9),
    };
    let uniform = UniformPolicy(actions.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7_000);
    let mut solved = 0usize;
    for index in 0..DEPTH1_TASKS {
        let task = loop {
            let line = actions.get(rng.gen_range(0..actions.len()) as u16);
            let program: Program = std::iter::once(line).collect();
            if let Ok(task) = make_task(index as u64, program, &pilot, &mut rng) {
                break task;
            }
        };

        let solving: Vec<u16> = (0..actions.len() as u16)
            .filter(|&action| {
                let instr = actions.get(action);
                task.pairs.iter().all(|pair| step(&pair.input, &instr).unwrap() == pair.output)
            })
            .collect();
        assert!(!solving.is_empty(), "task {index} lost its own gold action");

        let config = SearchConfig {
            simulations_per_move: 500,
            expansion_width: actions.len(),
            max_depth: 2,
            seed: 7_100 + index as u64,
            ..SearchConfig::default()
        };
        let mut tree = SearchTree::new(&task, space, config);
        let chosen = tree.search_step(&uniform, &ConstantValue(0.0));
        if solving.contains(&chosen) {
            solved += 1;
        }
    }

    assert!(
        solved >= DEPTH1_MIN_SOLVED,
        "only {solved}/{DEPTH1_TASKS} single-step tasks solved"
    );
    let secs = assert_budget(start, DEPTH1_BUDGET_S, 7);
    println!(
        "criterion 7: PASS — {solved}/{DEPTH1_TASKS} single-step tasks match brute force \
         over all {} actions in {secs:.1}s",
        actions.len()
    );
}

/// Greedy decoding with the raw policy: argmax line by line, no search.
fn greedy_decode(
    policy: &PolicyNet,
    task: &Task,
    space: SpaceConfig,
    max_steps: usize,
) -> (bool, u64) {
    let targets: Vec<MachineState> = task.outputs().copied().collect();
    let mut currents: Vec<MachineState> = task.inputs().copied().collect();
    let solved = |currents: &[MachineState]| {
        currents.iter().zip(&targets).all(|(c, t)| state_equals(c, t).unwrap())
    };
    let mut sim_calls = 0u64;
    for _ in 0..max_steps {
        if solved(&currents) {
            break;
        }
        let encoding = encode_state(&currents, &targets, space);
        let instr = policy.greedy_action(&encoding);
        for state in currents.iter_mut() {
            *state = step(state, &instr).expect("greedy actions execute");
            sim_calls += 1;
        }
    }
    (solved(&currents), sim_calls)
}

/// Upper bound on exact next-line accuracy for two-line tasks: enumerate every
/// two-line program consistent with all pairs, then score the best achievable
/// pick at each step — the most likely first line (max posterior mass), and one
/// line out of the second-line alias set.
fn exact_line_optimum(tasks: &[Task], actions: &ActionSpace) -> f64 {
    let n = actions.len();
    assert!(n <= 128, "alias sets are tracked in a u128 bitset");
    let mut sum = 0.0;
    for task in tasks {
        let gold = task.gold.as_ref().unwrap();
        assert_eq!(gold.0.len(), 2, "the bound is specific to two-line golds");
        let gold_first = actions.index_of(&gold.0[0]).unwrap() as usize;
        let mut best = 0u32;
        let mut total = 0u64;
        let mut gold_aliases = 0u32;
        for a in 0..n {
            let mut consistent_seconds: u128 = !0;
            for pair in &task.pairs {
                let Ok(mid) = step(&pair.input, &actions.get(a as u16)) else {
                    consistent_seconds = 0;
                    break;
                };
                let mut bits: u128 = 0;
                for b in 0..n {
                    if let Ok(fin) = step(&mid, &actions.get(b as u16)) {
                        if fin == pair.output {
                            bits |= 1 << b;
                        }
                    }
                }
                consistent_seconds &= bits;
            }
            let count = consistent_seconds.count_ones();
            best = best.max(count);
            total += u64::from(count);
            if a == gold_first {
                gold_aliases = count;
            }
        }
        assert!(total > 0 && gold_aliases > 0, "the gold program must be consistent");
        sum += best as f64 / total as f64 + 1.0 / f64::from(gold_aliases);
    }
    sum / (2.0 * tasks.len() as f64)
}

/// Desk-scale learning gate. Part (a) pins a 0.80 hold-out next-line accuracy
/// bar for imitation pretraining on two-line pools; part (b) requires
/// policy+value search to beat the greedy imitation baseline on held-out tasks
/// without exceeding its simulator-call budget.
///
/// Part (a) stays pinned even though it cannot pass: exact prediction of the
/// gold line is capped by ambiguity, not by training quality. Many distinct
/// two-line programs map the same inputs to the same outputs — commuting lines,
/// split constants (`addl $2` then `addl $3` vs `addl $1` then `addl $4`), and
/// alias lines (`addl $0` vs `imull $1`) — so the gold next line is often not
/// identifiable from machine states alone. The test measures that cap on the
/// held-out tasks by enumerating every consistent two-line program (the
/// optimum lands near 0.59 and is printed next to the verdict) and fails with
/// the shortfall on record rather than lowering the bar or switching to an
/// effect-based accuracy the trainer does not report.
#[test]
fn criterion_8_trained_search_beats_greedy_imitation() {
    let start = Instant::now();
    let space = SpaceConfig::new(2, false);
    let pilot = PilotConfig {
        program_length: 2,
        space,
        pairs_per_task: 2,
        init_value_range: (0, 9),
    };
    let build =
        build_pool(LEARNING_POOL_TASKS, &pilot, &mut ChaCha8Rng::seed_from_u64(8_000)).unwrap();
    let tasks = build.pool.tasks();
    let eval_tasks: Vec<Task> = tasks[LEARNING_TRAIN_TASKS..].to_vec();
    assert_eq!(eval_tasks.len(), LEARNING_EVAL_TASKS);
    let mut pool = TaskPool::from_parts(
        tasks[..LEARNING_TRAIN_TASKS].to_vec(),
        vec![0.0; LEARNING_TRAIN_TASKS],
        pilot,
    )
    .unwrap();

    let config = TrainConfig {
        temperatures: vec![0.5, 1.0, 2.0],
        batch_size: 32,
        epochs: 12,
        gamma: 0.9,
        lambda0: 1.0,
        lambda_decay: 0.95,
        max_steps: 3,
        policy_lr: 1e-3,
        value_lr: 1e-3,
        per_step_returns: false,
        pretrain_epochs: 14,
        pretrain_batch: 64,
        pretrain_lr: 1e-3,
        holdout_fraction: 0.1,
        pretrain_target_accuracy: LEARNING_MIN_HOLDOUT_ACCURACY,
        plateau_window: 1_000,
        plateau_min_gain: 0.0,
        seed: 8_001,
    };
    let net_config = NetConfig { d_emb: 32, hidden: 128, ..NetConfig::new(space, 2) };
    let mut policy = PolicyNet::new(net_config, &mut rng_for(config.seed, streams::POLICY_INIT));
    let report = pretrain_imitation(
        &mut policy,
        &pool,
        &config,
        &mut rng_for(config.seed, streams::PRETRAIN),
        |e| println!("  pretrain epoch {:>2}: loss {:.4}, holdout {:.3}", e.epoch, e.loss, e.holdout_accuracy),
    )
    .unwrap();
    let optimum = exact_line_optimum(&eval_tasks, &ActionSpace::enumerate(space));
    println!(
        "  pretrain holdout accuracy {:.3}; measured exact-line optimum {optimum:.3}",
        report.holdout_accuracy
    );
    let imitation_policy = policy.clone();

    let mut value = ValueNet::new(net_config, &mut rng_for(config.seed, streams::VALUE_INIT));
    let mut opts = Optimizers::new(&policy, &value, &config);
    let mut train_rng = rng_for(config.seed, streams::TRAIN);
    for epoch in 0..config.epochs {
        let m = train_epoch(&mut policy, &mut value, &mut pool, &mut opts, &config, epoch, &mut train_rng);
        println!("  rl epoch {:>2}: success {:.3}, mean length {:.2}", epoch, m.success_rate, m.mean_episode_len);
    }

    let search = SearchConfig {
        epsilon: 1.0,
        gamma: 0.9,
        max_depth: 3,
        rollout_limit: 3,
        simulations_per_move: LEARNING_SIMULATIONS_PER_MOVE,
        expansion_width: 8,
        seed: 0,
    };
    let mut greedy_solved = 0usize;
    let mut search_solved = 0usize;
    for task in &eval_tasks {
        let (greedy_ok, greedy_calls) =
            greedy_decode(&imitation_policy, task, space, search.max_depth);
        let per_task = SearchConfig { seed: derive_seed(config.seed, task.id), ..search };
        let (search_ok, search_calls) = match synthesize(task, &policy, &value, space, per_task) {
            Ok(found) => (true, found.sim_calls),
            Err(failure) => (false, failure.sim_calls),
        };
        assert!(
            greedy_calls <= search_calls,
            "greedy consumed {greedy_calls} simulator calls, above the search budget \
             {search_calls} on task {}",
            task.id
        );
        greedy_solved += greedy_ok as usize;
        search_solved += search_ok as usize;
    }

    let secs = assert_budget(start, LEARNING_BUDGET_S, 8);
    let part_a = report.holdout_accuracy >= LEARNING_MIN_HOLDOUT_ACCURACY;
    let part_b = search_solved > greedy_solved;
    println!(
        "criterion 8: {} — holdout next-line accuracy {:.3} (bar \
         {LEARNING_MIN_HOLDOUT_ACCURACY}, measured optimum for this task distribution \
         {optimum:.3}); search {search_solved}/{LEARNING_EVAL_TASKS} vs greedy \
         {greedy_solved}/{LEARNING_EVAL_TASKS} held-out solves at equal budget in {secs:.0}s",
        if part_a && part_b { "PASS" } else { "FAIL" },
        report.holdout_accuracy
    );
    assert!(
        part_b,
        "search solved {search_solved}/{LEARNING_EVAL_TASKS}, greedy {greedy_solved}: \
         no strict improvement"
    );
    assert!(
        part_a,
        "holdout next-line accuracy {:.3} is below the pinned bar \
         {LEARNING_MIN_HOLDOUT_ACCURACY}; the bar exceeds this task distribution's measured \
         exact-match optimum of {optimum:.3} — distinct two-line programs produce identical \
         behavior on both pairs, so the gold line is not identifiable from machine states alone",
        report.holdout_accuracy
    );
}

#[test]
fn criterion_9_bench_report_is_complete_and_sound() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    let pilot = PilotConfig {
        program_length: 3,
        space: suite_space(),
        pairs_per_task: SUITE_PAIRS,
        init_value_range: (0, 9),
    };
    let mut pool = build_pool(400, &pilot, &mut ChaCha8Rng::seed_from_u64(9_000)).unwrap().pool;
    let config = TrainConfig {
        batch_size: 24,
        epochs: 6,
        max_steps: 4,
        pretrain_epochs: 6,
        pretrain_batch: 64,
        pretrain_lr: 2e-3,
        pretrain_target_accuracy: 0.99,
        holdout_fraction: 0.1,
        plateau_window: 100,
        seed: 9_001,
        ..TrainConfig::default()
    };
    let artifacts = run_training(
        &mut pool,
        &config,
        NetDims { d_emb: 16, hidden: 64 },
        &dir.path().join("train"),
        false,
    )
    .unwrap();
    let policy = checkpoint::load_policy(&artifacts.imitation_policy).unwrap();
    let rl_policy = checkpoint::load_policy(artifacts.policy.as_ref().unwrap()).unwrap();
    let value = checkpoint::load_value(artifacts.value.as_ref().unwrap()).unwrap();

    let request = BenchRequest {
        baselines: Baseline::ALL.to_vec(),
        policy,
        rl_policy: Some(rl_policy),
        value: Some(value),
        budget: BenchBudget {
            program_samples: 32,
            search: SearchConfig {
                simulations_per_move: 100,
                max_depth: 6,
                expansion_width: 8,
                seed: 0,
                ..SearchConfig::default()
            },
        },
        seed: 9_001,
        suite_seed: 0,
        jobs: 4,
    };
    let bench = run_bench(&request, &dir.path().join("bench")).unwrap();

    assert_eq!(bench.outcomes.len(), 4 * 130);
    assert_eq!(bench.rows.len(), 16, "4 baselines × (3 tiers + total)");
    for baseline in Baseline::ALL {
        let rows: Vec<_> = bench.rows.iter().filter(|r| r.baseline == baseline).collect();
        let tiers: Vec<Option<Category>> = rows.iter().map(|r| r.category).collect();
        assert_eq!(
            tiers,
            [Some(Category::Easy), Some(Category::Medium), Some(Category::Hard), None],
            "{baseline} rows out of schema"
        );
        assert_eq!(rows.iter().map(|r| r.tasks).collect::<Vec<_>>(), [50, 40, 40, 130]);
        for row in rows {
            assert!((0.0..=100.0).contains(&row.success_rate));
            assert_eq!(row.ave_steps_solved.is_some(), row.solved > 0);
            assert!(row.ave_steps_all > 0.0);
        }
    }
    let text_lines: Vec<&str> = bench.text.lines().collect();
    assert_eq!(text_lines.len(), 17);
    for needle in ["baseline", "success%", "steps(solved)", "steps(all)"] {
        assert!(text_lines[0].contains(needle), "report header misses {needle}");
    }
    let csv = std::fs::read_to_string(&bench.report_csv_path).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert!(csv.starts_with("category,baseline,success_rate,ave_steps,tasks,budget"));

    let suites = build_suites(request.suite_seed);
    let by_name: HashMap<&str, &Task> =
        suites.tasks.iter().map(|t| (t.name.as_str(), &t.task)).collect();
    let mut reexecuted = 0usize;
    for outcome in &bench.outcomes {
        let task = by_name[outcome.name.as_str()];
        if outcome.solved {
            let program = outcome.program.as_ref().expect("solves carry their program");
            assert_eq!(program.len(), outcome.steps);
            for pair in &task.pairs {
                let end = run(&pair.input, program).unwrap();
                assert!(
                    state_equals(&end, &pair.output).unwrap(),
                    "{} reported solved by {} but does not re-execute",
                    outcome.name,
                    outcome.baseline
                );
            }
            reexecuted += 1;
        } else {
            assert!(outcome.program.is_none());
        }
    }

    let secs = assert_budget(start, HARNESS_BUDGET_S, 9);
    println!(
        "criterion 9: PASS — 16 report rows over 520 outcomes, {reexecuted} successes \
         re-executed to their targets in {secs:.0}s"
    );
}
