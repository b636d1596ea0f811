//! Monte Carlo tree search over programs, guided by the policy and value
//! networks.
//!
//! The tree explores one instruction per edge. Each simulation descends by
//! UCT, expands one policy-sampled child, scores the new node with a short
//! policy rollout (falling back to the value network), and backs the score
//! up to the root. After a batch of simulations the most-visited root child
//! is committed, the tree is re-rooted there, and the loop continues until
//! every pair's target is reached or the depth budget runs out. A returned
//! program is always re-executed against the task before being reported.

use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::machine::{
    state_equals, step, ActionSpace, Instruction, MachineState, Program, SpaceConfig,
};
use crate::nn::{PolicyNet, ValueNet};
use crate::taskgen::Task;

/// Proposes one instruction for the given current/target pairing.
pub trait ActionSampler {
    fn propose(
        &self,
        currents: &[MachineState],
        targets: &[MachineState],
        rng: &mut dyn RngCore,
    ) -> Instruction;
}

/// Scores a current/target pairing in `[0, 1]`.
pub trait StateValue {
    fn estimate(&self, currents: &[MachineState], targets: &[MachineState]) -> f64;
}

/// Repeats or truncates pairs so exactly `k` go to a network.
fn fit_pairs(
    currents: &[MachineState],
    targets: &[MachineState],
    k: usize,
) -> (Vec<MachineState>, Vec<MachineState>) {
    let take = |states: &[MachineState]| -> Vec<MachineState> {
        states.iter().copied().cycle().take(k).collect()
    };
    (take(currents), take(targets))
}

impl ActionSampler for PolicyNet {
    fn propose(
        &self,
        currents: &[MachineState],
        targets: &[MachineState],
        mut rng: &mut dyn RngCore,
    ) -> Instruction {
        let (c, t) = fit_pairs(currents, targets, self.config().pairs);
        let enc = self.encode(&c, &t);
        PolicyNet::sample_action(self, &enc, 1.0, &mut rng).instruction
    }
}

impl StateValue for ValueNet {
    fn estimate(&self, currents: &[MachineState], targets: &[MachineState]) -> f64 {
        let k = self.config().pairs;
        if currents.len() == k {
            let enc = self.encode(currents, targets);
            return self.forward(&enc);
        }
        // Pair counts differ from the training shape: score each pair alone
        // and average.
        let mut total = 0.0;
        for (c, t) in currents.iter().zip(targets) {
            let (cs, ts) = fit_pairs(core::slice::from_ref(c), core::slice::from_ref(t), k);
            let enc = self.encode(&cs, &ts);
            total += self.forward(&enc);
        }
        total / currents.len() as f64
    }
}

/// Samples uniformly from an action space, ignoring the states.
#[derive(Clone, Debug)]
pub struct UniformPolicy(pub ActionSpace);

impl ActionSampler for UniformPolicy {
    fn propose(
        &self,
        _currents: &[MachineState],
        _targets: &[MachineState],
        rng: &mut dyn RngCore,
    ) -> Instruction {
        let i = (&mut *rng).gen_range(0..self.0.len());
        self.0.get(i as u16)
    }
}

/// A fixed state score, for searches without a trained value network.
#[derive(Clone, Copy, Debug)]
pub struct ConstantValue(pub f64);

impl StateValue for ConstantValue {
    fn estimate(&self, _currents: &[MachineState], _targets: &[MachineState]) -> f64 {
        self.0
    }
}

/// Search knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    pub epsilon: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub rollout_limit: usize,
    pub simulations_per_move: usize,
    /// Children a node may grow before it counts as fully expanded.
    pub expansion_width: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> SearchConfig {
        SearchConfig {
            epsilon: 1.0,
            gamma: 0.9,
            max_depth: 12,
            rollout_limit: 5,
            simulations_per_move: 200,
            expansion_width: 8,
            seed: 0,
        }
    }
}

impl SearchConfig {
    fn validate(&self) {
        assert!(self.epsilon >= 0.0, "epsilon must be non-negative");
        assert!(self.gamma > 0.0 && self.gamma <= 1.0, "gamma must be in (0,1]");
        assert!(self.max_depth >= 1, "max_depth must be at least 1");
        assert!(self.rollout_limit >= 1, "rollout_limit must be at least 1");
        assert!(self.simulations_per_move >= 1, "need at least one simulation");
        assert!(self.expansion_width >= 1, "expansion_width must be at least 1");
    }
}

/// One tree node: the execution state of every pair after the path's
/// instructions.
#[derive(Clone, Debug)]
pub struct SearchNode {
    pub states: Vec<MachineState>,
    /// Committed instructions from the start of synthesis to here.
    pub depth: usize,
    pub action_from_parent: Option<u16>,
    pub parent: Option<usize>,
    /// Visits.
    pub n: u64,
    /// Sum of backed-up returns.
    pub r: f64,
    /// Simulations that ended with an evaluation at this node itself.
    pub evals: u64,
    /// `(action index, node index)` in creation order.
    pub children: Vec<(u16, usize)>,
    /// Remaining expansion budget.
    pub untried: usize,
    /// All pair states already match their targets.
    pub terminal: bool,
}

impl SearchNode {
    pub fn mean_value(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.r / self.n as f64
        }
    }
}

/// One line of a search trace.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub depth: usize,
    pub action: Instruction,
    pub visits: u64,
    pub mean_value: f64,
}

/// How many policy samples to spend per expansion before falling back to a
/// uniform untried action.
const EXPAND_SAMPLE_TRIES: usize = 64;

pub struct SearchTree {
    nodes: Vec<SearchNode>,
    root: usize,
    targets: Vec<MachineState>,
    actions: ActionSpace,
    config: SearchConfig,
    rng: ChaCha8Rng,
    sim_calls: u64,
}

impl SearchTree {
    pub fn new(task: &Task, space: SpaceConfig, config: SearchConfig) -> SearchTree {
        config.validate();
        assert!(!task.pairs.is_empty(), "task needs at least one pair");
        let states: Vec<MachineState> = task.inputs().copied().collect();
        let targets: Vec<MachineState> = task.outputs().copied().collect();
        let actions = ActionSpace::enumerate(space);
        let terminal = all_match(&states, &targets);
        let untried = if terminal {
            0
        } else {
            config.expansion_width.min(actions.len())
        };
        let root = SearchNode {
            states,
            depth: 0,
            action_from_parent: None,
            parent: None,
            n: 0,
            r: 0.0,
            evals: 0,
            children: Vec::new(),
            untried,
            terminal,
        };
        SearchTree {
            nodes: alloc::vec![root],
            root: 0,
            targets,
            actions,
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            sim_calls: 0,
        }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[self.root]
    }

    pub fn node(&self, index: usize) -> &SearchNode {
        &self.nodes[index]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn actions(&self) -> &ActionSpace {
        &self.actions
    }

    /// Simulator `step` invocations made so far.
    pub fn sim_calls(&self) -> u64 {
        self.sim_calls
    }

    /// Picks a child of `node` for descent: any unvisited child first, then
    /// the UCT argmax `R/N + ε·√(2·ln P / N)`. `None` when childless.
    pub fn select_child(&self, node: usize) -> Option<usize> {
        let parent = &self.nodes[node];
        if parent.children.is_empty() {
            return None;
        }
        for &(_, c) in &parent.children {
            if self.nodes[c].n == 0 {
                return Some(c);
            }
        }
        let ln_p = libm::log(parent.n as f64);
        let mut best = parent.children[0].1;
        let mut best_score = f64::NEG_INFINITY;
        for &(_, c) in &parent.children {
            let child = &self.nodes[c];
            let score = child.mean_value()
                + self.config.epsilon * libm::sqrt(2.0 * ln_p / child.n as f64);
            if score > best_score {
                best = c;
                best_score = score;
            }
        }
        Some(best)
    }

    fn expand<P: ActionSampler + ?Sized>(&mut self, node: usize, policy: &P) -> usize {
        let (untried, terminal) = {
            let n = &self.nodes[node];
            (n.untried, n.terminal)
        };
        assert!(untried > 0 && !terminal, "expand needs untried budget");

        let action = self.pick_untried_action(node, policy);
        let parent_states = self.nodes[node].states.clone();
        let instr = self.actions.get(action);
        let child_states: Vec<MachineState> = parent_states
            .iter()
            .map(|s| step(s, &instr).expect("enumerated action executes"))
            .collect();
        self.sim_calls += child_states.len() as u64;

        let depth = self.nodes[node].depth + 1;
        let terminal = all_match(&child_states, &self.targets);
        let untried = if terminal || depth >= self.config.max_depth {
            0
        } else {
            self.config.expansion_width.min(self.actions.len())
        };
        let child = SearchNode {
            states: child_states,
            depth,
            action_from_parent: Some(action),
            parent: Some(node),
            n: 0,
            r: 0.0,
            evals: 0,
            children: Vec::new(),
            untried,
            terminal,
        };
        self.nodes.push(child);
        let child_index = self.nodes.len() - 1;
        let parent = &mut self.nodes[node];
        parent.children.push((action, child_index));
        parent.untried -= 1;
        child_index
    }

    /// Samples the policy until it proposes an action this node has not
    /// tried; after [`EXPAND_SAMPLE_TRIES`] proposals a uniformly random
    /// untried action is used instead.
    fn pick_untried_action<P: ActionSampler + ?Sized>(&mut self, node: usize, policy: &P) -> u16 {
        let is_tried = |nodes: &[SearchNode], a: u16| {
            nodes[node].children.iter().any(|&(ca, _)| ca == a)
        };
        let states = self.nodes[node].states.clone();
        for _ in 0..EXPAND_SAMPLE_TRIES {
            let instr = policy.propose(&states, &self.targets, &mut self.rng);
            let action = self
                .actions
                .index_of(&instr)
                .expect("policy proposes actions inside the space");
            if !is_tried(&self.nodes, action) {
                return action;
            }
        }
        let untried: Vec<u16> = (0..self.actions.len() as u16)
            .filter(|&a| !is_tried(&self.nodes, a))
            .collect();
        untried[self.rng.gen_range(0..untried.len())]
    }

    /// Scores a node: 1 when it already matches all targets; otherwise a
    /// temperature-1 policy rollout worth `γ^d` if it reaches the targets in
    /// `d` steps; otherwise the clamped value estimate of the node's states.
    fn evaluate<P: ActionSampler + ?Sized, V: StateValue + ?Sized>(
        &mut self,
        node: usize,
        policy: &P,
        value: &V,
    ) -> f64 {
        if self.nodes[node].terminal {
            return 1.0;
        }
        let mut states = self.nodes[node].states.clone();
        for d in 1..=self.config.rollout_limit {
            let instr = policy.propose(&states, &self.targets, &mut self.rng);
            for s in states.iter_mut() {
                *s = step(s, &instr).expect("proposed action executes");
            }
            self.sim_calls += states.len() as u64;
            if all_match(&states, &self.targets) {
                return libm::pow(self.config.gamma, d as f64);
            }
        }
        let estimate = value.estimate(&self.nodes[node].states, &self.targets);
        estimate.clamp(0.0, 1.0)
    }

    /// Adds one visit and the value to every node from `node` up to the
    /// current root.
    fn backup(&mut self, mut node: usize, value: f64) {
        self.nodes[node].evals += 1;
        loop {
            let n = &mut self.nodes[node];
            n.n += 1;
            n.r += value;
            if node == self.root {
                break;
            }
            node = n.parent.expect("non-root node has a parent");
        }
    }

    /// One select → expand → evaluate → backup pass.
    pub fn simulate<P: ActionSampler + ?Sized, V: StateValue + ?Sized>(
        &mut self,
        policy: &P,
        value: &V,
    ) {
        let mut node = self.root;
        loop {
            let n = &self.nodes[node];
            if n.terminal {
                break;
            }
            if n.untried > 0 {
                node = self.expand(node, policy);
                break;
            }
            match self.select_child(node) {
                Some(child) => node = child,
                // Depth-capped leaf: nothing to expand, nowhere to descend.
                None => break,
            }
        }
        let value = self.evaluate(node, policy, value);
        self.backup(node, value);
    }

    /// Runs a full batch of simulations and returns the action of the root
    /// child with the most visits (ties: higher mean value, then lower
    /// action index).
    pub fn search_step<P: ActionSampler + ?Sized, V: StateValue + ?Sized>(
        &mut self,
        policy: &P,
        value: &V,
    ) -> u16 {
        assert!(!self.root().terminal, "search_step requires a non-terminal root");
        for _ in 0..self.config.simulations_per_move {
            self.simulate(policy, value);
        }
        let root = &self.nodes[self.root];
        assert!(!root.children.is_empty(), "no legal expansion happened at the root");
        let mut best: Option<(u16, u64, f64)> = None;
        for &(action, c) in &root.children {
            let n = self.nodes[c].n;
            let mean = self.nodes[c].mean_value();
            let better = match best {
                None => true,
                Some((ba, bn, bm)) => {
                    n > bn || (n == bn && (mean > bm || (mean == bm && action < ba)))
                }
            };
            if better {
                best = Some((action, n, mean));
            }
        }
        best.expect("root has children").0
    }

    /// Re-roots the tree at the root child reached by `action`.
    pub fn advance_root(&mut self, action: u16) {
        let child = self.nodes[self.root]
            .children
            .iter()
            .find(|&&(a, _)| a == action)
            .map(|&(_, c)| c)
            .expect("advance_root follows an existing child");
        self.root = child;
    }

    /// Flat trace of the current root's subtree in breadth-first order.
    pub fn trace_records(&self) -> Vec<TraceRecord> {
        let mut records = Vec::new();
        let mut queue = alloc::collections::VecDeque::new();
        queue.push_back(self.root);
        while let Some(i) = queue.pop_front() {
            let node = &self.nodes[i];
            if let Some(action) = node.action_from_parent {
                if i != self.root {
                    records.push(TraceRecord {
                        depth: node.depth,
                        action: self.actions.get(action),
                        visits: node.n,
                        mean_value: node.mean_value(),
                    });
                }
            }
            for &(_, c) in &node.children {
                queue.push_back(c);
            }
        }
        records
    }
}

fn all_match(currents: &[MachineState], targets: &[MachineState]) -> bool {
    currents
        .iter()
        .zip(targets)
        .all(|(c, t)| state_equals(c, t).expect("states share a configuration"))
}

/// A successful synthesis: the program and the simulator budget it used.
#[derive(Clone, Debug)]
pub struct Synthesized {
    pub program: Program,
    pub sim_calls: u64,
}

/// An exhausted synthesis: how far it got and what it spent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisFailure {
    pub steps_taken: usize,
    pub sim_calls: u64,
}

impl core::fmt::Display for SynthesisFailure {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "no program found within {} committed steps", self.steps_taken)
    }
}

impl core::error::Error for SynthesisFailure {}

/// Searches for a program taking every task input to its output. Commits
/// one instruction per search batch, re-rooting the tree each time. A
/// returned program has been re-executed on all pairs.
pub fn synthesize<P: ActionSampler + ?Sized, V: StateValue + ?Sized>(
    task: &Task,
    policy: &P,
    value: &V,
    space: SpaceConfig,
    config: SearchConfig,
) -> Result<Synthesized, SynthesisFailure> {
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
        instructions.push(tree.actions().get(action));
        tree.advance_root(action);
    }
    let program = Program(instructions);
    for pair in &task.pairs {
        let end = crate::machine::run(&pair.input, &program)
            .expect("synthesized program executes on task inputs");
        assert!(
            state_equals(&end, &pair.output).expect("states share a configuration"),
            "synthesized program failed post-hoc verification"
        );
    }
    Ok(Synthesized { program, sim_calls: tree.sim_calls() })
}
