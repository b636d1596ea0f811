//! The policy network.
//!
//! Cell embeddings feed a five-layer tanh encoder; its output seeds a GRU
//! that decodes the three instruction slots, one token each, through a
//! shared output projection. Each slot's distribution is masked to the
//! tokens legal at that point, so illegal tokens carry exactly zero
//! probability and exactly zero gradient.

use alloc::vec::Vec;

use rand::Rng;

use crate::machine::{Instruction, MachineState, SpaceConfig};

use super::autodiff::{NodeId, Tape};
use super::encode::{encode_state, StateEncoding, VALUE_VOCAB};
use super::math::{add_bias, masked_softmax, matvec, sigmoid_inplace, tanh_inplace};
use super::tensor::{check_shapes, ShapeMismatch, Tensor};
use super::vocab::{
    instruction_from_tokens, legal_dst_tokens, legal_opcode_tokens, legal_src_tokens, TOK_START,
    VOCAB,
};

/// Depth of the state encoder.
pub const ENCODER_LAYERS: usize = 5;

/// Shape of a network: embedding width, hidden width, and the state pairs
/// it reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetConfig {
    pub d_emb: usize,
    pub hidden: usize,
    pub pairs: usize,
    pub space: SpaceConfig,
}

impl NetConfig {
    /// Default widths: 16-wide embeddings, 128-wide hidden layers.
    pub fn new(space: SpaceConfig, pairs: usize) -> NetConfig {
        assert!(pairs >= 1, "networks read at least one pair");
        NetConfig { d_emb: 16, hidden: 128, pairs, space }
    }

    pub fn cells(&self) -> usize {
        self.space.cells()
    }

    /// Width of the flattened encoder input.
    pub fn encoder_input(&self) -> usize {
        self.pairs * 2 * self.cells() * self.d_emb
    }
}

pub(super) const P_EMB: usize = 0;

pub(super) fn p_enc_w(layer: usize) -> usize {
    1 + 2 * layer
}

pub(super) fn p_enc_b(layer: usize) -> usize {
    2 + 2 * layer
}

const P_TOK_EMB: usize = 11;
const P_GRU_WZ: usize = 12;
const P_GRU_BZ: usize = 13;
const P_GRU_WR: usize = 14;
const P_GRU_BR: usize = 15;
const P_GRU_WN: usize = 16;
const P_GRU_BN: usize = 17;
const P_OUT_W: usize = 18;
const P_OUT_B: usize = 19;

/// Shapes of the encoder tensors shared by both network kinds: the value
/// embedding table and five weight/bias pairs.
pub(super) fn encoder_shapes(config: &NetConfig) -> Vec<(usize, usize)> {
    let h = config.hidden;
    let mut shapes = Vec::new();
    shapes.push((VALUE_VOCAB, config.d_emb));
    for layer in 0..ENCODER_LAYERS {
        let fan_in = if layer == 0 { config.encoder_input() } else { h };
        shapes.push((h, fan_in));
        shapes.push((h, 1));
    }
    shapes
}

/// An action drawn from the policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampledAction {
    pub instruction: Instruction,
    pub tokens: [u16; 3],
    /// Log-probability of the tokens under the temperature-1 policy,
    /// regardless of the sampling temperature.
    pub log_prob: f64,
}

/// Per-slot token distributions along the greedy decode path.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotDistributions {
    /// One probability vector per slot over all 22 tokens; tokens not legal
    /// in that slot are exactly zero.
    pub probs: [Vec<f64>; 3],
    /// The greedy token of each slot.
    pub tokens: [u16; 3],
}

impl SlotDistributions {
    pub fn greedy_instruction(&self) -> Instruction {
        instruction_from_tokens(self.tokens).expect("greedy tokens form an instruction")
    }
}

#[derive(Clone, Debug)]
pub struct PolicyNet {
    config: NetConfig,
    params: Vec<Tensor>,
}

impl PolicyNet {
    pub fn param_shapes(config: &NetConfig) -> Vec<(usize, usize)> {
        let h = config.hidden;
        let d = config.d_emb;
        let mut shapes = encoder_shapes(config);
        shapes.push((VOCAB + 1, d));
        for _gate in 0..3 {
            shapes.push((h, h + d));
            shapes.push((h, 1));
        }
        shapes.push((VOCAB, h));
        shapes.push((VOCAB, 1));
        shapes
    }

    /// Fresh network: Glorot-uniform weights, ±1/√d embeddings, zero biases.
    pub fn new<R: Rng>(config: NetConfig, rng: &mut R) -> PolicyNet {
        let emb_limit = 1.0 / libm::sqrt(config.d_emb as f64);
        let params = Self::param_shapes(&config)
            .into_iter()
            .enumerate()
            .map(|(i, (rows, cols))| {
                if i == P_EMB || i == P_TOK_EMB {
                    Tensor::uniform(rows, cols, emb_limit, rng)
                } else if cols == 1 {
                    Tensor::zeros(rows, 1)
                } else {
                    let limit = libm::sqrt(6.0 / (rows + cols) as f64);
                    Tensor::uniform(rows, cols, limit, rng)
                }
            })
            .collect();
        PolicyNet { config, params }
    }

    pub fn from_params(config: NetConfig, params: Vec<Tensor>) -> Result<PolicyNet, ShapeMismatch> {
        check_shapes(&params, &Self::param_shapes(&config))?;
        Ok(PolicyNet { config, params })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.params.iter_mut().collect()
    }

    /// Encodes current/target pairs for this network. Both slices must hold
    /// exactly [`NetConfig::pairs`] states.
    pub fn encode(&self, currents: &[MachineState], targets: &[MachineState]) -> StateEncoding {
        assert_eq!(currents.len(), self.config.pairs, "wrong pair count");
        encode_state(currents, targets, self.config.space)
    }

    fn check_encoding(&self, enc: &StateEncoding) {
        assert_eq!(enc.pairs, self.config.pairs, "encoding pair count mismatch");
        assert_eq!(enc.cells, self.config.cells(), "encoding cell count mismatch");
    }

    fn encoder_hidden(&self, enc: &StateEncoding) -> Vec<f64> {
        self.check_encoding(enc);
        let emb = &self.params[P_EMB];
        let mut x = Vec::with_capacity(enc.ids.len() * self.config.d_emb);
        for &id in &enc.ids {
            x.extend_from_slice(emb.row(id as usize));
        }
        for layer in 0..ENCODER_LAYERS {
            let mut y = matvec(&self.params[p_enc_w(layer)], &x);
            add_bias(&mut y, &self.params[p_enc_b(layer)]);
            tanh_inplace(&mut y);
            x = y;
        }
        x
    }

    fn gru_step(&self, h: &[f64], token: u16) -> Vec<f64> {
        let x = self.params[P_TOK_EMB].row(token as usize);
        let mut hx = Vec::with_capacity(h.len() + x.len());
        hx.extend_from_slice(h);
        hx.extend_from_slice(x);

        let mut z = matvec(&self.params[P_GRU_WZ], &hx);
        add_bias(&mut z, &self.params[P_GRU_BZ]);
        sigmoid_inplace(&mut z);

        let mut r = matvec(&self.params[P_GRU_WR], &hx);
        add_bias(&mut r, &self.params[P_GRU_BR]);
        sigmoid_inplace(&mut r);

        let mut rhx = Vec::with_capacity(hx.len());
        for i in 0..h.len() {
            rhx.push(r[i] * h[i]);
        }
        rhx.extend_from_slice(x);
        let mut n = matvec(&self.params[P_GRU_WN], &rhx);
        add_bias(&mut n, &self.params[P_GRU_BN]);
        tanh_inplace(&mut n);

        (0..h.len())
            .map(|i| (1.0 - z[i]) * h[i] + z[i] * n[i])
            .collect()
    }

    fn output_logits(&self, h: &[f64]) -> Vec<f64> {
        let mut logits = matvec(&self.params[P_OUT_W], h);
        add_bias(&mut logits, &self.params[P_OUT_B]);
        logits
    }

    fn slot_legal(&self, slot: usize, tokens: &[u16; 3]) -> Vec<u16> {
        match slot {
            0 => legal_opcode_tokens(self.config.space),
            1 => legal_src_tokens(self.config.space, tokens[0]),
            _ => legal_dst_tokens(self.config.space, tokens[0], tokens[1]),
        }
    }

    /// Runs the three-slot decode, letting `choose` pick each token from
    /// the slot's logits and legal set.
    fn decode(
        &self,
        enc: &StateEncoding,
        mut choose: impl FnMut(usize, &[f64], &[u16]) -> u16,
    ) -> [u16; 3] {
        let mut h = self.encoder_hidden(enc);
        let mut tokens = [TOK_START; 3];
        let mut prev = TOK_START;
        for slot in 0..3 {
            h = self.gru_step(&h, prev);
            let logits = self.output_logits(&h);
            let legal = self.slot_legal(slot, &tokens);
            let tok = choose(slot, &logits, &legal);
            debug_assert!(legal.contains(&tok), "chosen token must be legal");
            tokens[slot] = tok;
            prev = tok;
        }
        tokens
    }

    /// Greedy-path slot distributions at an arbitrary softmax temperature.
    pub fn slot_distributions_at(
        &self,
        enc: &StateEncoding,
        temperature: f64,
    ) -> SlotDistributions {
        let mut probs: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        let tokens = self.decode(enc, |slot, logits, legal| {
            probs[slot] = masked_softmax(logits, legal, temperature);
            argmax_legal(logits, legal)
        });
        SlotDistributions { probs, tokens }
    }

    /// Greedy-path slot distributions at temperature 1.
    pub fn forward(&self, enc: &StateEncoding) -> SlotDistributions {
        self.slot_distributions_at(enc, 1.0)
    }

    /// The instruction the network considers most likely, slot by slot.
    pub fn greedy_action(&self, enc: &StateEncoding) -> Instruction {
        instruction_from_tokens(self.decode(enc, |_, logits, legal| argmax_legal(logits, legal)))
            .expect("greedy tokens form an instruction")
    }

    /// Samples an action at the given temperature. The reported
    /// log-probability is always evaluated at temperature 1.
    pub fn sample_action<R: Rng>(
        &self,
        enc: &StateEncoding,
        temperature: f64,
        rng: &mut R,
    ) -> SampledAction {
        let mut log_prob = 0.0;
        let tokens = self.decode(enc, |_, logits, legal| {
            let tempered = masked_softmax(logits, legal, temperature);
            let tok = sample_index(&tempered, legal, rng);
            let flat = masked_softmax(logits, legal, 1.0);
            log_prob += libm::log(flat[tok as usize]);
            tok
        });
        SampledAction {
            instruction: instruction_from_tokens(tokens)
                .expect("sampled tokens form an instruction"),
            tokens,
            log_prob,
        }
    }

    /// Teacher-forced log-probability of an instruction at temperature 1.
    pub fn log_prob_of(&self, enc: &StateEncoding, instr: &Instruction) -> f64 {
        let target = super::vocab::instruction_tokens(instr);
        let mut log_prob = 0.0;
        self.decode(enc, |slot, logits, legal| {
            let flat = masked_softmax(logits, legal, 1.0);
            log_prob += libm::log(flat[target[slot] as usize]);
            target[slot]
        });
        log_prob
    }

    /// A tape over this network's parameters.
    pub fn tape(&self) -> Tape<'_> {
        Tape::new(self.params.iter().collect())
    }

    pub(super) fn encoder_node(&self, tape: &mut Tape<'_>, enc: &StateEncoding) -> NodeId {
        self.check_encoding(enc);
        let emb = tape.param(P_EMB);
        let mut x = tape.gather(emb, &enc.ids);
        for layer in 0..ENCODER_LAYERS {
            let w = tape.param(p_enc_w(layer));
            let b = tape.param(p_enc_b(layer));
            let wx = tape.matvec(w, x);
            let pre = tape.add(wx, b);
            x = tape.tanh(pre);
        }
        x
    }

    fn gru_node(&self, tape: &mut Tape<'_>, h: NodeId, token: u16) -> NodeId {
        let tok_emb = tape.param(P_TOK_EMB);
        let x = tape.gather(tok_emb, &[token]);
        let hx = tape.concat(h, x);

        let wz = tape.param(P_GRU_WZ);
        let bz = tape.param(P_GRU_BZ);
        let z_lin = tape.matvec(wz, hx);
        let z_pre = tape.add(z_lin, bz);
        let z = tape.sigmoid(z_pre);

        let wr = tape.param(P_GRU_WR);
        let br = tape.param(P_GRU_BR);
        let r_lin = tape.matvec(wr, hx);
        let r_pre = tape.add(r_lin, br);
        let r = tape.sigmoid(r_pre);

        let rh = tape.mul(r, h);
        let rhx = tape.concat(rh, x);
        let wn = tape.param(P_GRU_WN);
        let bn = tape.param(P_GRU_BN);
        let n_lin = tape.matvec(wn, rhx);
        let n_pre = tape.add(n_lin, bn);
        let n = tape.tanh(n_pre);

        let omz = tape.one_minus(z);
        let keep = tape.mul(omz, h);
        let update = tape.mul(z, n);
        tape.add(keep, update)
    }

    /// Teacher-forced log-probability of a token triple as a tape node.
    /// Numerically matches [`log_prob_of`](PolicyNet::log_prob_of).
    pub fn log_prob_node(
        &self,
        tape: &mut Tape<'_>,
        enc: &StateEncoding,
        tokens: [u16; 3],
    ) -> NodeId {
        let mut h = self.encoder_node(tape, enc);
        let mut prev = TOK_START;
        let mut picks = Vec::with_capacity(3);
        for slot in 0..3 {
            h = self.gru_node(tape, h, prev);
            let out_w = tape.param(P_OUT_W);
            let out_b = tape.param(P_OUT_B);
            let lin = tape.matvec(out_w, h);
            let logits = tape.add(lin, out_b);
            let legal = self.slot_legal(slot, &tokens);
            assert!(
                legal.contains(&tokens[slot]),
                "token {} illegal in slot {slot}",
                tokens[slot]
            );
            let log_probs = tape.masked_log_softmax(logits, &legal);
            picks.push((tape.pick(log_probs, tokens[slot] as usize), 1.0));
            prev = tokens[slot];
        }
        tape.weighted_sum(&picks)
    }
}

fn argmax_legal(logits: &[f64], legal: &[u16]) -> u16 {
    let mut best = legal[0];
    let mut best_v = logits[best as usize];
    for &i in &legal[1..] {
        let v = logits[i as usize];
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

fn sample_index<R: Rng>(probs: &[f64], legal: &[u16], rng: &mut R) -> u16 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &i in legal {
        acc += probs[i as usize];
        if u < acc {
            return i;
        }
    }
    *legal.last().expect("legal set is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::ActionSpace;
    use crate::nn::vocab::instruction_tokens;
    use crate::seeds::rng_for;
    use crate::taskgen::{generate_pilot_program, make_task, PilotConfig};

    fn small_config(space: SpaceConfig, pairs: usize) -> NetConfig {
        NetConfig { d_emb: 4, hidden: 8, pairs, space }
    }

    fn sample_encoding(space: SpaceConfig, pairs: usize, seed: u64) -> StateEncoding {
        let cfg = PilotConfig {
            program_length: 2,
            space,
            pairs_per_task: pairs,
            ..PilotConfig::default()
        };
        let mut rng = rng_for(seed, 0);
        let program = generate_pilot_program(&cfg, &mut rng);
        let task = make_task(0, program, &cfg, &mut rng).unwrap();
        let currents: Vec<_> = task.inputs().copied().collect();
        let targets: Vec<_> = task.outputs().copied().collect();
        encode_state(&currents, &targets, space)
    }

    #[test]
    fn masked_tokens_have_zero_probability() {
        let space = SpaceConfig::new(2, false);
        let config = small_config(space, 2);
        let net = PolicyNet::new(config, &mut rng_for(21, 0));
        let enc = sample_encoding(space, 2, 22);
        let dists = net.forward(&enc);
        for (slot, probs) in dists.probs.iter().enumerate() {
            assert_eq!(probs.len(), VOCAB);
            let legal = net.slot_legal(slot, &dists.tokens);
            let mut total = 0.0;
            for (tok, &p) in probs.iter().enumerate() {
                if legal.contains(&(tok as u16)) {
                    assert!(p > 0.0);
                    total += p;
                } else {
                    assert_eq!(p, 0.0, "slot {slot} token {tok}");
                }
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_actions_are_always_legal() {
        let space = SpaceConfig::new(4, true);
        let config = small_config(space, 2);
        let net = PolicyNet::new(config, &mut rng_for(23, 0));
        let enc = sample_encoding(space, 2, 24);
        let actions = ActionSpace::enumerate(space);
        let mut rng = rng_for(25, 0);
        for temperature in [0.5, 1.0, 2.0] {
            for _ in 0..100 {
                let sampled = net.sample_action(&enc, temperature, &mut rng);
                assert!(actions.index_of(&sampled.instruction).is_some());
                assert!(sampled.log_prob <= 0.0);
                assert!(sampled.log_prob.is_finite());
            }
        }
    }

    #[test]
    fn greedy_choice_ignores_temperature() {
        let space = SpaceConfig::new(4, false);
        let config = small_config(space, 2);
        let net = PolicyNet::new(config, &mut rng_for(26, 0));
        for seed in 0..10 {
            let enc = sample_encoding(space, 2, 100 + seed);
            let base = net.forward(&enc).tokens;
            for temperature in [0.25, 0.5, 2.0, 8.0] {
                let dists = net.slot_distributions_at(&enc, temperature);
                assert_eq!(dists.tokens, base);
                for (slot, probs) in dists.probs.iter().enumerate() {
                    let max_tok = probs
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0 as u16;
                    assert_eq!(max_tok, base[slot]);
                }
            }
        }
    }

    #[test]
    fn tape_log_prob_matches_inference() {
        let space = SpaceConfig::new(4, true);
        let config = small_config(space, 2);
        let net = PolicyNet::new(config, &mut rng_for(27, 0));
        let enc = sample_encoding(space, 2, 28);
        let mut rng = rng_for(29, 0);
        for _ in 0..20 {
            let sampled = net.sample_action(&enc, 2.0, &mut rng);
            let raw = net.log_prob_of(&enc, &sampled.instruction);
            assert!((raw - sampled.log_prob).abs() < 1e-9);
            let mut tape = net.tape();
            let node = net.log_prob_node(&mut tape, &enc, instruction_tokens(&sampled.instruction));
            assert!((tape.scalar(node) - raw).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let space = SpaceConfig::new(4, false);
        let config = small_config(space, 1);
        let net = PolicyNet::new(config, &mut rng_for(30, 0));
        let enc = sample_encoding(space, 1, 31);
        let a: Vec<_> = {
            let mut rng = rng_for(32, 0);
            (0..16).map(|_| net.sample_action(&enc, 1.5, &mut rng).tokens).collect()
        };
        let b: Vec<_> = {
            let mut rng = rng_for(32, 0);
            (0..16).map(|_| net.sample_action(&enc, 1.5, &mut rng).tokens).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn from_params_checks_shapes() {
        let config = small_config(SpaceConfig::new(2, false), 1);
        let net = PolicyNet::new(config, &mut rng_for(33, 0));
        let mut params = net.params().to_vec();
        params[3] = Tensor::zeros(1, 1);
        let err = PolicyNet::from_params(config, params).unwrap_err();
        assert_eq!(err.index, 3);
        let round_trip = PolicyNet::from_params(config, net.params().to_vec()).unwrap();
        assert_eq!(round_trip.params(), net.params());
    }

    #[test]
    fn log_prob_sums_slot_picks() {
        let space = SpaceConfig::new(2, false);
        let config = small_config(space, 1);
        let net = PolicyNet::new(config, &mut rng_for(34, 0));
        let enc = sample_encoding(space, 1, 35);
        let dists = net.forward(&enc);
        let instr = dists.greedy_instruction();
        let expected: f64 = dists
            .probs
            .iter()
            .zip(instruction_tokens(&instr))
            .map(|(probs, tok)| libm::log(probs[tok as usize]))
            .sum();
        assert!((net.log_prob_of(&enc, &instr) - expected).abs() < 1e-9);
    }
}
