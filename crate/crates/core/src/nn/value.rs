//! The value network: the shared encoder plus a sigmoid scalar head.

use alloc::vec::Vec;

use rand::Rng;

use crate::machine::MachineState;

use super::autodiff::{NodeId, Tape};
use super::encode::{encode_state, StateEncoding};
use super::math::{add_bias, matvec, sigmoid, tanh_inplace};
use super::policy::{encoder_shapes, p_enc_b, p_enc_w, NetConfig, ENCODER_LAYERS, P_EMB};
use super::tensor::{check_shapes, ShapeMismatch, Tensor};

const P_HEAD_W: usize = 11;
const P_HEAD_B: usize = 12;

/// Estimates, in `(0, 1)`, how promising a current/target pairing is.
#[derive(Clone, Debug)]
pub struct ValueNet {
    config: NetConfig,
    params: Vec<Tensor>,
}

impl ValueNet {
    pub fn param_shapes(config: &NetConfig) -> Vec<(usize, usize)> {
        let mut shapes = encoder_shapes(config);
        shapes.push((1, config.hidden));
        shapes.push((1, 1));
        shapes
    }

    /// Fresh network. The head starts at zero, so an untrained network
    /// scores everything exactly 0.5.
    pub fn new<R: Rng>(config: NetConfig, rng: &mut R) -> ValueNet {
        let shapes = Self::param_shapes(&config);
        let head_start = shapes.len() - 2;
        let emb_limit = 1.0 / libm::sqrt(config.d_emb as f64);
        let params = shapes
            .into_iter()
            .enumerate()
            .map(|(i, (rows, cols))| {
                if i >= head_start || cols == 1 {
                    Tensor::zeros(rows, cols)
                } else if i == P_EMB {
                    Tensor::uniform(rows, cols, emb_limit, rng)
                } else {
                    let limit = libm::sqrt(6.0 / (rows + cols) as f64);
                    Tensor::uniform(rows, cols, limit, rng)
                }
            })
            .collect();
        ValueNet { config, params }
    }

    pub fn from_params(config: NetConfig, params: Vec<Tensor>) -> Result<ValueNet, ShapeMismatch> {
        check_shapes(&params, &Self::param_shapes(&config))?;
        Ok(ValueNet { config, params })
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

    pub fn encode(&self, currents: &[MachineState], targets: &[MachineState]) -> StateEncoding {
        assert_eq!(currents.len(), self.config.pairs, "wrong pair count");
        encode_state(currents, targets, self.config.space)
    }

    fn check_encoding(&self, enc: &StateEncoding) {
        assert_eq!(enc.pairs, self.config.pairs, "encoding pair count mismatch");
        assert_eq!(enc.cells, self.config.cells(), "encoding cell count mismatch");
    }

    /// The scalar estimate for one encoding.
    pub fn forward(&self, enc: &StateEncoding) -> f64 {
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
        let mut out = matvec(&self.params[P_HEAD_W], &x);
        add_bias(&mut out, &self.params[P_HEAD_B]);
        sigmoid(out[0])
    }

    /// A tape over this network's parameters.
    pub fn tape(&self) -> Tape<'_> {
        Tape::new(self.params.iter().collect())
    }

    /// The estimate as a scalar tape node. Numerically matches
    /// [`forward`](ValueNet::forward).
    pub fn value_node(&self, tape: &mut Tape<'_>, enc: &StateEncoding) -> NodeId {
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
        let head_w = tape.param(P_HEAD_W);
        let head_b = tape.param(P_HEAD_B);
        let lin = tape.matvec(head_w, x);
        let pre = tape.add(lin, head_b);
        tape.sigmoid(pre)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::SpaceConfig;
    use crate::seeds::rng_for;

    fn config() -> NetConfig {
        NetConfig { d_emb: 4, hidden: 8, pairs: 2, space: SpaceConfig::new(4, false) }
    }

    fn encoding(seed: u64) -> StateEncoding {
        use crate::taskgen::{generate_pilot_program, make_task, PilotConfig};
        let cfg = PilotConfig::default();
        let mut rng = rng_for(seed, 0);
        let program = generate_pilot_program(&cfg, &mut rng);
        let task = make_task(0, program, &cfg, &mut rng).unwrap();
        let currents: Vec<_> = task.inputs().copied().collect();
        let targets: Vec<_> = task.outputs().copied().collect();
        encode_state(&currents, &targets, cfg.space)
    }

    #[test]
    fn fresh_network_scores_exactly_half() {
        let net = ValueNet::new(config(), &mut rng_for(41, 0));
        for seed in 0..5 {
            assert_eq!(net.forward(&encoding(50 + seed)), 0.5);
        }
    }

    #[test]
    fn outputs_stay_in_unit_interval() {
        let mut net = ValueNet::new(config(), &mut rng_for(42, 0));
        let mut rng = rng_for(43, 0);
        for p in net.params_mut() {
            for v in p.data.iter_mut() {
                use rand::Rng;
                *v += rng.gen_range(-0.5..0.5);
            }
        }
        for seed in 0..10 {
            let v = net.forward(&encoding(60 + seed));
            assert!(v > 0.0 && v < 1.0);
        }
    }

    #[test]
    fn tape_value_matches_inference() {
        let mut net = ValueNet::new(config(), &mut rng_for(44, 0));
        let mut rng = rng_for(45, 0);
        for p in net.params_mut() {
            for v in p.data.iter_mut() {
                use rand::Rng;
                *v += rng.gen_range(-0.5..0.5);
            }
        }
        for seed in 0..5 {
            let enc = encoding(70 + seed);
            let raw = net.forward(&enc);
            let mut tape = net.tape();
            let node = net.value_node(&mut tape, &enc);
            assert!((tape.scalar(node) - raw).abs() < 1e-12);
        }
    }

    #[test]
    fn from_params_checks_shapes() {
        let net = ValueNet::new(config(), &mut rng_for(46, 0));
        let mut params = net.params().to_vec();
        params[11] = Tensor::zeros(2, 2);
        let err = ValueNet::from_params(config(), params).unwrap_err();
        assert_eq!(err.index, 11);
    }
}
