//! Training losses.
//!
//! All losses return the scalar and the full gradient set in parameter
//! order, computed on one tape per call. Empty batches yield a zero loss
//! and zero gradients.

use alloc::vec::Vec;

use crate::machine::Instruction;

use super::autodiff::{NodeId, Tape};
use super::encode::StateEncoding;
use super::policy::PolicyNet;
use super::tensor::Tensor;
use super::value::ValueNet;
use super::vocab::instruction_tokens;

/// One teacher-forcing example: a state and the instruction to prefer.
#[derive(Clone, Debug, PartialEq)]
pub struct ImitationSample {
    pub encoding: StateEncoding,
    pub action: Instruction,
}

/// One collected episode: the states seen, the actions taken, and the
/// per-step rewards.
#[derive(Clone, Debug)]
pub struct EpisodeSample {
    pub steps: Vec<ImitationSample>,
    pub rewards: Vec<f64>,
}

impl EpisodeSample {
    /// Sum of the per-step rewards.
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

fn zero_grads(params: &[Tensor]) -> Vec<Tensor> {
    params.iter().map(|p| Tensor::zeros(p.rows, p.cols)).collect()
}

/// Mean negative log-likelihood node over a teacher-forcing batch.
fn imitation_node(net: &PolicyNet, tape: &mut Tape<'_>, batch: &[ImitationSample]) -> NodeId {
    let scale = -1.0 / batch.len().max(1) as f64;
    let mut terms = Vec::with_capacity(batch.len());
    for sample in batch {
        let lp = net.log_prob_node(tape, &sample.encoding, instruction_tokens(&sample.action));
        terms.push((lp, scale));
    }
    tape.weighted_sum(&terms)
}

/// Policy-gradient loss node. Each episode weighs its action
/// log-probabilities by reward: episode-level uses the whole episode's
/// reward sum on the whole log-probability sum, per-step pairs each step
/// with its own reward. Zero-reward terms add nothing and are skipped.
fn policy_gradient_node(
    net: &PolicyNet,
    tape: &mut Tape<'_>,
    episodes: &[EpisodeSample],
    per_step: bool,
) -> NodeId {
    let scale = -1.0 / episodes.len().max(1) as f64;
    let mut terms = Vec::new();
    for episode in episodes {
        assert_eq!(
            episode.steps.len(),
            episode.rewards.len(),
            "one reward per step"
        );
        if per_step {
            for (step, &reward) in episode.steps.iter().zip(&episode.rewards) {
                if reward == 0.0 {
                    continue;
                }
                let lp =
                    net.log_prob_node(tape, &step.encoding, instruction_tokens(&step.action));
                terms.push((lp, scale * reward));
            }
        } else {
            let total = episode.total_reward();
            if total == 0.0 {
                continue;
            }
            let step_terms: Vec<(NodeId, f64)> = episode
                .steps
                .iter()
                .map(|step| {
                    let lp = net.log_prob_node(
                        tape,
                        &step.encoding,
                        instruction_tokens(&step.action),
                    );
                    (lp, 1.0)
                })
                .collect();
            let episode_lp = tape.weighted_sum(&step_terms);
            terms.push((episode_lp, scale * total));
        }
    }
    tape.weighted_sum(&terms)
}

/// Mean teacher-forcing cross-entropy and its gradients.
pub fn loss_imitation(net: &PolicyNet, batch: &[ImitationSample]) -> (f64, Vec<Tensor>) {
    if batch.is_empty() {
        return (0.0, zero_grads(net.params()));
    }
    let mut tape = net.tape();
    let loss = imitation_node(net, &mut tape, batch);
    let grads = tape.backward(loss);
    (tape.scalar(loss), grads)
}

/// Reward-weighted policy-gradient loss and its gradients.
pub fn loss_policy_gradient(
    net: &PolicyNet,
    episodes: &[EpisodeSample],
    per_step: bool,
) -> (f64, Vec<Tensor>) {
    if episodes.is_empty() {
        return (0.0, zero_grads(net.params()));
    }
    let mut tape = net.tape();
    let loss = policy_gradient_node(net, &mut tape, episodes, per_step);
    let grads = tape.backward(loss);
    (tape.scalar(loss), grads)
}

/// The pieces of a combined policy update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridLoss {
    /// `rl + lambda · imitation`.
    pub total: f64,
    pub rl: f64,
    pub imitation: f64,
}

/// Policy-gradient plus `lambda`-scaled imitation, differentiated together
/// on one tape.
pub fn loss_hybrid(
    net: &PolicyNet,
    episodes: &[EpisodeSample],
    imitation: &[ImitationSample],
    lambda: f64,
    per_step: bool,
) -> (HybridLoss, Vec<Tensor>) {
    if episodes.is_empty() && imitation.is_empty() {
        return (HybridLoss { total: 0.0, rl: 0.0, imitation: 0.0 }, zero_grads(net.params()));
    }
    let mut tape = net.tape();
    let rl = policy_gradient_node(net, &mut tape, episodes, per_step);
    let im = imitation_node(net, &mut tape, imitation);
    let total = tape.weighted_sum(&[(rl, 1.0), (im, lambda)]);
    let grads = tape.backward(total);
    (
        HybridLoss {
            total: tape.scalar(total),
            rl: tape.scalar(rl),
            imitation: tape.scalar(im),
        },
        grads,
    )
}

/// Mean squared error of the value head against scalar targets.
pub fn loss_value(net: &ValueNet, batch: &[(StateEncoding, f64)]) -> (f64, Vec<Tensor>) {
    if batch.is_empty() {
        return (0.0, zero_grads(net.params()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut tape = net.tape();
    let mut terms = Vec::with_capacity(batch.len());
    for (encoding, target) in batch {
        let v = net.value_node(&mut tape, encoding);
        let err = tape.squared_err(v, *target);
        terms.push((err, scale));
    }
    let loss = tape.weighted_sum(&terms);
    let grads = tape.backward(loss);
    (tape.scalar(loss), grads)
}
