//! Policy and value networks.
//!
//! Both networks share an architecture: state cells become learned
//! embeddings, a five-layer tanh encoder folds them into a hidden vector,
//! and a head turns that vector into either token distributions (policy,
//! via a GRU decoder over the three instruction slots) or a success
//! estimate (value, via a sigmoid).
//!
//! Training gradients come from [`Tape`], a small reverse-mode engine that
//! records the forward computation and differentiates it exactly; inference
//! uses plain array code kept numerically in lockstep with the tape ops.

mod adam;
mod autodiff;
mod encode;
mod loss;
mod math;
mod policy;
mod tensor;
mod value;
mod vocab;

pub use adam::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use autodiff::{NodeId, Tape};
pub use encode::{encode_state, value_token, StateEncoding, VALUE_VOCAB};
pub use loss::{
    loss_hybrid, loss_imitation, loss_policy_gradient, loss_value, EpisodeSample, HybridLoss,
    ImitationSample,
};
pub use math::{entropy, masked_softmax};
pub use policy::{NetConfig, PolicyNet, SampledAction, SlotDistributions};
pub use tensor::{ShapeMismatch, Tensor};
pub use value::ValueNet;
pub use vocab::{
    instruction_from_tokens, instruction_tokens, legal_dst_tokens, legal_opcode_tokens,
    legal_src_tokens, operand_token, token_name, DIGIT_BASE, MEM_BASE, OPCODE_BASE, REG_BASE,
    TOKENS_PER_INSTRUCTION, TOK_START, VOCAB,
};
