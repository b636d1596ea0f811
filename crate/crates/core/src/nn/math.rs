//! Plain array kernels shared by inference paths and tests.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;

pub(super) fn matvec(w: &Tensor, x: &[f64]) -> Vec<f64> {
    assert_eq!(w.cols, x.len(), "matrix-vector shape mismatch");
    (0..w.rows)
        .map(|r| {
            let row = w.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            acc
        })
        .collect()
}

pub(super) fn add_bias(y: &mut [f64], b: &Tensor) {
    assert_eq!(y.len(), b.len(), "bias shape mismatch");
    for (v, bv) in y.iter_mut().zip(&b.data) {
        *v += bv;
    }
}

pub(super) fn tanh_inplace(y: &mut [f64]) {
    for v in y.iter_mut() {
        *v = libm::tanh(*v);
    }
}

pub(super) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

pub(super) fn sigmoid_inplace(y: &mut [f64]) {
    for v in y.iter_mut() {
        *v = sigmoid(*v);
    }
}

/// Softmax over the `legal` indices of `logits` at the given temperature.
/// Returns a full-length vector whose non-legal entries are exactly zero.
pub fn masked_softmax(logits: &[f64], legal: &[u16], temperature: f64) -> Vec<f64> {
    assert!(temperature > 0.0, "temperature must be positive");
    assert!(!legal.is_empty(), "softmax needs at least one legal index");
    let max = legal
        .iter()
        .map(|&i| logits[i as usize])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; logits.len()];
    let mut total = 0.0;
    for &i in legal {
        let p = libm::exp((logits[i as usize] - max) / temperature);
        probs[i as usize] = p;
        total += p;
    }
    for &i in legal {
        probs[i as usize] /= total;
    }
    probs
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * libm::log(p);
        }
    }
    h
}
