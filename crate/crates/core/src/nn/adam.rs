//! Adam optimizer with bias correction.

use alloc::vec::Vec;

use super::tensor::{ShapeMismatch, Tensor};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Per-parameter first/second moment state plus the step counter.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> Adam {
        let zeros = |shapes: &[(usize, usize)]| {
            shapes
                .iter()
                .map(|&(r, c)| Tensor::zeros(r, c))
                .collect::<Vec<_>>()
        };
        Adam { lr, t: 0, m: zeros(shapes), v: zeros(shapes) }
    }

    pub fn for_params(lr: f64, params: &[Tensor]) -> Adam {
        let shapes: Vec<(usize, usize)> = params.iter().map(Tensor::shape).collect();
        Adam::new(lr, &shapes)
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update in place. Parameter and gradient shapes must match
    /// the shapes the optimizer was built with.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[Tensor],
    ) -> Result<(), ShapeMismatch> {
        let check = |index: usize, got: (usize, usize), expected: (usize, usize)| {
            if got == expected {
                Ok(())
            } else {
                Err(ShapeMismatch { index, expected, got })
            }
        };
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(ShapeMismatch {
                index: params.len().min(grads.len()),
                expected: self.m.last().map(Tensor::shape).unwrap_or((0, 0)),
                got: (0, 0),
            });
        }
        for i in 0..self.m.len() {
            check(i, params[i].shape(), self.m[i].shape())?;
            check(i, grads[i].shape(), self.m[i].shape())?;
        }

        self.t += 1;
        let bc1 = 1.0 - libm::pow(ADAM_BETA1, self.t as f64);
        let bc2 = 1.0 - libm::pow(ADAM_BETA2, self.t as f64);
        for i in 0..self.m.len() {
            let m = &mut self.m[i].data;
            let v = &mut self.v[i].data;
            let g = &grads[i].data;
            let p = &mut params[i].data;
            for j in 0..g.len() {
                m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= self.lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPSILON);
            }
        }
        Ok(())
    }
}
