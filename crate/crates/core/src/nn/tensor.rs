//! Dense row-major matrices of `f64`. Vectors are `(len, 1)` tensors.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn vector(data: Vec<f64>) -> Tensor {
        Tensor { rows: data.len(), cols: 1, data }
    }

    /// Entries drawn uniformly from `[-limit, limit)`.
    pub fn uniform<R: Rng>(rows: usize, cols: usize, limit: f64, rng: &mut R) -> Tensor {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Tensor { rows, cols, data }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A tensor did not have the shape an operation required.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeMismatch {
    pub index: usize,
    pub expected: (usize, usize),
    pub got: (usize, usize),
}

impl fmt::Display for ShapeMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tensor {} has shape {:?}, expected {:?}",
            self.index, self.got, self.expected
        )
    }
}

impl core::error::Error for ShapeMismatch {}

/// Checks a parameter list against expected shapes.
pub fn check_shapes(params: &[Tensor], shapes: &[(usize, usize)]) -> Result<(), ShapeMismatch> {
    if params.len() != shapes.len() {
        return Err(ShapeMismatch {
            index: params.len().min(shapes.len()),
            expected: shapes.get(params.len()).copied().unwrap_or((0, 0)),
            got: (0, 0),
        });
    }
    for (index, (param, &expected)) in params.iter().zip(shapes).enumerate() {
        if param.shape() != expected {
            return Err(ShapeMismatch { index, expected, got: param.shape() });
        }
    }
    Ok(())
}
