//! Elementary building blocks: pooling, normalization, activations, and the
//! central finite-difference gradient used to check every backward pass.
//!
//! All reductions accumulate left to right in index order, so results do not
//! depend on how callers parallelize around them.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A dense real vector. Values are expected to be finite.
pub type Vector = Vec<f64>;

/// A sequence of equally sized frames (tokens, audio steps or keyframes).
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEmbedding {
    frames: Vec<Vector>,
}

impl SequenceEmbedding {
    pub fn new(frames: Vec<Vector>) -> Result<Self> {
        let Some(first) = frames.first() else {
            return Err(Error::EmptySequence);
        };
        let dim = first.len();
        for (frame, v) in frames.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::RaggedSequence { frame, expected: dim, actual: v.len() });
            }
        }
        Ok(Self { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames[0].len()
    }

    pub fn frames(&self) -> &[Vector] {
        &self.frames
    }
}

/// Coordinatewise arithmetic mean of the frames.
pub fn mean_pool(s: &SequenceEmbedding) -> Result<Vector> {
    if s.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut acc = alloc::vec![0.0; s.dim()];
    for frame in s.frames() {
        for (a, x) in acc.iter_mut().zip(frame) {
            *a += x;
        }
    }
    let n = s.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Euclidean norm, summed left to right.
pub fn l2_norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().fold(0.0, |acc, x| acc + x * x))
}

/// Scales `v` to unit Euclidean norm. The zero vector is returned unchanged.
pub fn l2_normalize(v: &[f64]) -> Vector {
    let norm = l2_norm(v);
    if norm == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|x| x / norm).collect()
}

/// Logistic function, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &[f64]) -> Vector {
    x.iter().copied().map(sigmoid_scalar).collect()
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vector {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vector = logits.iter().map(|z| libm::exp(z - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Central finite-difference gradient of `f` at `theta`:
/// `(f(theta + h e_j) - f(theta - h e_j)) / 2h` for every coordinate `j`.
///
/// Everything is carried in `f64`, the widest native float.
pub fn finite_diff_grad<F>(mut f: F, theta: &[f64], h: f64) -> Result<Vector>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(alloc::format!("finite-difference step must be positive, got {h}")));
    }
    let mut point = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        point[j] = theta[j] + h;
        let plus = f(&point);
        point[j] = theta[j] - h;
        let minus = f(&point);
        point[j] = theta[j];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteEvaluation { coordinate: j });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}
