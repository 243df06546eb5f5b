//! Small elementwise building blocks: bias-free affine layers and a
//! numerically stable softmax.

use crate::error::{GaitError, Result};
use crate::numerics::matrix::Matrix;

/// y = Wx, optionally squashed elementwise with tanh. No bias term:
/// both consumers (attentional-state mixing and skeleton readout) are
/// pure linear maps.
pub fn affine_forward(w: &Matrix, x: &[f64], use_tanh: bool) -> Result<Vec<f64>> {
    if w.cols() != x.len() {
        return Err(GaitError::Shape(format!(
            "affine input length {} != {}",
            x.len(),
            w.cols()
        )));
    }
    let mut y = w.matvec(x);
    if use_tanh {
        for v in &mut y {
            *v = v.tanh();
        }
    }
    Ok(y)
}

/// Max-subtracted softmax; safe for large score magnitudes.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(GaitError::Shape("softmax of empty vector".into()));
    }
    if !scores.iter().all(|v| v.is_finite()) {
        return Err(GaitError::Numeric("non-finite softmax input".into()));
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}
