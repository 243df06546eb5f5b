//! Locality-aware attention over encoded gait states: basic alignment
//! scores, a Gaussian locality mask, masked scores, the alignment loss
//! that teaches the basic scores to stay local, context vectors, and
//! the attentional-state fusion layer.

use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};
use crate::numerics::{affine_forward, dot, softmax, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionMode {
    /// No attention at all: the decoded state passes straight through.
    None,
    /// Basic alignment scores weight the context; no alignment loss.
    Bas,
    /// Mask-multiplied scores weight the context; no alignment loss.
    Mbas,
    /// Basic scores weight the context and an alignment loss pulls them
    /// toward their masked version.
    Las,
}

impl AttentionMode {
    pub fn uses_attention(self) -> bool {
        self != AttentionMode::None
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttentionMode::None),
            "bas" => Ok(AttentionMode::Bas),
            "mbas" => Ok(AttentionMode::Mbas),
            "las" => Ok(AttentionMode::Las),
            other => Err(GaitError::Config(format!(
                "unknown attention mode '{other}' (expected none|bas|mbas|las)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttentionMode::None => "none",
            AttentionMode::Bas => "bas",
            AttentionMode::Mbas => "mbas",
            AttentionMode::Las => "las",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub mode: AttentionMode,
    /// Window radius in frames.
    pub window_radius: usize,
    /// Gaussian width; conventionally half the radius.
    pub sigma: f64,
}

impl AttentionConfig {
    pub fn new(mode: AttentionMode, window_radius: usize) -> Self {
        AttentionConfig {
            mode,
            window_radius,
            sigma: window_radius as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_radius < 1 {
            return Err(GaitError::Config("window radius must be >= 1".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(GaitError::Config("sigma must be positive".into()));
        }
        Ok(())
    }
}

impl Default for AttentionConfig {
    fn default() -> Self {
        AttentionConfig::new(AttentionMode::Las, 6)
    }
}

/// f x f matrix of per-decoding-step scores over encoder steps; row t
/// belongs to decoding step t.
pub type AlignmentMatrix = Matrix;

/// Softmax of dot products between the decoded state and every encoded
/// state: the basic alignment scores for one decoding step.
pub fn bas_scores(decoded: &[f64], encoded: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut raw = Vec::with_capacity(encoded.len());
    for h in encoded {
        if h.len() != decoded.len() {
            return Err(GaitError::Shape(format!(
                "state width {} vs {}",
                h.len(),
                decoded.len()
            )));
        }
        raw.push(dot(decoded, h));
    }
    softmax(&raw)
}

/// Gaussian locality mask for decoding step t (1-based) of f: centered
/// at p_t = f - t + 1 (the reverse-order position being reconstructed),
/// zero outside the window [p_t - D, p_t + D] clipped to [1, f].
pub fn locality_mask(t: usize, f: usize, window_radius: usize, sigma: f64) -> Result<Vec<f64>> {
    if t < 1 || t > f {
        return Err(GaitError::Config(format!("step {t} outside 1..={f}")));
    }
    let center = (f - t + 1) as f64;
    Ok(mask_centered_at(center, f, window_radius, sigma))
}

/// Mask with an explicit center; `locality_mask` fixes the center at the
/// reverse-order position, while forward-order training centers it at t.
pub(crate) fn mask_centered_at(
    center: f64,
    f: usize,
    window_radius: usize,
    sigma: f64,
) -> Vec<f64> {
    let d = window_radius as f64;
    (1..=f)
        .map(|j| {
            let dist = j as f64 - center;
            if dist.abs() <= d {
                (-dist * dist / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            }
        })
        .collect()
}

/// Elementwise mask * scores. Deliberately not renormalized: the masked
/// scores act as a regression target and, in masked mode, as context
/// weights that may sum to less than one.
pub fn mbas_scores(bas: &[f64], mask: &[f64]) -> Result<Vec<f64>> {
    if bas.len() != mask.len() {
        return Err(GaitError::Shape(format!(
            "scores length {} vs mask {}",
            bas.len(),
            mask.len()
        )));
    }
    Ok(bas.iter().zip(mask).map(|(&a, &l)| a * l).collect())
}

/// Sum of squared differences between the basic scores and their masked
/// version over all steps. The masked side is a constant target: its
/// gradient is cut in the backward pass.
pub fn la_loss(bas: &AlignmentMatrix, mbas_target: &AlignmentMatrix) -> Result<f64> {
    if bas.rows() != mbas_target.rows() || bas.cols() != mbas_target.cols() {
        return Err(GaitError::Shape("alignment matrix shapes differ".into()));
    }
    Ok(bas
        .data()
        .iter()
        .zip(mbas_target.data())
        .map(|(&a, &m)| (a - m) * (a - m))
        .sum())
}

/// Weighted sum of encoded states: c_t = sum_j scores_j * h_j.
pub fn context_vector(scores: &[f64], encoded: &[Vec<f64>]) -> Result<Vec<f64>> {
    if scores.len() != encoded.len() {
        return Err(GaitError::Shape(format!(
            "scores length {} vs {} encoded states",
            scores.len(),
            encoded.len()
        )));
    }
    let k = encoded.first().map_or(0, Vec::len);
    let mut out = vec![0.0; k];
    for (w, h) in scores.iter().zip(encoded) {
        for (o, &hj) in out.iter_mut().zip(h) {
            *o += w * hj;
        }
    }
    Ok(out)
}

/// Fuses context and decoded state: tanh(W_att [c_t; decoded]).
pub fn attentional_state(context: &[f64], decoded: &[f64], w_att: &Matrix) -> Result<Vec<f64>> {
    if w_att.cols() != context.len() + decoded.len() {
        return Err(GaitError::Shape(format!(
            "fusion weights expect {} inputs, got {}",
            w_att.cols(),
            context.len() + decoded.len()
        )));
    }
    let mut joint = Vec::with_capacity(context.len() + decoded.len());
    joint.extend_from_slice(context);
    joint.extend_from_slice(decoded);
    affine_forward(w_att, &joint, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bas_uniform_when_dots_equal() {
        // Orthogonal decoded state: every dot is 0.
        let encoded = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]];
        let scores = bas_scores(&[0.0, 0.0], &encoded).unwrap();
        for s in &scores {
            assert!((s - 1.0 / 3.0).abs() < 1e-12);
        }
        // Scaling the decoded state by zero hits the same case.
        let scores = bas_scores(&[0.0, 0.0], &[vec![3.0, 4.0], vec![-1.0, 2.0]]).unwrap();
        assert!((scores[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bas_closed_form_dots() {
        // dots = (0, ln 3) → softmax (0.25, 0.75).
        let encoded = vec![vec![0.0], vec![3.0f64.ln()]];
        let scores = bas_scores(&[1.0], &encoded).unwrap();
        assert!((scores[0] - 0.25).abs() < 1e-12);
        assert!((scores[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn bas_rejects_width_mismatch() {
        assert!(bas_scores(&[1.0, 2.0], &[vec![1.0]]).is_err());
    }

    #[test]
    fn mask_peak_and_reference_value() {
        let f = 12;
        for t in 1..=f {
            let mask = locality_mask(t, f, 6, 3.0).unwrap();
            let p = f - t + 1;
            assert_eq!(mask[p - 1], 1.0);
            // Non-increasing away from the peak.
            for j in p..f {
                assert!(mask[j] <= mask[j - 1] + 1e-15);
            }
            for j in (1..p).rev() {
                assert!(mask[j - 1] <= mask[j] + 1e-15);
            }
        }
        // Three frames from the center at sigma = 3: exp(-9/18).
        let mask = locality_mask(6, 12, 6, 3.0).unwrap();
        let p = 7;
        let expect = (-0.5f64).exp();
        assert!((mask[p - 1 + 3] - expect).abs() < 1e-12);
        assert!((mask[p - 1 - 3] - expect).abs() < 1e-12);
    }

    #[test]
    fn mask_symmetric_and_clipped() {
        let f = 20;
        let mask = locality_mask(10, f, 6, 3.0).unwrap();
        let p = f - 10 + 1; // 11
        for delta in 1..=6usize {
            assert_eq!(mask[p - 1 + delta], mask[p - 1 - delta]);
        }
        // Outside the window: zero.
        assert_eq!(mask[p - 1 - 7], 0.0);
        assert_eq!(mask[p - 1 + 7], 0.0);
        // Window clipping: center at f means indices above f simply don't exist.
        let edge = locality_mask(1, 6, 6, 3.0).unwrap();
        assert_eq!(edge.len(), 6);
        assert_eq!(edge[5], 1.0);
    }

    #[test]
    fn mask_rejects_out_of_range_step() {
        assert!(locality_mask(0, 6, 6, 3.0).is_err());
        assert!(locality_mask(7, 6, 6, 3.0).is_err());
    }

    #[test]
    fn mbas_elementwise_cases() {
        let bas = vec![0.25; 4];
        assert_eq!(mbas_scores(&bas, &[1.0; 4]).unwrap(), bas);
        assert_eq!(mbas_scores(&bas, &[0.0; 4]).unwrap(), vec![0.0; 4]);
        let half = (-0.5f64).exp();
        let got = mbas_scores(&bas, &[1.0, half, 0.0, 0.0]).unwrap();
        assert_eq!(got, vec![0.25, 0.25 * half, 0.0, 0.0]);
        assert!(mbas_scores(&bas, &[1.0]).is_err());
    }

    #[test]
    fn la_loss_cases() {
        let a = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let m = Matrix::from_vec(1, 1, vec![0.5]).unwrap();
        assert_eq!(la_loss(&a, &m).unwrap(), 0.25);
        assert_eq!(la_loss(&a, &a).unwrap(), 0.0);
        let b = Matrix::from_vec(2, 2, vec![0.2, -0.4, 0.9, 0.1]).unwrap();
        let c = Matrix::from_vec(2, 2, vec![0.5, 0.0, -0.2, 0.3]).unwrap();
        assert!(la_loss(&b, &c).unwrap() >= 0.0);
        assert!(la_loss(&a, &b).is_err());
    }

    #[test]
    fn context_vector_cases() {
        let h = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(context_vector(&[0.0, 1.0], &h).unwrap(), vec![0.0, 1.0]);
        assert_eq!(
            context_vector(&[0.5, 0.5], &h).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(
            context_vector(&[0.25, 0.75], &h).unwrap(),
            vec![0.25, 0.75]
        );
        assert!(context_vector(&[1.0], &h).is_err());
    }

    #[test]
    fn attentional_state_cases() {
        let k = 2;
        let zero_w = Matrix::zeros(k, 2 * k);
        let out = attentional_state(&[1.0, 2.0], &[3.0, 4.0], &zero_w).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);

        // Large (but not f64-saturating) weights stay strictly inside (-1, 1).
        let mut w = Matrix::zeros(k, 2 * k);
        w.set(0, 0, 5.0);
        w.set(1, 3, -5.0);
        let out = attentional_state(&[1.0, 0.0], &[0.0, 1.0], &w).unwrap();
        assert!(out.iter().all(|v| v.abs() < 1.0));
        assert!(out[0] > 0.999 && out[1] < -0.999);

        let out = attentional_state(&[0.0, 0.0], &[0.0, 0.0], &w).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);

        assert!(attentional_state(&[1.0], &[1.0], &zero_w).is_err());
    }
}
