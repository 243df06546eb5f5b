//! SGD with momentum, L2 shrinkage on weight matrices, and global
//! gradient-norm clipping.

use crate::error::{GaitError, Result};

/// One parameter tensor's view for an optimizer step: values, matching
/// gradient, and whether the tensor is a weight matrix (biases are left
/// out of the L2 term).
pub struct ParamTensor<'a> {
    pub values: &'a mut [f64],
    pub grad: &'a [f64],
    pub is_weight: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub momentum: f64,
    /// L2 coefficient; contributes 2*l2*w to each weight-matrix gradient.
    pub l2_coefficient: f64,
    pub velocities: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(
        learning_rate: f64,
        momentum: f64,
        l2_coefficient: f64,
        tensor_sizes: &[usize],
    ) -> Self {
        OptimizerState {
            learning_rate,
            momentum,
            l2_coefficient,
            velocities: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// v <- momentum*v + g ; p <- p - lr*v, where g includes the L2 term
    /// for weight matrices. Tensor order must stay fixed across calls —
    /// velocities are matched positionally.
    pub fn step(&mut self, tensors: &mut [ParamTensor<'_>]) -> Result<()> {
        if tensors.len() != self.velocities.len() {
            return Err(GaitError::Shape(format!(
                "optimizer holds {} velocity buffers, got {} tensors",
                self.velocities.len(),
                tensors.len()
            )));
        }
        for (t, vel) in tensors.iter_mut().zip(&mut self.velocities) {
            if t.values.len() != vel.len() || t.grad.len() != vel.len() {
                return Err(GaitError::Shape("optimizer tensor size changed".into()));
            }
            let shrink = if t.is_weight {
                2.0 * self.l2_coefficient
            } else {
                0.0
            };
            for i in 0..vel.len() {
                let g = t.grad[i] + shrink * t.values[i];
                vel[i] = self.momentum * vel[i] + g;
                t.values[i] -= self.learning_rate * vel[i];
            }
        }
        Ok(())
    }
}

/// Scales all gradients in place so their joint Euclidean norm does not
/// exceed `max_norm`; returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for g in grads.iter() {
        for &v in g.iter() {
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_leaves_params_unchanged() {
        let mut opt = OptimizerState::new(0.1, 0.9, 0.0, &[3]);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut [ParamTensor {
            values: &mut p,
            grad: &[0.0; 3],
            is_weight: true,
        }])
        .unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn plain_descent_hand_case() {
        let mut opt = OptimizerState::new(0.1, 0.0, 0.0, &[1]);
        let mut p = vec![1.0];
        opt.step(&mut [ParamTensor {
            values: &mut p,
            grad: &[1.0],
            is_weight: true,
        }])
        .unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_second_update_magnitude() {
        let mut opt = OptimizerState::new(0.1, 0.9, 0.0, &[1]);
        let mut p = vec![0.0];
        let g = [1.0];
        opt.step(&mut [ParamTensor {
            values: &mut p,
            grad: &g,
            is_weight: false,
        }])
        .unwrap();
        let first = p[0];
        opt.step(&mut [ParamTensor {
            values: &mut p,
            grad: &g,
            is_weight: false,
        }])
        .unwrap();
        let second = p[0] - first;
        assert!((first - (-0.1)).abs() < 1e-15);
        // v2 = 0.9*1 + 1 = 1.9, update = lr*v2 = 0.19
        assert!((second - (-0.19)).abs() < 1e-15);
    }

    #[test]
    fn momentum_off_equals_plain_gradient_descent() {
        let mut opt = OptimizerState::new(0.05, 0.0, 0.0, &[2]);
        let mut p = vec![2.0, -1.0];
        let mut reference = p.clone();
        for step in 0..4 {
            let g = [0.3 + step as f64, -0.7];
            opt.step(&mut [ParamTensor {
                values: &mut p,
                grad: &g,
                is_weight: true,
            }])
            .unwrap();
            for (r, gi) in reference.iter_mut().zip(&g) {
                *r -= 0.05 * gi;
            }
            assert_eq!(p, reference);
        }
    }

    #[test]
    fn l2_hits_weights_not_biases() {
        let mut opt = OptimizerState::new(1.0, 0.0, 0.5, &[1, 1]);
        let mut w = vec![2.0];
        let mut b = vec![2.0];
        opt.step(&mut [
            ParamTensor {
                values: &mut w,
                grad: &[0.0],
                is_weight: true,
            },
            ParamTensor {
                values: &mut b,
                grad: &[0.0],
                is_weight: false,
            },
        ])
        .unwrap();
        // grad_w = 2*0.5*2 = 2 → w = 2 - 1*2 = 0; bias untouched.
        assert_eq!(w, vec![0.0]);
        assert_eq!(b, vec![2.0]);
    }

    #[test]
    fn rejects_tensor_count_mismatch() {
        let mut opt = OptimizerState::new(0.1, 0.9, 0.0, &[1, 1]);
        let mut p = vec![0.0];
        assert!(opt
            .step(&mut [ParamTensor {
                values: &mut p,
                grad: &[1.0],
                is_weight: true,
            }])
            .is_err());
    }

    #[test]
    fn clip_scales_only_above_threshold() {
        let mut a = vec![3.0, 0.0];
        let mut b = vec![0.0, 4.0];
        {
            let mut views: Vec<&mut [f64]> = vec![&mut a, &mut b];
            let norm = clip_global_norm(&mut views, 5.0);
            assert!((norm - 5.0).abs() < 1e-12);
        }
        assert_eq!(a, vec![3.0, 0.0]);
        assert_eq!(b, vec![0.0, 4.0]);

        let mut c = vec![3.0, 4.0];
        {
            let mut views: Vec<&mut [f64]> = vec![&mut c];
            let norm = clip_global_norm(&mut views, 1.0);
            assert!((norm - 5.0).abs() < 1e-12);
        }
        let after: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((after - 1.0).abs() < 1e-12);
        assert!((c[0] - 0.6).abs() < 1e-12);
    }
}
