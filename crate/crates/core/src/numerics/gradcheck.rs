//! Central finite-difference gradient oracle used by the test suite to
//! validate every hand-written backward pass.

use crate::error::{GaitError, Result};

/// Numerically differentiates `loss` at `params` with central
/// differences: (loss(p+eps) - loss(p-eps)) / 2eps per coordinate.
/// The loss is evaluated twice up front at the unperturbed point; any
/// disagreement means it is not a pure function of the parameters and
/// the check would be meaningless.
pub fn finite_difference_gradient<F>(loss: F, params: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let a = loss(params);
    let b = loss(params);
    if a.to_bits() != b.to_bits() {
        return Err(GaitError::Numeric(
            "loss function is not deterministic; finite differences unusable".into(),
        ));
    }
    let mut scratch = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = scratch[i];
        scratch[i] = orig + eps;
        let plus = loss(&scratch);
        scratch[i] = orig - eps;
        let minus = loss(&scratch);
        scratch[i] = orig;
        grad[i] = (plus - minus) / (2.0 * eps);
    }
    Ok(grad)
}

/// Worst relative disagreement between an analytic gradient and its
/// finite-difference estimate. Entries where both are below `floor`
/// compare against the floor so finite-difference noise on true zeros
/// does not dominate.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_slope() {
        let g = finite_difference_gradient(|p| p[0] * p[0], &[3.0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_loss_zero_gradient() {
        let g = finite_difference_gradient(|_| 42.0, &[1.0, -2.0, 0.3], 1e-6).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn sum_loss_unit_gradient() {
        let g =
            finite_difference_gradient(|p| p.iter().sum(), &[0.5, 1.5, -3.0], 1e-6).unwrap();
        for v in g {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn detects_non_deterministic_loss() {
        use std::cell::Cell;
        let calls = Cell::new(0.0);
        let res = finite_difference_gradient(
            |_| {
                calls.set(calls.get() + 1.0);
                calls.get()
            },
            &[1.0],
            1e-6,
        );
        assert!(res.is_err());
    }

    #[test]
    fn relative_error_uses_floor_near_zero() {
        // 1e-10 vs 0 would be a huge relative error without the floor.
        let e = max_relative_error(&[1e-10], &[0.0], 1e-4);
        assert!(e < 1e-5);
        let big = max_relative_error(&[1.0], &[1.1], 1e-4);
        assert!((big - 0.1 / 1.1).abs() < 1e-12);
    }
}
