//! Softmax, relaxed categorical sampling, and cross-entropy.

use rand::Rng;

use super::NnError;
use crate::Scalar;

/// Numerically stable in-place softmax.
pub fn softmax_in_place<F: Scalar>(xs: &mut [F]) {
    let max = xs.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
    let mut sum = F::zero();
    for v in xs.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in xs.iter_mut() {
        *v /= sum;
    }
}

pub fn log_sum_exp<F: Scalar>(xs: &[F]) -> F {
    let max = xs.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
    let sum: F = xs.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Standard Gumbel noise, one draw per entry.
pub fn sample_gumbel<F: Scalar, R: Rng>(len: usize, rng: &mut R) -> Vec<F> {
    (0..len)
        .map(|_| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            F::from_f64(-(-u.ln()).ln())
        })
        .collect()
}

/// Relaxed categorical sample with injected noise:
/// `y = softmax((logits + noise) / tau)`.
pub fn gumbel_softmax<F: Scalar>(logits: &[F], noise: &[F], tau: F) -> Result<Vec<F>, NnError> {
    if tau <= F::zero() {
        return Err(NnError::BadTemperature(tau.as_f64()));
    }
    assert_eq!(logits.len(), noise.len(), "gumbel noise length");
    let mut y: Vec<F> = logits
        .iter()
        .zip(noise)
        .map(|(&l, &g)| (l + g) / tau)
        .collect();
    softmax_in_place(&mut y);
    Ok(y)
}

/// Relaxed categorical sample with fresh noise.
pub fn gumbel_softmax_sample<F: Scalar, R: Rng>(
    logits: &[F],
    tau: F,
    rng: &mut R,
) -> Result<Vec<F>, NnError> {
    let noise = sample_gumbel(logits.len(), rng);
    gumbel_softmax(logits, &noise, tau)
}

/// Backward through the relaxed sample: given dL/dy, accumulates dL/dlogits.
/// Only the sample `y` and the temperature are needed.
pub fn gumbel_softmax_backward<F: Scalar>(y: &[F], dy: &[F], tau: F, dlogits: &mut [F]) {
    debug_assert_eq!(y.len(), dy.len());
    debug_assert_eq!(y.len(), dlogits.len());
    let inner: F = y.iter().zip(dy).map(|(&yi, &di)| yi * di).sum();
    for i in 0..y.len() {
        dlogits[i] += y[i] * (dy[i] - inner) / tau;
    }
}

/// Loss `-log softmax(logits)[target]` (natural log) and its gradient
/// `softmax(logits) - onehot(target)`.
pub fn softmax_cross_entropy<F: Scalar>(
    logits: &[F],
    target: usize,
) -> Result<(F, Vec<F>), NnError> {
    if target >= logits.len() {
        return Err(NnError::IndexOutOfRange {
            index: target,
            len: logits.len(),
        });
    }
    let lse = log_sum_exp(logits);
    let loss = lse - logits[target];
    let mut grad: Vec<F> = logits.iter().map(|&l| (l - lse).exp()).collect();
    grad[target] -= F::one();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn gumbel_softmax_is_a_probability_vector() {
        let mut rng = crate::RunRng::seed_from_u64(1);
        for _ in 0..100 {
            let logits: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
            let y = gumbel_softmax_sample(&logits, 0.8, &mut rng).unwrap();
            assert!(y.iter().all(|&v| v > 0.0));
            let sum: f64 = y.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn low_temperature_approaches_one_hot() {
        let logits = [2.0f64, -1.0, 0.5, -3.0];
        let noise = [0.1, 0.2, -0.05, 0.3];
        let y = gumbel_softmax(&logits, &noise, 0.01).unwrap();
        let max = y.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max > 0.99);
    }

    #[test]
    fn zero_temperature_is_rejected() {
        let logits = [0.0f64; 3];
        let noise = [0.0f64; 3];
        assert!(matches!(
            gumbel_softmax(&logits, &noise, 0.0),
            Err(NnError::BadTemperature(_))
        ));
    }

    #[test]
    fn cross_entropy_uniform_case() {
        let logits = [0.0f64; 11];
        let (loss, grad) = softmax_cross_entropy(&logits, 4).unwrap();
        assert!((loss - (11.0f64).ln()).abs() < 1e-12);
        assert!((loss - 2.3979).abs() < 1e-4);
        let sum: f64 = grad.iter().sum();
        assert!(sum.abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_confident_case() {
        let mut logits = [0.0f64; 5];
        logits[2] = 50.0;
        let (loss, _) = softmax_cross_entropy(&logits, 2).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_bad_index() {
        let logits = [0.0f64; 3];
        assert!(matches!(
            softmax_cross_entropy(&logits, 3),
            Err(NnError::IndexOutOfRange { .. })
        ));
    }
}
