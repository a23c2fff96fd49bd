//! Adam parameter updates with bias correction.

use super::tensor::Parameter;
use crate::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        AdamHyper {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper::with_lr(0.0005)
    }
}

/// One Adam step using the gradient stored in the parameter. Moment
/// accumulators and the update itself are computed in f64.
pub fn adam_step<F: Scalar>(param: &mut Parameter<F>, hyper: &AdamHyper) {
    param.step_count += 1;
    let t = param.step_count as i32;
    let bias1 = 1.0 - hyper.beta1.powi(t);
    let bias2 = 1.0 - hyper.beta2.powi(t);

    let len = param.len();
    for i in 0..len {
        let g = param.grad()[i].as_f64();
        let m = hyper.beta1 * param.adam_m[i] + (1.0 - hyper.beta1) * g;
        let v = hyper.beta2 * param.adam_v[i] + (1.0 - hyper.beta2) * g * g;
        param.adam_m[i] = m;
        param.adam_v[i] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        let update = hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        let w = param.values()[i].as_f64() - update;
        param.values_mut()[i] = F::from_f64(w);
    }
}
