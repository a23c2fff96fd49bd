//! Fully connected layer with explicit backward.

use rand::Rng;

use super::linalg::{axpy, matvec, matvec_t_acc, outer_acc};
use super::tensor::Parameter;
use crate::Scalar;

/// y = W x + b with W stored row-major as `out_dim x in_dim`.
#[derive(Clone, Debug)]
pub struct Dense<F: Scalar> {
    pub w: Parameter<F>,
    pub b: Parameter<F>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<F: Scalar> Dense<F> {
    /// Weights and bias drawn from U(-1/sqrt(in_dim), 1/sqrt(in_dim)).
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Dense {
            w: Parameter::uniform(&[out_dim, in_dim], bound, rng),
            b: Parameter::uniform(&[out_dim], bound, rng),
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[F], y: &mut [F]) {
        assert_eq!(x.len(), self.in_dim, "dense input dim");
        assert_eq!(y.len(), self.out_dim, "dense output dim");
        matvec(self.w.values(), x, y);
        for (yi, &bi) in y.iter_mut().zip(self.b.values()) {
            *yi += bi;
        }
    }

    /// Accumulates parameter gradients and adds the input gradient to `dx`.
    pub fn backward(&mut self, x: &[F], dy: &[F], dx: &mut [F]) {
        assert_eq!(x.len(), self.in_dim, "dense input dim");
        assert_eq!(dy.len(), self.out_dim, "dense output grad dim");
        assert_eq!(dx.len(), self.in_dim, "dense input grad dim");
        outer_acc(self.w.grad_mut(), dy, x);
        axpy(self.b.grad_mut(), F::one(), dy);
        matvec_t_acc(self.w.values(), dy, dx);
    }

    /// Backward without propagating into the input, for layers fed by
    /// constant encodings.
    pub fn backward_params_only(&mut self, x: &[F], dy: &[F]) {
        assert_eq!(x.len(), self.in_dim, "dense input dim");
        assert_eq!(dy.len(), self.out_dim, "dense output grad dim");
        outer_acc(self.w.grad_mut(), dy, x);
        axpy(self.b.grad_mut(), F::one(), dy);
    }
}
