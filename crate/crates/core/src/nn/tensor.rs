//! Flat tensors and trainable parameters.

use rand::Rng;

use crate::Scalar;

/// Dense row-major tensor with an optional gradient buffer.
#[derive(Clone, Debug)]
pub struct Tensor<F: Scalar> {
    shape: Vec<usize>,
    data: Vec<F>,
    grad: Option<Vec<F>>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); len],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn grad(&self) -> Option<&[F]> {
        self.grad.as_deref()
    }

    pub fn grad_mut(&mut self) -> &mut [F] {
        if self.grad.is_none() {
            self.grad = Some(vec![F::zero(); self.data.len()]);
        }
        self.grad.as_mut().unwrap()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = F::zero());
        }
    }
}

/// A tensor with Adam moment accumulators. Moments are kept in `f64`
/// regardless of the tensor's scalar type.
#[derive(Clone, Debug)]
pub struct Parameter<F: Scalar> {
    pub tensor: Tensor<F>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub step_count: u64,
}

impl<F: Scalar> Parameter<F> {
    pub fn new(tensor: Tensor<F>) -> Self {
        let len = tensor.len();
        let mut tensor = tensor;
        tensor.grad_mut();
        Parameter {
            tensor,
            adam_m: vec![0.0; len],
            adam_v: vec![0.0; len],
            step_count: 0,
        }
    }

    /// Entries drawn from U(-bound, bound).
    pub fn uniform<R: Rng>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| F::from_f64((rng.random::<f64>() * 2.0 - 1.0) * bound))
            .collect();
        Parameter::new(Tensor::from_vec(shape, data))
    }

    /// Entries drawn from N(0, 1) via Box-Muller.
    pub fn normal<R: Rng>(shape: &[usize], rng: &mut R) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| {
                let u1: f64 = 1.0 - rng.random::<f64>();
                let u2: f64 = rng.random::<f64>();
                F::from_f64((-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos())
            })
            .collect();
        Parameter::new(Tensor::from_vec(shape, data))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Parameter::new(Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.tensor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensor.is_empty()
    }

    pub fn values(&self) -> &[F] {
        self.tensor.data()
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        self.tensor.data_mut()
    }

    pub fn grad(&self) -> &[F] {
        self.tensor.grad().expect("parameter gradient allocated")
    }

    pub fn grad_mut(&mut self) -> &mut [F] {
        self.tensor.grad_mut()
    }

    pub fn zero_grad(&mut self) {
        self.tensor.zero_grad();
    }

    pub fn scale_grad(&mut self, factor: f64) {
        let f = F::from_f64(factor);
        for g in self.tensor.grad_mut() {
            *g *= f;
        }
    }
}
