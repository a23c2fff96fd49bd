//! Gated recurrent unit cell with explicit backward.
//!
//! Standard two-gate formulation, reset gate applied to the previous hidden
//! state before the candidate transform:
//!
//! ```text
//! z = sigmoid(Wz x + Uz h + bz)
//! r = sigmoid(Wr x + Ur h + br)
//! c = tanh(Wc x + Uc (r .* h) + bc)
//! h' = (1 - z) .* h + z .* c
//! ```

use rand::Rng;

use super::linalg::{matvec_t_acc, outer_acc};
use super::tensor::Parameter;
use crate::Scalar;

#[derive(Clone, Debug)]
pub struct GruCell<F: Scalar> {
    pub wz: Parameter<F>,
    pub uz: Parameter<F>,
    pub bz: Parameter<F>,
    pub wr: Parameter<F>,
    pub ur: Parameter<F>,
    pub br: Parameter<F>,
    pub wc: Parameter<F>,
    pub uc: Parameter<F>,
    pub bc: Parameter<F>,
    pub in_dim: usize,
    pub hidden_dim: usize,
}

/// Per-step activations needed by the backward pass.
#[derive(Clone, Debug)]
pub struct GruCache<F: Scalar> {
    pub x: Vec<F>,
    pub h_prev: Vec<F>,
    pub z: Vec<F>,
    pub r: Vec<F>,
    pub q: Vec<F>,
    pub c: Vec<F>,
}

#[inline]
fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<F: Scalar> GruCell<F> {
    /// All weights and biases drawn from U(-1/sqrt(hidden), 1/sqrt(hidden)).
    pub fn new<R: Rng>(in_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let gate_w = |rng: &mut R| Parameter::uniform(&[hidden_dim, in_dim], bound, rng);
        let gate_u = |rng: &mut R| Parameter::uniform(&[hidden_dim, hidden_dim], bound, rng);
        let gate_b = |rng: &mut R| Parameter::uniform(&[hidden_dim], bound, rng);
        GruCell {
            wz: gate_w(rng),
            uz: gate_u(rng),
            bz: gate_b(rng),
            wr: gate_w(rng),
            ur: gate_u(rng),
            br: gate_b(rng),
            wc: gate_w(rng),
            uc: gate_u(rng),
            bc: gate_b(rng),
            in_dim,
            hidden_dim,
        }
    }

    fn gate_preact(w: &Parameter<F>, u: &Parameter<F>, b: &Parameter<F>, x: &[F], h: &[F], out: &mut [F]) {
        let in_dim = x.len();
        let hidden = h.len();
        for ((o, row_w), (row_u, &bi)) in out
            .iter_mut()
            .zip(w.values().chunks_exact(in_dim))
            .zip(u.values().chunks_exact(hidden).zip(b.values()))
        {
            *o = super::linalg::dot(row_w, x) + super::linalg::dot(row_u, h) + bi;
        }
    }

    pub fn forward(&self, x: &[F], h_prev: &[F], h_out: &mut [F]) -> GruCache<F> {
        assert_eq!(x.len(), self.in_dim, "gru input dim");
        assert_eq!(h_prev.len(), self.hidden_dim, "gru hidden dim");
        assert_eq!(h_out.len(), self.hidden_dim, "gru output dim");

        let h = self.hidden_dim;
        let mut z = vec![F::zero(); h];
        let mut r = vec![F::zero(); h];
        let mut c = vec![F::zero(); h];

        Self::gate_preact(&self.wz, &self.uz, &self.bz, x, h_prev, &mut z);
        Self::gate_preact(&self.wr, &self.ur, &self.br, x, h_prev, &mut r);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        r.iter_mut().for_each(|v| *v = sigmoid(*v));

        let q: Vec<F> = r.iter().zip(h_prev).map(|(&ri, &hi)| ri * hi).collect();
        Self::gate_preact(&self.wc, &self.uc, &self.bc, x, &q, &mut c);
        c.iter_mut().for_each(|v| *v = v.tanh());

        for i in 0..h {
            h_out[i] = (F::one() - z[i]) * h_prev[i] + z[i] * c[i];
        }

        GruCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            q,
            c,
        }
    }

    /// Accumulates parameter gradients; adds input gradients to `dx` and
    /// `dh_prev`.
    pub fn backward(&mut self, cache: &GruCache<F>, dh: &[F], dx: &mut [F], dh_prev: &mut [F]) {
        let h = self.hidden_dim;
        assert_eq!(dh.len(), h, "gru output grad dim");
        assert_eq!(dx.len(), self.in_dim, "gru input grad dim");
        assert_eq!(dh_prev.len(), h, "gru hidden grad dim");

        let one = F::one();
        let mut da_z = vec![F::zero(); h];
        let mut da_r = vec![F::zero(); h];
        let mut da_c = vec![F::zero(); h];
        let mut dq = vec![F::zero(); h];

        for i in 0..h {
            let dz = dh[i] * (cache.c[i] - cache.h_prev[i]);
            let dc = dh[i] * cache.z[i];
            da_z[i] = dz * cache.z[i] * (one - cache.z[i]);
            da_c[i] = dc * (one - cache.c[i] * cache.c[i]);
            dh_prev[i] += dh[i] * (one - cache.z[i]);
        }

        matvec_t_acc(self.uc.values(), &da_c, &mut dq);
        for i in 0..h {
            let dr = dq[i] * cache.h_prev[i];
            da_r[i] = dr * cache.r[i] * (one - cache.r[i]);
            dh_prev[i] += dq[i] * cache.r[i];
        }

        outer_acc(self.wz.grad_mut(), &da_z, &cache.x);
        outer_acc(self.uz.grad_mut(), &da_z, &cache.h_prev);
        super::linalg::axpy(self.bz.grad_mut(), one, &da_z);
        outer_acc(self.wr.grad_mut(), &da_r, &cache.x);
        outer_acc(self.ur.grad_mut(), &da_r, &cache.h_prev);
        super::linalg::axpy(self.br.grad_mut(), one, &da_r);
        outer_acc(self.wc.grad_mut(), &da_c, &cache.x);
        outer_acc(self.uc.grad_mut(), &da_c, &cache.q);
        super::linalg::axpy(self.bc.grad_mut(), one, &da_c);

        matvec_t_acc(self.wz.values(), &da_z, dx);
        matvec_t_acc(self.wr.values(), &da_r, dx);
        matvec_t_acc(self.wc.values(), &da_c, dx);
        matvec_t_acc(self.uz.values(), &da_z, dh_prev);
        matvec_t_acc(self.ur.values(), &da_r, dh_prev);
    }

    pub fn params_mut(&mut self) -> [(&'static str, &mut Parameter<F>); 9] {
        [
            ("wz", &mut self.wz),
            ("uz", &mut self.uz),
            ("bz", &mut self.bz),
            ("wr", &mut self.wr),
            ("ur", &mut self.ur),
            ("br", &mut self.br),
            ("wc", &mut self.wc),
            ("uc", &mut self.uc),
            ("bc", &mut self.bc),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn saturated_update_gate_keeps_previous_state() {
        let mut rng = crate::RunRng::seed_from_u64(5);
        let mut cell = GruCell::<f64>::new(3, 4, &mut rng);
        // Large negative update-gate bias forces z toward 0.
        for v in cell.bz.values_mut() {
            *v = -40.0;
        }
        for v in cell.wz.values_mut() {
            *v = 0.0;
        }
        for v in cell.uz.values_mut() {
            *v = 0.0;
        }
        let h_prev = [0.3, -0.7, 0.1, 0.9];
        let mut h = [0.0; 4];
        cell.forward(&[1.0, -1.0, 0.5], &h_prev, &mut h);
        for (a, b) in h.iter().zip(&h_prev) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn output_is_a_convex_combination() {
        let mut rng = crate::RunRng::seed_from_u64(6);
        let cell = GruCell::<f64>::new(2, 8, &mut rng);
        let h_prev: Vec<f64> = (0..8).map(|i| (i as f64 - 4.0) / 2.0).collect();
        let bound = h_prev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut h = vec![0.0; 8];
        cell.forward(&[2.0, -3.0], &h_prev, &mut h);
        for v in &h {
            assert!(v.abs() <= bound + 1e-12);
        }
    }

    #[test]
    #[should_panic(expected = "gru input dim")]
    fn forward_rejects_shape_mismatch() {
        let mut rng = crate::RunRng::seed_from_u64(7);
        let cell = GruCell::<f64>::new(3, 4, &mut rng);
        let mut h = [0.0; 4];
        cell.forward(&[1.0; 2], &[0.0; 4], &mut h);
    }
}
