//! Hot-loop vector kernels. Written with independent accumulators so the
//! compiler can vectorize; these dominate training time.

use crate::Scalar;

#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [F::zero(); 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let off = i * 8;
        acc[0] += a[off] * b[off];
        acc[1] += a[off + 1] * b[off + 1];
        acc[2] += a[off + 2] * b[off + 2];
        acc[3] += a[off + 3] * b[off + 3];
        acc[4] += a[off + 4] * b[off + 4];
        acc[5] += a[off + 5] * b[off + 5];
        acc[6] += a[off + 6] * b[off + 6];
        acc[7] += a[off + 7] * b[off + 7];
    }
    let mut tail = F::zero();
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// y[i] += a * x[i]
#[inline]
pub fn axpy<F: Scalar>(y: &mut [F], a: F, x: &[F]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// out[i] = dot(w_row_i, x) for a row-major `rows x cols` matrix.
#[inline]
pub fn matvec<F: Scalar>(w: &[F], x: &[F], out: &mut [F]) {
    let cols = x.len();
    debug_assert_eq!(w.len(), out.len() * cols);
    for (row, o) in w.chunks_exact(cols).zip(out.iter_mut()) {
        *o = dot(row, x);
    }
}

/// dx[j] += sum_i w[i][j] * dy[i]  (transpose-apply, accumulating)
#[inline]
pub fn matvec_t_acc<F: Scalar>(w: &[F], dy: &[F], dx: &mut [F]) {
    let cols = dx.len();
    debug_assert_eq!(w.len(), dy.len() * cols);
    for (row, &d) in w.chunks_exact(cols).zip(dy) {
        axpy(dx, d, row);
    }
}

/// dw[i][j] += dy[i] * x[j]  (rank-1 update, accumulating)
#[inline]
pub fn outer_acc<F: Scalar>(dw: &mut [F], dy: &[F], x: &[F]) {
    let cols = x.len();
    debug_assert_eq!(dw.len(), dy.len() * cols);
    for (row, &d) in dw.chunks_exact_mut(cols).zip(dy) {
        axpy(row, d, x);
    }
}
