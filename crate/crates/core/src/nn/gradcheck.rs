//! Central finite-difference verification of analytic gradients.

use crate::Scalar;

/// Compares the analytic gradient of a scalar-valued function against
/// central differences and returns the maximum relative error.
///
/// `f` must return the value together with the full analytic gradient at
/// the given point. Meaningful tolerances require `F = f64`.
pub fn grad_check<F, Func>(mut f: Func, x0: &[F], epsilon: f64) -> f64
where
    F: Scalar,
    Func: FnMut(&[F]) -> (F, Vec<F>),
{
    let (_, analytic) = f(x0);
    assert_eq!(analytic.len(), x0.len(), "gradient length");

    let eps = F::from_f64(epsilon);
    let mut x = x0.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let (fp, _) = f(&x);
        x[i] = orig - eps;
        let (fm, _) = f(&x);
        x[i] = orig;

        let numeric = (fp.as_f64() - fm.as_f64()) / (2.0 * epsilon);
        let a = analytic[i].as_f64();
        let denom = (numeric.abs() + a.abs()).max(1e-6);
        worst = worst.max((numeric - a).abs() / denom);
    }
    worst
}
