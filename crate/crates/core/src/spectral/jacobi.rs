//! Cyclic Jacobi eigensolver for dense symmetric matrices.
//!
//! Slow (several sweeps of `O(m^3)` each) but simple and reliable; it backs
//! [`EigenMethod::Jacobi`](super::EigenMethod) and serves as an independent
//! check of the default dense path.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Unsorted eigenpairs of a symmetric matrix.
///
/// Stops when the off-diagonal Frobenius norm is at most `rel_tol * ||K||_F`.
pub fn jacobi_eigen(
    k: &DMatrix<f64>,
    rel_tol: f64,
    max_sweeps: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    // row-major working copy
    let mut a: Vec<f64> = (0..n * n).map(|idx| k[(idx / n, idx % n)]).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob = k.norm();
    let threshold = rel_tol * frob;

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += a[p * n + q] * a[p * n + q];
                }
            }
        }
        s.sqrt()
    };

    let mut off = off_norm(&a);
    let mut sweeps = 0;
    while off > threshold {
        if sweeps == max_sweeps {
            return Err(Error::Numeric(format!(
                "Jacobi did not converge in {max_sweeps} sweeps: off-diagonal norm {off:.3e} \
                 > {threshold:.3e}"
            )));
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // A <- A J (columns p, q)
                for row in 0..n {
                    let akp = a[row * n + p];
                    let akq = a[row * n + q];
                    a[row * n + p] = c * akp - s * akq;
                    a[row * n + q] = s * akp + c * akq;
                }
                // A <- J^T A (rows p, q)
                for col in 0..n {
                    let apk = a[p * n + col];
                    let aqk = a[q * n + col];
                    a[p * n + col] = c * apk - s * aqk;
                    a[q * n + col] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                // V <- V J
                for row in 0..n {
                    let vkp = v[row * n + p];
                    let vkq = v[row * n + q];
                    v[row * n + p] = c * vkp - s * vkq;
                    v[row * n + q] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        off = off_norm(&a);
    }

    let values = DVector::from_fn(n, |i, _| a[i * n + i]);
    let vectors = DMatrix::from_fn(n, n, |i, j| v[i * n + j]);
    Ok((values, vectors))
}
