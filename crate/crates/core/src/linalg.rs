//! Dense eigen-solvers used by the Krylov propagator and the dense
//! propagator, backed by nalgebra in double precision.

use nalgebra::{Complex as NComplex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Eigen-decomposition of a dense Hermitian matrix (row-major, `n × n`).
///
/// Returns the eigenvalues and the unitary whose columns are the matching
/// eigenvectors, row-major.
pub(crate) fn hermitian_eigen<T: Real>(a: Vec<C<T>>, n: usize) -> Result<(Vec<T>, Vec<C<T>>)> {
    assert_eq!(a.len(), n * n);
    let m = DMatrix::from_fn(n, n, |r, c| {
        let z = a[r * n + c];
        NComplex::new(z.re.as_f64(), z.im.as_f64())
    });
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::ConvergenceFailure(format!("Hermitian eigensolver, n = {n}")))?;
    let values = eig.eigenvalues.iter().map(|&w| T::lit(w)).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for r in 0..n {
        for k in 0..n {
            let z = eig.eigenvectors[(r, k)];
            vectors.push(C::new(T::lit(z.re), T::lit(z.im)));
        }
    }
    Ok((values, vectors))
}

/// Eigen-decomposition of a dense real symmetric matrix (row-major).
///
/// Eigenvectors are the columns of the returned row-major matrix.
pub(crate) fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> Result<(Vec<T>, Vec<T>)> {
    assert_eq!(a.len(), n * n);
    let m = DMatrix::from_fn(n, n, |r, c| a[r * n + c].as_f64());
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::ConvergenceFailure(format!("symmetric eigensolver, n = {n}")))?;
    let values = eig.eigenvalues.iter().map(|&w| T::lit(w)).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for r in 0..n {
        for k in 0..n {
            vectors.push(T::lit(eig.eigenvectors[(r, k)]));
        }
    }
    Ok((values, vectors))
}

/// Eigen-decomposition of the real symmetric tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off`.
pub(crate) fn tridiagonal_eigen<T: Real>(diag: &[T], off: &[T]) -> Result<(Vec<T>, Vec<T>)> {
    let n = diag.len();
    assert!(off.len() + 1 == n || n == 0);
    let mut a = vec![T::zero(); n * n];
    for i in 0..n {
        a[i * n + i] = diag[i];
        if i + 1 < n {
            a[i * n + i + 1] = off[i];
            a[(i + 1) * n + i] = off[i];
        }
    }
    symmetric_eigen(&a, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_reconstructs() {
        let d = [1.0f64, -2.0, 0.5, 3.0];
        let e = [0.3, 1.1, -0.7];
        let (w, z) = tridiagonal_eigen(&d, &e).unwrap();
        let n = 4;
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0f64;
                for k in 0..n {
                    acc += z[r * n + k] * w[k] * z[c * n + k];
                }
                let expect = if r == c {
                    d[r]
                } else if r.abs_diff(c) == 1 {
                    e[r.min(c)]
                } else {
                    0.0
                };
                assert!((acc - expect).abs() < 1e-12, "({r},{c}) {acc} vs {expect}");
            }
        }
    }

    #[test]
    fn hermitian_two_by_two() {
        // σ^y has eigenvalues ±1.
        let a = vec![
            C::<f64>::new(0.0, 0.0),
            C::new(0.0, -1.0),
            C::new(0.0, 1.0),
            C::<f64>::new(0.0, 0.0),
        ];
        let (mut w, v) = hermitian_eigen(a.clone(), 2).unwrap();
        let n = 2;
        for r in 0..n {
            for c in 0..n {
                let mut acc = C::new(0.0, 0.0);
                for k in 0..n {
                    acc += v[r * n + k] * w[k] * v[c * n + k].conj();
                }
                assert!((acc - a[r * n + c]).norm() < 1e-14);
            }
        }
        w.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }
}
