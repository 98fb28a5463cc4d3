//! Dense decompositions on `ndarray` matrices, backed by `faer`.

use faer::{Mat, MatRef, Side};
use ndarray::{Array1, Array2, ArrayView2};

use super::scalar::Scalar;
use crate::error::{Error, Result};

fn to_faer<T: Scalar>(a: ArrayView2<'_, T>) -> Mat<T> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_faer<T: Scalar>(m: MatRef<'_, T>) -> Array2<T> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Outcome of a truncated SVD: `a ≈ u · diag(s) · vh`.
pub struct TruncatedSvd<T: Scalar> {
    pub u: Array2<T>,
    pub s: Array1<f64>,
    pub vh: Array2<T>,
    /// Discarded weight: Σ of dropped σ² over Σ of all σ².
    pub discarded: f64,
    pub rank: usize,
}

/// Thin SVD truncated to `max_rank` and to relative discarded weight ≤ `tol`.
///
/// Keeps the largest rank satisfying both constraints, so exact zeros are
/// always dropped; with `tol = 0` only the `max_rank` cap applies.
pub fn svd_truncated<T: Scalar>(
    a: ArrayView2<'_, T>,
    max_rank: usize,
    tol: f64,
) -> Result<TruncatedSvd<T>> {
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::numerical(format!("SVD failed: {e:?}")))?;
    let k = svd.S().dim();
    let sv: Vec<f64> = (0..k).map(|i| svd.S()[i].re()).collect();
    let total: f64 = sv.iter().map(|s| s * s).sum();

    // Largest rank with cumulative discarded weight within tol.
    let mut rank = k.min(max_rank.max(1));
    if total > 0.0 && tol > 0.0 {
        let mut discarded = 0.0;
        let mut needed = 1;
        for (i, s) in sv.iter().enumerate().rev() {
            discarded += s * s;
            if discarded > tol * total {
                needed = i + 1;
                break;
            }
        }
        rank = rank.min(needed.max(1));
    }
    // Never keep exact zeros beyond rank 1.
    while rank > 1 && sv[rank - 1] == 0.0 {
        rank -= 1;
    }

    let kept: f64 = sv[..rank].iter().map(|s| s * s).sum();
    let discarded = if total > 0.0 { ((total - kept) / total).max(0.0) } else { 0.0 };

    let u = from_faer(svd.U().get(.., ..rank));
    let vh_full = svd.V();
    let mut vh = Array2::zeros((rank, a.ncols()));
    for r in 0..rank {
        for j in 0..a.ncols() {
            vh[[r, j]] = vh_full[(j, r)].conj();
        }
    }
    Ok(TruncatedSvd { u, s: Array1::from_vec(sv[..rank].to_vec()), vh, discarded, rank })
}

/// Thin QR: `a = q · r` with `q` column-orthonormal.
pub fn qr_thin<T: Scalar>(a: ArrayView2<'_, T>) -> (Array2<T>, Array2<T>) {
    let qr = to_faer(a).qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    (from_faer(q.as_ref()), from_faer(r))
}

/// Thin LQ: `a = l · q` with `q` row-orthonormal.
pub fn lq_thin<T: Scalar>(a: ArrayView2<'_, T>) -> (Array2<T>, Array2<T>) {
    // LQ of A from QR of A^H.
    let ah = Array2::from_shape_fn((a.ncols(), a.nrows()), |(i, j)| a[[j, i]].conj());
    let (q, r) = qr_thin(ah.view());
    let l = Array2::from_shape_fn((r.ncols(), r.nrows()), |(i, j)| r[[j, i]].conj());
    let qh = Array2::from_shape_fn((q.ncols(), q.nrows()), |(i, j)| q[[j, i]].conj());
    (l, qh)
}

/// Eigendecomposition of a self-adjoint matrix; eigenvalues ascending,
/// eigenvectors in the columns of the returned matrix.
pub fn eigh<T: Scalar>(a: ArrayView2<'_, T>) -> Result<(Array1<f64>, Array2<T>)> {
    let e = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|err| Error::numerical(format!("eigendecomposition failed: {err:?}")))?;
    let n = a.nrows();
    let vals = Array1::from_shape_fn(n, |i| e.S()[i].re());
    let vecs = from_faer(e.U());
    Ok((vals, vecs))
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn eigvalsh(a: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let vals = to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|err| Error::numerical(format!("eigendecomposition failed: {err:?}")))?;
    Ok(Array1::from_vec(vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use num_complex::Complex64 as C64;

    #[test]
    fn svd_reconstructs() {
        let a = array![[1.0, 2.0, 0.5], [0.0, 1.0, -1.0], [2.0, 0.0, 0.3], [1.0, 1.0, 1.0]];
        let svd = svd_truncated(a.view(), 10, 0.0).unwrap();
        let mut us = svd.u.clone();
        for (j, mut col) in us.columns_mut().into_iter().enumerate() {
            col.iter_mut().for_each(|x| *x *= svd.s[j]);
        }
        let rec = us.dot(&svd.vh);
        for (x, y) in rec.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(svd.discarded, 0.0);
    }

    #[test]
    fn svd_truncation_discards() {
        // Rank-1 matrix plus small rank-2 correction.
        let a = array![[1.0, 1.0], [1.0, 1.0 + 1e-6]];
        let svd = svd_truncated(a.view(), 1, 0.0).unwrap();
        assert_eq!(svd.rank, 1);
        assert!(svd.discarded > 0.0 && svd.discarded < 1e-10);
    }

    #[test]
    fn qr_orthonormal_complex() {
        let a = Array2::from_shape_fn((6, 3), |(i, j)| {
            C64::new((i * 3 + j) as f64 * 0.17 - 1.0, (i + j) as f64 * 0.09)
        });
        let (q, r) = qr_thin(a.view());
        let qh = Array2::from_shape_fn((3, 6), |(i, j)| q[[j, i]].conj());
        let id = qh.dot(&q);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id[[i, j]] - C64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        let rec = q.dot(&r);
        for (x, y) in rec.iter().zip(a.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn eigh_small() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = eigh(a.view()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // A v = λ v
        let av = a.dot(&vecs.column(0).to_owned());
        for i in 0..2 {
            assert!((av[i] - vals[0] * vecs[[i, 0]]).abs() < 1e-12);
        }
    }
}
