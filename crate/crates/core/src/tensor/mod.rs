//! Tensor-train machinery: matrix product states and operators, canonical
//! forms, truncation, environments, sampling, and checkpoints.

pub mod checkpoint;
pub(crate) mod env;
pub(crate) mod krylov;
pub mod linalg;
pub mod mpo;
pub mod mps;
pub mod scalar;

pub use mpo::{expectation, expectation_raw, MatrixProductOperator, MpoBuildLog};
pub use mps::{mps_sum, ops, MatrixProductState};
pub use scalar::Scalar;

use crate::error::Result;
use crate::model::{TermKind, TermList};

/// Compile a term list into an MPO compressed to tolerance `tol`.
pub fn mpo_from_terms(terms: &TermList, tol: f64) -> Result<MatrixProductOperator<f64>> {
    MatrixProductOperator::from_terms(terms, tol)
}

/// `⟨ψ|H|ψ⟩` summed term by term from two-point correlators, bypassing the
/// MPO entirely. Slower than [`expectation`], but an independent route used
/// to cross-check operator compression.
pub fn term_expectation<T: Scalar>(state: &MatrixProductState<T>, terms: &TermList) -> f64 {
    let mut heis: Option<ndarray::Array2<f64>> = None;
    let mut zz: Option<ndarray::Array2<f64>> = None;
    let mut occ2: Option<ndarray::Array2<f64>> = None;
    let mut total = 0.0;
    for t in terms.terms() {
        let c = t.coefficient;
        let (i, j) = (t.sites[0] as usize, t.sites[1] as usize);
        total += match t.kind {
            TermKind::Heisenberg => {
                c * heis.get_or_insert_with(|| state.all_heisenberg())[[i, j]]
            }
            TermKind::SzSz => c * zz.get_or_insert_with(|| state.all_zz())[[i, j]],
            TermKind::OccOcc => {
                c * occ2.get_or_insert_with(|| {
                    state.two_point_matrix(
                        ops::occupation::<T>().view(),
                        ops::occupation::<T>().view(),
                    )
                })[[i, j]]
            }
            TermKind::Sz => c * state.expect_site(ops::sz::<T>().view(), i),
            TermKind::Occ => c * state.expect_site(ops::occupation::<T>().view(), i),
            TermKind::X => c * state.expect_site(ops::pauli_x::<T>().view(), i),
            TermKind::Const => c,
        };
    }
    total
}
