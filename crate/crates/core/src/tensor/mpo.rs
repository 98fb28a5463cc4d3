//! Matrix product operators compiled from term lists.
//!
//! Construction goes through an exact finite-state machine over the chain —
//! one channel per (source site, operator flavor) still awaiting a partner —
//! followed by sequential low-rank SVD compression. For power-law couplings
//! the coefficient structure is numerically low rank, so compressed bond
//! dimensions stay small even for all-pairs interactions.

use ndarray::{Array2, Array3, Array4};
use num_complex::Complex64 as C64;
use std::collections::BTreeSet;

use super::linalg::{qr_thin, svd_truncated};
use super::mps::{adjoint, merge_left, merge_right, ops, split_left, MatrixProductState};
use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::model::{TermKind, TermList};

/// Channel flavor carried across a cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Chan {
    Sz,
    Sp,
    Sm,
    Occ,
}

impl Chan {
    fn open_op(self) -> Array2<f64> {
        match self {
            Chan::Sz => ops::sz(),
            Chan::Sp => ops::sp(),
            Chan::Sm => ops::sm(),
            Chan::Occ => ops::occupation(),
        }
    }

    /// Operator that closes the pair for this flavor.
    fn close_op(self) -> Array2<f64> {
        match self {
            Chan::Sz => ops::sz(),
            Chan::Sp => ops::sm(),
            Chan::Sm => ops::sp(),
            Chan::Occ => ops::occupation(),
        }
    }
}

/// Pair interaction decomposed to channel branches.
fn branches(kind: TermKind, coeff: f64) -> Vec<(Chan, f64)> {
    match kind {
        TermKind::Heisenberg => {
            vec![(Chan::Sz, coeff), (Chan::Sp, 0.5 * coeff), (Chan::Sm, 0.5 * coeff)]
        }
        TermKind::SzSz => vec![(Chan::Sz, coeff)],
        TermKind::OccOcc => vec![(Chan::Occ, coeff)],
        _ => unreachable!("not a pair term"),
    }
}

#[derive(Debug, Clone, Default)]
pub struct MpoBuildLog {
    pub n_terms: usize,
    pub raw_max_bond: usize,
    pub max_bond: usize,
    /// Relative Frobenius-norm error introduced by compression.
    pub compression_error: f64,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct MatrixProductOperator<T: Scalar> {
    tensors: Vec<Array4<T>>, // (wl, s_out, s_in, wr)
    log: MpoBuildLog,
}

impl MatrixProductOperator<f64> {
    /// Compile a term list into an MPO, then compress to relative accuracy
    /// `tol` (Frobenius norm). `tol = 0` keeps the exact machine.
    pub fn from_terms(terms: &TermList, tol: f64) -> Result<Self> {
        if tol < 0.0 {
            return Err(Error::Config("negative compression tolerance".into()));
        }
        let n = terms.n_sites();

        // One-site accumulations and pair bookkeeping in chain coordinates.
        let mut onsite: Vec<Array2<f64>> = vec![Array2::zeros((2, 2)); n];
        // (open site, chan) -> list of (close site, coefficient)
        let mut pair_branches: std::collections::BTreeMap<(usize, Chan), Vec<(usize, f64)>> =
            std::collections::BTreeMap::new();
        for t in terms.terms() {
            match t.kind.arity() {
                0 => {
                    onsite[0] = &onsite[0] + &(ops::identity::<f64>() * t.coefficient);
                }
                1 => {
                    let i = t.sites[0] as usize;
                    let op: Array2<f64> = match t.kind {
                        TermKind::Sz => ops::sz(),
                        TermKind::Occ => ops::occupation(),
                        TermKind::X => ops::pauli_x(),
                        _ => unreachable!(),
                    };
                    onsite[i] = &onsite[i] + &(op * t.coefficient);
                }
                _ => {
                    let (i, j) = (t.sites[0] as usize, t.sites[1] as usize);
                    debug_assert!(i < j);
                    for (chan, c) in branches(t.kind, t.coefficient) {
                        pair_branches.entry((i, chan)).or_default().push((j, c));
                    }
                }
            }
        }

        // Channels alive across each internal cut k (between sites k and k+1).
        let mut cut_channels: Vec<Vec<(usize, Chan)>> = vec![Vec::new(); n.saturating_sub(1)];
        for (&(i, chan), closes) in &pair_branches {
            let j_max = closes.iter().map(|&(j, _)| j).max().unwrap();
            for (k, chans) in cut_channels.iter_mut().enumerate().take(j_max).skip(i) {
                let _ = k;
                chans.push((i, chan));
            }
        }
        for chans in &mut cut_channels {
            let set: BTreeSet<_> = chans.drain(..).collect();
            chans.extend(set);
        }

        let dim_at = |cut: isize| -> usize {
            if cut < 0 || cut as usize >= n.saturating_sub(1).max(0) && n > 0 && cut as usize + 1 >= n {
                1
            } else {
                2 + cut_channels[cut as usize].len()
            }
        };

        let mut tensors = Vec::with_capacity(n);
        let mut raw_max = 1;
        for site in 0..n {
            let left_cut = site as isize - 1;
            let right_cut = site as isize;
            let wl = dim_at(left_cut);
            let wr = dim_at(right_cut);
            raw_max = raw_max.max(wl).max(wr);
            let left_chans: &[(usize, Chan)] =
                if site == 0 { &[] } else { &cut_channels[site - 1] };
            let right_chans: &[(usize, Chan)] =
                if site + 1 == n { &[] } else { &cut_channels[site] };
            // Index layout per internal cut: [start, channels.., end].
            let l_start = 0usize;
            let l_end = wl - 1;
            let r_start = 0usize;
            let r_end = wr - 1;

            let mut w = Array4::<f64>::zeros((wl, 2, 2, wr));
            let mut add = |li: usize, ri: usize, m: &Array2<f64>| {
                for a in 0..2 {
                    for b in 0..2 {
                        w[[li, a, b, ri]] += m[[a, b]];
                    }
                }
            };

            let id = ops::identity::<f64>();
            let left_is_boundary = site == 0;
            let right_is_boundary = site + 1 == n;
            // start → start
            if !right_is_boundary {
                add(l_start, r_start, &id);
            }
            // end → end
            if !left_is_boundary {
                add(l_end, r_end, &id);
            }
            // start → end: accumulated one-site operator at this site
            add(l_start, r_end, &onsite[site]);
            // start → channel openings at this site
            for (ci, &(i, chan)) in right_chans.iter().enumerate() {
                if i == site {
                    add(l_start, r_start + 1 + ci, &chan.open_op());
                }
            }
            for (ci, &(i, chan)) in left_chans.iter().enumerate() {
                let li = l_start + 1 + ci;
                // channel pass-through
                if let Some(ri) = right_chans.iter().position(|&c| c == (i, chan)) {
                    add(li, r_start + 1 + ri, &id);
                }
                // channel closings at this site
                if let Some(closes) = pair_branches.get(&(i, chan)) {
                    let total: f64 =
                        closes.iter().filter(|&&(j, _)| j == site).map(|&(_, c)| c).sum();
                    if total != 0.0 {
                        add(li, r_end, &(chan.close_op() * total));
                    }
                }
            }
            tensors.push(w);
        }

        let mut mpo = Self {
            tensors,
            log: MpoBuildLog {
                n_terms: terms.len(),
                raw_max_bond: raw_max,
                max_bond: raw_max,
                compression_error: 0.0,
                tol,
            },
        };
        if tol > 0.0 && n > 1 {
            mpo.compress(tol);
        }
        mpo.log.max_bond = mpo.max_bond();
        Ok(mpo)
    }

    /// Sequential SVD compression to relative Frobenius accuracy `tol`.
    fn compress(&mut self, tol: f64) {
        let n = self.tensors.len();
        // Left-orthogonalize with QR.
        for i in 0..n - 1 {
            let m = fuse_left(&self.tensors[i]);
            let (q, r) = qr_thin(m.view());
            self.tensors[i] = unfuse_left(q);
            let next = fuse_right(&self.tensors[i + 1]);
            self.tensors[i + 1] = unfuse_right(r.dot(&next));
        }
        // Right-to-left truncation; per-bond budget keeps total error ≤ tol.
        let per_bond = tol * tol / n as f64;
        let mut total_discarded = 0.0;
        for i in (1..n).rev() {
            let m = fuse_right(&self.tensors[i]);
            let svd = svd_truncated(m.view(), usize::MAX, per_bond).expect("MPO compression SVD");
            total_discarded += svd.discarded;
            self.tensors[i] = unfuse_right(svd.vh);
            let mut us = svd.u;
            for (j, mut col) in us.columns_mut().into_iter().enumerate() {
                let w = svd.s[j];
                col.iter_mut().for_each(|x| *x *= w);
            }
            let prev = fuse_left(&self.tensors[i - 1]);
            self.tensors[i - 1] = unfuse_left(prev.dot(&us));
        }
        self.log.compression_error = total_discarded.max(0.0).sqrt();
    }

    pub fn to_complex(&self) -> MatrixProductOperator<C64> {
        MatrixProductOperator {
            tensors: self.tensors.iter().map(|t| t.mapv(|x| C64::new(x, 0.0))).collect(),
            log: self.log.clone(),
        }
    }
}

/// (wl, s', s, wr) → (wl·s'·s?, ...) fusions treating the MPO as an MPS with a
/// fused 4-dimensional physical leg.
fn fuse_left(t: &Array4<f64>) -> Array2<f64> {
    let (wl, d1, d2, wr) = t.dim();
    t.to_owned().into_shape_with_order((wl * d1 * d2, wr)).unwrap()
}

fn fuse_right(t: &Array4<f64>) -> Array2<f64> {
    let (wl, d1, d2, wr) = t.dim();
    t.to_owned().into_shape_with_order((wl, d1 * d2 * wr)).unwrap()
}

fn unfuse_left(m: Array2<f64>) -> Array4<f64> {
    let (rows, wr) = m.dim();
    m.into_shape_with_order((rows / 4, 2, 2, wr)).unwrap()
}

fn unfuse_right(m: Array2<f64>) -> Array4<f64> {
    let (wl, cols) = m.dim();
    m.into_shape_with_order((wl, 2, 2, cols / 4)).unwrap()
}

impl<T: Scalar> MatrixProductOperator<T> {
    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensor(&self, i: usize) -> &Array4<T> {
        &self.tensors[i]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        (0..self.n_sites().saturating_sub(1)).map(|i| self.tensors[i].dim().3).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn log(&self) -> &MpoBuildLog {
        &self.log
    }

    /// `⟨bra_bits|H|ket_bits⟩` between computational product states.
    pub fn matrix_element(&self, bra_bits: &[u8], ket_bits: &[u8]) -> T {
        assert_eq!(bra_bits.len(), self.n_sites());
        assert_eq!(ket_bits.len(), self.n_sites());
        let mut v: Vec<T> = vec![T::from_real(1.0)];
        for (i, t) in self.tensors.iter().enumerate() {
            let (wl, _, _, wr) = t.dim();
            let (a, b) = (bra_bits[i] as usize, ket_bits[i] as usize);
            let mut next = vec![T::from_real(0.0); wr];
            for (l, vl) in v.iter().enumerate().take(wl) {
                for (r, nr) in next.iter_mut().enumerate() {
                    *nr = *nr + *vl * t[[l, a, b, r]];
                }
            }
            v = next;
        }
        v[0]
    }

    /// Dense matrix in chain-bit index order; limited to 10 sites.
    pub fn to_dense(&self) -> Array2<T> {
        let n = self.n_sites();
        assert!(n <= 10, "dense MPO form limited to 10 sites");
        let dim = 1usize << n;
        // acc[(row, col), w]
        let mut acc: Array2<T> = Array2::from_elem((1, self.tensors[0].dim().0), T::from_real(1.0));
        let mut rows = 1usize;
        for t in &self.tensors {
            let (wl, _, _, wr) = t.dim();
            let mut next: Array2<T> = Array2::zeros((rows * 2 * rows * 2, wr));
            for rc in 0..rows * rows {
                let (row, col) = (rc / rows, rc % rows);
                for a in 0..2 {
                    for b in 0..2 {
                        let nrow = row + a * rows;
                        let ncol = col + b * rows;
                        let nrc = nrow * rows * 2 + ncol;
                        for wri in 0..wr {
                            let mut s = T::from_real(0.0);
                            for wli in 0..wl {
                                s = s + acc[[rc, wli]] * t[[wli, a, b, wri]];
                            }
                            next[[nrc, wri]] = next[[nrc, wri]] + s;
                        }
                    }
                }
            }
            acc = next;
            rows *= 2;
        }
        debug_assert_eq!(rows, dim);
        let mut out = Array2::zeros((dim, dim));
        for row in 0..dim {
            for col in 0..dim {
                out[[row, col]] = acc[[row * dim + col, 0]];
            }
        }
        out
    }

    /// Apply to a state by the zip-up algorithm: contract site-by-site with
    /// immediate truncation, then a cleanup sweep. Returns the normalized
    /// result, the norm `‖H|ψ⟩‖`, and the discarded weight.
    pub fn apply_to(
        &self,
        state: &MatrixProductState<T>,
        max_bond: usize,
        tol: f64,
    ) -> Result<(MatrixProductState<T>, f64, f64)> {
        if state.n_sites() != self.n_sites() {
            return Err(Error::Shape("operator and state site counts differ".into()));
        }
        let n = self.n_sites();
        let mut psi = state.clone();
        psi.move_center_to(0);

        // carry[a, w, b]: new-left-bond × mpo-bond × state-left-bond
        let mut carry: Array3<T> = Array3::from_elem((1, 1, 1), T::from_real(1.0));
        let mut tensors: Vec<ndarray::Array3<T>> = Vec::with_capacity(n);
        let mut kept = 1.0f64;
        for i in 0..n {
            let a_t = psi.tensor(i);
            let w_t = &self.tensors[i];
            let (ca, cw, cb) = carry.dim();
            let (_, _, br) = a_t.dim();
            let (_, _, _, wr) = w_t.dim();
            // t1[a, w, s, c] = Σ_b carry[a, w, b] ψ[b, s, c]
            let t1 = {
                let m = carry.into_shape_with_order((ca * cw, cb)).unwrap();
                let p = merge_right(a_t); // (b, s·c)
                m.dot(&p).into_shape_with_order((ca, cw, 2, br)).unwrap()
            };
            // t2[a, s', w', c] = Σ_{w,s} t1[a, w, s, c] W[w, s', s, w']
            let t2 = {
                let t1p = t1.permuted_axes([0, 3, 1, 2]); // (a, c, w, s)
                let t1m = t1p
                    .as_standard_layout()
                    .to_owned()
                    .into_shape_with_order((ca * br, cw * 2))
                    .unwrap();
                let wp = w_t.view().permuted_axes([0, 2, 1, 3]); // (w, s, s', w')
                let wm = wp
                    .as_standard_layout()
                    .to_owned()
                    .into_shape_with_order((cw * 2, 2 * wr))
                    .unwrap();
                let r = t1m.dot(&wm); // (a·c, s'·w')
                r.into_shape_with_order((ca, br, 2, wr))
                    .unwrap()
                    .permuted_axes([0, 2, 3, 1]) // (a, s', w', c)
                    .as_standard_layout()
                    .to_owned()
            };
            if i + 1 == n {
                // (a, s', 1, 1)
                let t = t2.into_shape_with_order((ca, 2, wr * br)).unwrap();
                tensors.push(t);
                carry = Array3::from_elem((1, 1, 1), T::from_real(1.0));
            } else {
                let m = t2.into_shape_with_order((ca * 2, wr * br)).unwrap();
                let svd = svd_truncated(m.view(), max_bond, tol)?;
                kept *= 1.0 - svd.discarded;
                tensors.push(split_left(svd.u, 2));
                let mut sv = svd.vh;
                for (r, mut row) in sv.rows_mut().into_iter().enumerate() {
                    let w = svd.s[r];
                    row.iter_mut().for_each(|x| *x = x.scale(w));
                }
                carry = sv.into_shape_with_order((svd.rank, wr, br)).unwrap();
            }
        }
        let (raw, norm) = MatrixProductState::from_raw(tensors);
        // Cleanup sweep to the requested accuracy.
        let (mut out, d2) = raw.compress(max_bond, tol);
        let discarded = 1.0 - kept * (1.0 - d2);
        out.add_truncation(discarded);
        Ok((out, norm, discarded))
    }
}

/// `⟨ψ|H|ψ⟩` with `|ψ⟩` normalized; errors if the imaginary residual exceeds
/// tolerance for a Hermitian operator.
pub fn expectation<T: Scalar>(
    state: &MatrixProductState<T>,
    mpo: &MatrixProductOperator<T>,
) -> Result<f64> {
    let raw = expectation_raw(state, mpo)?;
    let scale = raw.abs2().sqrt().max(1.0);
    if raw.im().abs() > 1e-9 * scale {
        return Err(Error::numerical(format!(
            "expectation of Hermitian operator has imaginary residual {}",
            raw.im()
        )));
    }
    Ok(raw.re())
}

/// `⟨ψ|H|ψ⟩` without the Hermiticity check.
pub fn expectation_raw<T: Scalar>(
    state: &MatrixProductState<T>,
    mpo: &MatrixProductOperator<T>,
) -> Result<T> {
    if state.n_sites() != mpo.n_sites() {
        return Err(Error::Shape("operator and state site counts differ".into()));
    }
    // E[a_bra, w, a_ket], starting from scalars.
    let mut e: Array3<T> = Array3::from_elem((1, 1, 1), T::from_real(1.0));
    for i in 0..state.n_sites() {
        e = transfer_left(&e, state.tensor(i), mpo.tensor(i), state.tensor(i));
    }
    Ok(e[[0, 0, 0]])
}

/// One left-to-right environment update:
/// `E'[a', w', b'] = Σ E[a, w, b] conj(bra[a, s', a']) W[w, s', s, w'] ket[b, s, b']`.
pub(crate) fn transfer_left<T: Scalar>(
    e: &Array3<T>,
    bra: &Array3<T>,
    w: &Array4<T>,
    ket: &Array3<T>,
) -> Array3<T> {
    let (ea, ew, eb) = e.dim();
    let (_, _, kr) = ket.dim();
    let (_, _, _, wr) = w.dim();
    let (_, _, brr) = bra.dim();
    // t1[a, w, s, b'] = Σ_b E[a, w, b] ket[b, s, b']
    let t1 = {
        let em = e.to_owned().into_shape_with_order((ea * ew, eb)).unwrap();
        let km = merge_right(ket);
        em.dot(&km).into_shape_with_order((ea, ew, 2, kr)).unwrap()
    };
    // t2[a, s', w', b'] = Σ_{w,s} t1[a, w, s, b'] W[w, s', s, w']
    let t2 = {
        let t1p = t1.permuted_axes([0, 3, 1, 2]);
        let t1m = t1p
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((ea * kr, ew * 2))
            .unwrap();
        let wp = w.view().permuted_axes([0, 2, 1, 3]);
        let wm = wp
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((ew * 2, 2 * wr))
            .unwrap();
        t1m.dot(&wm)
            .into_shape_with_order((ea, kr, 2, wr))
            .unwrap()
            .permuted_axes([0, 2, 3, 1])
            .as_standard_layout()
            .to_owned()
    };
    // E'[a', w', b'] = Σ_{a, s'} conj(bra[a, s', a']) t2[a, s', w', b']
    let bm = adjoint(merge_left(bra).view()); // (a', a·s')
    let t2m = t2.into_shape_with_order((ea * 2, wr * kr)).unwrap();
    bm.dot(&t2m).into_shape_with_order((brr, wr, kr)).unwrap()
}

/// Mirror update from the right:
/// `E'[a, w, b] = Σ conj(bra[a, s', a']) W[w, s', s, w'] ket[b, s, b'] E[a', w', b']`.
pub(crate) fn transfer_right<T: Scalar>(
    e: &Array3<T>,
    bra: &Array3<T>,
    w: &Array4<T>,
    ket: &Array3<T>,
) -> Array3<T> {
    let (ea, ew, eb) = e.dim();
    let (kl, _, _) = ket.dim();
    let (wl, _, _, _) = w.dim();
    let (bl, _, _) = bra.dim();
    // t1[b, s, w', a'] = Σ_b' ket[b, s, b'] E_T... contract ket with E over b'.
    let t1 = {
        let km = merge_left(ket); // (b·s, b')
        let ep = e.view().permuted_axes([2, 1, 0]); // (b', w', a')
        let em = ep
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((eb, ew * ea))
            .unwrap();
        km.dot(&em).into_shape_with_order((kl, 2, ew, ea)).unwrap()
    };
    // t2[b, a', s', w] = Σ_{s, w'} t1[b, s, w', a'] W[w, s', s, w']
    let t2 = {
        let t1p = t1.permuted_axes([0, 3, 1, 2]); // (b, a', s, w')
        let t1m = t1p
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((kl * ea, 2 * ew))
            .unwrap();
        let wp = w.view().permuted_axes([2, 3, 1, 0]); // (s, w', s', w)
        let wm = wp
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((2 * ew, 2 * wl))
            .unwrap();
        t1m.dot(&wm).into_shape_with_order((kl, ea, 2, wl)).unwrap()
    };
    // E'[a, w, b] = Σ_{s', a'} conj(bra[a, s', a']) t2[b, a', s', w]
    let bconj = merge_right(bra).mapv(|x| x.conj()); // (a, s'·a')
    let t2p = t2.permuted_axes([2, 1, 3, 0]); // (s', a', w, b)
    let t2m = t2p
        .as_standard_layout()
        .to_owned()
        .into_shape_with_order((2 * ea, wl * kl))
        .unwrap();
    bconj.dot(&t2m).into_shape_with_order((bl, wl, kl)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        build_d6_heisenberg, build_nn_heisenberg, build_rydberg, LatticeGeometry, SpinTerm,
        TermKind, TermList,
    };
    use crate::oracle::{CompiledHamiltonian, SpinBasis};
    use crate::tensor::term_expectation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::sync::Arc;

    fn oracle_dense(terms: &TermList) -> Array2<f64> {
        let basis = Arc::new(SpinBasis::full(terms.n_sites()));
        CompiledHamiltonian::new(terms, basis).unwrap().to_dense()
    }

    #[test]
    fn single_z_term_is_bond_one() {
        let geom = LatticeGeometry::unit(4, 1).unwrap();
        let terms = TermList::new(geom, vec![SpinTerm::one_site(TermKind::Sz, 2, 1.3)]);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap();
        assert_eq!(mpo.max_bond(), 1);
    }

    #[test]
    fn plaquette_dense_matches_oracle() {
        let geom = LatticeGeometry::unit(2, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo = MatrixProductOperator::from_terms(&terms, 0.0).unwrap();
        let dense = mpo.to_dense();
        let expect = oracle_dense(&terms);
        for (a, b) in dense.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn d6_dense_matches_oracle_compressed_and_exact() {
        let geom = LatticeGeometry::new(3, 2, 1.1, 0.9).unwrap();
        let terms = build_d6_heisenberg(&geom);
        let expect = oracle_dense(&terms);
        for tol in [0.0, 1e-10] {
            let mpo = MatrixProductOperator::from_terms(&terms, tol).unwrap();
            let dense = mpo.to_dense();
            for (a, b) in dense.iter().zip(expect.iter()) {
                assert!((a - b).abs() < 1e-9, "tol {tol}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rydberg_dense_matches_oracle() {
        let geom = LatticeGeometry::new(2, 3, 12.5, 11.0).unwrap();
        let delta = vec![1.0, -0.5, 0.3, 0.8, -1.2, 0.1];
        let omega = vec![4.0, 3.0, 2.0, 5.0, 1.0, 6.0];
        let terms = build_rydberg(&geom, 5.42e6, &delta, &omega).unwrap();
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap();
        let dense = mpo.to_dense();
        let expect = oracle_dense(&terms);
        let scale = expect.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in dense.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-11 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn matrix_elements_match_oracle_on_12_spins() {
        let geom = LatticeGeometry::unit(6, 2).unwrap();
        let terms = build_d6_heisenberg(&geom);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-10).unwrap();
        let basis = Arc::new(SpinBasis::full(12));
        let h = CompiledHamiltonian::new(&terms, basis).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut v = vec![0.0; 1 << 12];
        let mut hv = vec![0.0; 1 << 12];
        for _ in 0..24 {
            let ket: u64 = rng.random_range(0..(1u64 << 12));
            let bra: u64 = rng.random_range(0..(1u64 << 12));
            v.iter_mut().for_each(|x| *x = 0.0);
            v[ket as usize] = 1.0;
            h.apply(&v, &mut hv);
            let expect = hv[bra as usize];
            let kb: Vec<u8> = (0..12).map(|i| ((ket >> i) & 1) as u8).collect();
            let bb: Vec<u8> = (0..12).map(|i| ((bra >> i) & 1) as u8).collect();
            let got = mpo.matrix_element(&bb, &kb);
            assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        }
    }

    #[test]
    fn compression_shrinks_long_range_bond() {
        let geom = LatticeGeometry::new(6, 6, 12.5, 11.0).unwrap();
        let terms = build_d6_heisenberg(&geom);
        // Near-lossless compression reaches the exact operator Schmidt rank;
        // lossy tolerances trade bond for a controlled Frobenius error.
        let tight = MatrixProductOperator::from_terms(&terms, 1e-10).unwrap();
        assert!(tight.log().raw_max_bond > 100, "raw bond {}", tight.log().raw_max_bond);
        assert!(tight.max_bond() <= 60, "compressed bond {}", tight.max_bond());
        assert!(tight.log().compression_error < 1e-9);
        let loose = MatrixProductOperator::from_terms(&terms, 1e-4).unwrap();
        assert!(loose.max_bond() < tight.max_bond());
        assert!(loose.log().compression_error < 1e-4);
    }

    #[test]
    fn expectation_matches_term_sum_on_d6() {
        // 6x6 all-pairs operator at tol 1e-10 against the term-by-term route
        // for a random bond-16 state.
        let geom = LatticeGeometry::new(6, 6, 1.0, 0.88).unwrap();
        let terms = build_d6_heisenberg(&geom);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-10).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let psi = MatrixProductState::<f64>::random(36, 16, &mut rng);
        let via_mpo = expectation(&psi, &mpo).unwrap();
        let via_terms = term_expectation(&psi, &terms);
        let scale = via_terms.abs().max(1.0);
        assert!(
            (via_mpo - via_terms).abs() < 1e-8 * scale,
            "{via_mpo} vs {via_terms}"
        );
    }

    #[test]
    fn identity_expectation_is_one() {
        let geom = LatticeGeometry::unit(3, 1).unwrap();
        let terms = TermList::new(geom, vec![SpinTerm::constant(1.0)]);
        let mpo = MatrixProductOperator::from_terms(&terms, 0.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let psi = MatrixProductState::<f64>::random(3, 2, &mut rng);
        assert!((expectation(&psi, &mpo).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neel_energy_on_plaquette() {
        // Four bonds at ⟨Sz Sz⟩ = −1/4 each.
        let geom = LatticeGeometry::unit(2, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap();
        let mut bits = vec![0u8; 4];
        for (x, y) in geom.sites() {
            bits[geom.chain_index(x, y)] = ((x + y) % 2 == 0) as u8;
        }
        let neel = MatrixProductState::<f64>::product_state(&bits);
        assert!((expectation(&neel, &mpo).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_spin_singlet_energy() {
        let geom = LatticeGeometry::unit(2, 1).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo = MatrixProductOperator::from_terms(&terms, 0.0).unwrap();
        let mut t0 = Array3::zeros((1, 2, 2));
        t0[[0, 0, 0]] = 1.0;
        t0[[0, 1, 1]] = 1.0;
        let mut t1 = Array3::zeros((2, 2, 1));
        t1[[0, 1, 0]] = 1.0 / 2f64.sqrt();
        t1[[1, 0, 0]] = -1.0 / 2f64.sqrt();
        let (singlet, _) = MatrixProductState::from_raw(vec![t0, t1]);
        assert!((expectation(&singlet, &mpo).unwrap() + 0.75).abs() < 1e-12);
    }

    #[test]
    fn apply_matches_dense_action() {
        let geom = LatticeGeometry::unit(4, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 0.6);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let psi = MatrixProductState::<f64>::random(8, 12, &mut rng);
        let (hpsi, norm, _disc) = mpo.apply_to(&psi, 256, 0.0).unwrap();
        let dense = oracle_dense(&terms);
        let v = ndarray::Array1::from_vec(psi.to_statevector());
        let expect = dense.dot(&v);
        let got = hpsi.to_statevector();
        let en: f64 = expect.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((en - norm).abs() < 1e-8 * en.max(1.0), "norm {norm} vs {en}");
        // compare up to global sign
        let dir: f64 = expect.iter().zip(&got).map(|(a, b)| a * b).sum();
        let sign = dir.signum();
        for (a, b) in expect.iter().zip(&got) {
            assert!((a / en - sign * b).abs() < 1e-9);
        }
    }
}
