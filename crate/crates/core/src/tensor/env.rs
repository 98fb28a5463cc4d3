//! Left/right environment tensors for sweeping algorithms.
//!
//! Environments carry the contraction of everything outside a local window:
//! `left[i]` is the block strictly left of site `i` with indices
//! `(bra_bond, mpo_bond, ket_bond)`, `right[i]` the block strictly right of
//! site `i`. Effective one-, two-, and zero-site Hamiltonians are applied
//! through them.

use ndarray::{Array2, Array3, Array4};

use super::mpo::{transfer_left, transfer_right, MatrixProductOperator};
use super::mps::{adjoint, merge_left, merge_right, MatrixProductState};
use super::scalar::Scalar;

pub(crate) struct Environments<T: Scalar> {
    pub left: Vec<Array3<T>>,
    pub right: Vec<Array3<T>>,
}

impl<T: Scalar> Environments<T> {
    /// Build all environments for `⟨ψ|H|ψ⟩`.
    pub fn new(state: &MatrixProductState<T>, mpo: &MatrixProductOperator<T>) -> Self {
        let n = state.n_sites();
        let scalar = || Array3::from_elem((1, 1, 1), T::from_real(1.0));
        let mut left = vec![scalar(); n];
        let mut right = vec![scalar(); n];
        for i in 0..n - 1 {
            left[i + 1] = transfer_left(&left[i], state.tensor(i), mpo.tensor(i), state.tensor(i));
        }
        for i in (1..n).rev() {
            right[i - 1] =
                transfer_right(&right[i], state.tensor(i), mpo.tensor(i), state.tensor(i));
        }
        Self { left, right }
    }

    pub fn update_left(&mut self, i: usize, state: &MatrixProductState<T>, mpo: &MatrixProductOperator<T>) {
        let e = transfer_left(&self.left[i], state.tensor(i), mpo.tensor(i), state.tensor(i));
        self.left[i + 1] = e;
    }

    pub fn update_right(&mut self, i: usize, state: &MatrixProductState<T>, mpo: &MatrixProductOperator<T>) {
        let e = transfer_right(&self.right[i], state.tensor(i), mpo.tensor(i), state.tensor(i));
        self.right[i - 1] = e;
    }

    /// One-site effective Hamiltonian at `i` applied to `v` of shape
    /// `(dl, 2, dr)`.
    pub fn apply_one_site(&self, i: usize, w: &Array4<T>, v: &Array3<T>) -> Array3<T> {
        let l = &self.left[i];
        let r = &self.right[i];
        let (la, lw, _) = l.dim();
        let (_, _, _, wr) = w.dim();
        let (_, _, vc) = v.dim();
        let (ra, _, _) = r.dim();
        // t1[a, w, s, c'] = Σ_a' L[a, w, a'] v[a', s, c']
        let t1 = {
            let lm = l.to_owned().into_shape_with_order((la * lw, l.dim().2)).unwrap();
            let vm = merge_right(v);
            lm.dot(&vm).into_shape_with_order((la, lw, 2, vc)).unwrap()
        };
        // t2[a, c', s'', w'] = Σ_{w, s} t1[a, w, s, c'] W[w, s'', s, w']
        let t2 = {
            let t1p = t1.permuted_axes([0, 3, 1, 2]);
            let t1m = t1p
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((la * vc, lw * 2))
                .unwrap();
            let wp = w.view().permuted_axes([0, 2, 1, 3]);
            let wm = wp
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((lw * 2, 2 * wr))
                .unwrap();
            t1m.dot(&wm).into_shape_with_order((la, vc, 2, wr)).unwrap()
        };
        // hv[a, s'', c] = Σ_{w', c'} t2[a, c', s'', w'] R[c, w', c']
        let t2p = t2.permuted_axes([0, 2, 3, 1]); // (a, s'', w', c')
        let t2m = t2p
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((la * 2, wr * vc))
            .unwrap();
        let rp = r.view().permuted_axes([1, 2, 0]); // (w', c', c)
        let rm = rp
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((wr * vc, ra))
            .unwrap();
        t2m.dot(&rm).into_shape_with_order((la, 2, ra)).unwrap()
    }

    /// Two-site effective Hamiltonian on the window `(i, i+1)` applied to
    /// `theta` of shape `(dl, 2, 2, dr)`.
    pub fn apply_two_site(
        &self,
        i: usize,
        w1: &Array4<T>,
        w2: &Array4<T>,
        theta: &Array4<T>,
    ) -> Array4<T> {
        let l = &self.left[i];
        let r = &self.right[i + 1];
        let (la, lw, lk) = l.dim();
        let (_, _, _, wm1) = w1.dim();
        let (_, _, _, wr2) = w2.dim();
        let (_, _, _, tc) = theta.dim();
        let (ra, _, _) = r.dim();
        // t1[a, w, s1, s2, c'] = Σ_a' L[a, w, a'] θ[a', s1, s2, c']
        let t1 = {
            let lm = l.to_owned().into_shape_with_order((la * lw, lk)).unwrap();
            let tm = theta.to_owned().into_shape_with_order((theta.dim().0, 4 * tc)).unwrap();
            lm.dot(&tm).into_shape_with_order((la, lw, 2, 2, tc)).unwrap()
        };
        // t2[a, s2, c', s1'', wm] = Σ_{w, s1} t1[a, w, s1, s2, c'] W1[w, s1'', s1, wm]
        let t2 = {
            let t1p = t1.permuted_axes([0, 3, 4, 1, 2]); // (a, s2, c', w, s1)
            let t1m = t1p
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((la * 2 * tc, lw * 2))
                .unwrap();
            let wp = w1.view().permuted_axes([0, 2, 1, 3]); // (w, s1, s1'', wm)
            let wm = wp
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((lw * 2, 2 * wm1))
                .unwrap();
            t1m.dot(&wm).into_shape_with_order((la, 2, tc, 2, wm1)).unwrap()
        };
        // t3[a, c', s1'', s2'', w'] = Σ_{wm, s2} t2[a, s2, c', s1'', wm] W2[wm, s2'', s2, w']
        let t3 = {
            let t2p = t2.permuted_axes([0, 2, 3, 4, 1]); // (a, c', s1'', wm, s2)
            let t2m = t2p
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((la * tc * 2, wm1 * 2))
                .unwrap();
            let wp = w2.view().permuted_axes([0, 2, 1, 3]); // (wm, s2, s2'', w')
            let wm = wp
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((wm1 * 2, 2 * wr2))
                .unwrap();
            t2m.dot(&wm).into_shape_with_order((la, tc, 2, 2, wr2)).unwrap()
        };
        // hv[a, s1'', s2'', c] = Σ_{w', c'} t3[a, c', s1'', s2'', w'] R[c, w', c']
        let t3p = t3.permuted_axes([0, 2, 3, 4, 1]); // (a, s1'', s2'', w', c')
        let t3m = t3p
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((la * 4, wr2 * tc))
            .unwrap();
        let rp = r.view().permuted_axes([1, 2, 0]);
        let rm = rp
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((wr2 * tc, ra))
            .unwrap();
        t3m.dot(&rm).into_shape_with_order((la, 2, 2, ra)).unwrap()
    }

    /// Half-applied Hamiltonian for the density-matrix noise term when
    /// moving right: rows are the system block `(dl, s1'')`, columns collect
    /// `(w_mid, s2, dr)`.
    pub fn noise_half_applied_right(
        &self,
        i: usize,
        w1: &Array4<T>,
        theta: &Array2<T>,
    ) -> Array2<T> {
        let l = &self.left[i];
        let (la, lw, lk) = l.dim();
        let (_, _, _, wm1) = w1.dim();
        let dr = theta.dim().1 / 2;
        let dl = theta.dim().0 / 2;
        // t1[a, w, s1, s2, c'] = Σ_a' L[a, w, a'] θ[a', s1, s2, c']
        let t1 = {
            let lm = l.to_owned().into_shape_with_order((la * lw, lk)).unwrap();
            let tm = theta.to_owned().into_shape_with_order((dl, 4 * dr)).unwrap();
            lm.dot(&tm).into_shape_with_order((la, lw, 2, 2, dr)).unwrap()
        };
        // t2[a, s2, c', s1'', wm] = Σ_{w, s1} t1 W1[w, s1'', s1, wm]
        let t2 = {
            let t1p = t1.permuted_axes([0, 3, 4, 1, 2]);
            let t1m = t1p
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((la * 2 * dr, lw * 2))
                .unwrap();
            let wp = w1.view().permuted_axes([0, 2, 1, 3]);
            let wm = wp
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((lw * 2, 2 * wm1))
                .unwrap();
            t1m.dot(&wm).into_shape_with_order((la, 2, dr, 2, wm1)).unwrap()
        };
        // M[(a, s1''), (wm, s2, c')]
        let t2p = t2.permuted_axes([0, 3, 4, 1, 2]);
        t2p.as_standard_layout()
            .to_owned()
            .into_shape_with_order((la * 2, wm1 * 2 * dr))
            .unwrap()
    }

    /// Mirror of [`noise_half_applied_right`] for right-to-left moves: rows
    /// collect `(dl, s1, w_mid)`, columns are the system block `(s2'', dr)`.
    pub fn noise_half_applied_left(
        &self,
        i: usize,
        w2: &Array4<T>,
        theta: &Array2<T>,
    ) -> Array2<T> {
        let r = &self.right[i + 1];
        let (ra, rw, rk) = r.dim();
        let dl = theta.dim().0 / 2;
        let dr = theta.dim().1 / 2;
        let (wm2, _, _, _) = w2.dim();
        // t1[a, s1, s2, w', c] = Σ_c' θ[a, s1, s2, c'] R[c, w', c']
        let t1 = {
            let tm = theta.to_owned().into_shape_with_order((dl * 4, dr)).unwrap();
            let rp = r.view().permuted_axes([2, 1, 0]); // (c', w', c)
            let rm = rp
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((rk, rw * ra))
                .unwrap();
            tm.dot(&rm).into_shape_with_order((dl, 2, 2, rw, ra)).unwrap()
        };
        // t2[a, s1, c, wm, s2''] = Σ_{s2, w'} t1 W2[wm, s2'', s2, w']
        let t2 = {
            let t1p = t1.permuted_axes([0, 1, 4, 2, 3]); // (a, s1, c, s2, w')
            let t1m = t1p
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((dl * 2 * ra, 2 * rw))
                .unwrap();
            let wp = w2.view().permuted_axes([2, 3, 0, 1]); // (s2, w', wm, s2'')
            let wm = wp
                .as_standard_layout()
                .to_owned()
                .into_shape_with_order((2 * rw, wm2 * 2))
                .unwrap();
            t1m.dot(&wm).into_shape_with_order((dl, 2, ra, wm2, 2)).unwrap()
        };
        // M[(a, s1, wm), (s2'', c)]
        let t2p = t2.permuted_axes([0, 1, 3, 4, 2]);
        t2p.as_standard_layout()
            .to_owned()
            .into_shape_with_order((dl * 2 * wm2, 2 * ra))
            .unwrap()
    }

    /// Zero-site (bond) effective Hamiltonian between sites `i-1` and `i`,
    /// i.e. built from `left[i]` and `right[i-1]`, applied to `v` of shape
    /// `(dl, dr)`.
    pub fn apply_bond(&self, i: usize, v: &Array2<T>) -> Array2<T> {
        let l = &self.left[i];
        let r = &self.right[i - 1];
        let (la, lw, lk) = l.dim();
        let (ra, _, rk) = r.dim();
        let t1 = {
            let lm = l.to_owned().into_shape_with_order((la * lw, lk)).unwrap();
            lm.dot(v).into_shape_with_order((la, lw, v.dim().1)).unwrap()
        };
        let t1m = t1.into_shape_with_order((la, lw * rk)).unwrap();
        let rp = r.view().permuted_axes([1, 2, 0]);
        let rm = rp
            .as_standard_layout()
            .to_owned()
            .into_shape_with_order((lw * rk, ra))
            .unwrap();
        t1m.dot(&rm)
    }
}

/// Plain overlap environments `⟨bra|ket⟩` (no operator), used for
/// orthogonality penalties against reference states.
pub(crate) struct OverlapEnvs<T: Scalar> {
    pub left: Vec<Array2<T>>,
    pub right: Vec<Array2<T>>,
}

impl<T: Scalar> OverlapEnvs<T> {
    pub fn new(bra: &MatrixProductState<T>, ket: &MatrixProductState<T>) -> Self {
        let n = bra.n_sites();
        let scalar = || Array2::from_elem((1, 1), T::from_real(1.0));
        let mut left = vec![scalar(); n];
        let mut right = vec![scalar(); n];
        for i in 0..n - 1 {
            left[i + 1] = overlap_left(&left[i], bra.tensor(i), ket.tensor(i));
        }
        for i in (1..n).rev() {
            right[i - 1] = overlap_right(&right[i], bra.tensor(i), ket.tensor(i));
        }
        Self { left, right }
    }

    pub fn update_left(&mut self, i: usize, bra: &MatrixProductState<T>, ket: &MatrixProductState<T>) {
        self.left[i + 1] = overlap_left(&self.left[i], bra.tensor(i), ket.tensor(i));
    }

    pub fn update_right(&mut self, i: usize, bra: &MatrixProductState<T>, ket: &MatrixProductState<T>) {
        self.right[i - 1] = overlap_right(&self.right[i], bra.tensor(i), ket.tensor(i));
    }

    /// The ket state projected into the two-site window `(i, i+1)` of the bra
    /// bond bases: `g[a, s1, s2, c] = Σ L[a, a0] K_i[a0, s1, m] K_{i+1}[m, s2, c0] R[c, c0]`.
    pub fn window_two_site(&self, i: usize, ket: &MatrixProductState<T>) -> Array4<T> {
        let l = &self.left[i];
        let r = &self.right[i + 1];
        let k1 = ket.tensor(i);
        let k2 = ket.tensor(i + 1);
        let (la, _) = l.dim();
        let (ra, _) = r.dim();
        let m1 = l.dot(&merge_right(k1)); // (a, s1·m)
        let m1 = m1.into_shape_with_order((la * 2, k1.dim().2)).unwrap();
        let m2 = m1.dot(&merge_right(k2).view()); // (a·s1, s2·c0)
        let m2 = m2.into_shape_with_order((la * 4, k2.dim().2)).unwrap();
        let rt = Array2::from_shape_fn((r.dim().1, ra), |(i, j)| r[[j, i]]);
        m2.dot(&rt).into_shape_with_order((la, 2, 2, ra)).unwrap()
    }

}

fn overlap_left<T: Scalar>(e: &Array2<T>, bra: &Array3<T>, ket: &Array3<T>) -> Array2<T> {
    // E'[a', b'] = Σ_{a, s, b} conj(bra[a, s, a']) E[a, b] ket[b, s, b']
    let mut out = Array2::zeros((bra.dim().2, ket.dim().2));
    for s in 0..2 {
        let bh = adjoint(bra.index_axis(ndarray::Axis(1), s));
        let km = ket.index_axis(ndarray::Axis(1), s).to_owned();
        out = out + bh.dot(e).dot(&km);
    }
    out
}

fn overlap_right<T: Scalar>(e: &Array2<T>, bra: &Array3<T>, ket: &Array3<T>) -> Array2<T> {
    // E'[a, b] = Σ_{s, a', b'} conj(bra[a, s, a']) E[a', b'] ket[b, s, b']
    let mut out = Array2::zeros((bra.dim().0, ket.dim().0));
    for s in 0..2 {
        let b = bra.index_axis(ndarray::Axis(1), s).to_owned().mapv(|x| x.conj());
        let km = ket.index_axis(ndarray::Axis(1), s);
        let kt = Array2::from_shape_fn((km.ncols(), km.nrows()), |(i, j)| km[[j, i]]);
        out = out + b.dot(e).dot(&kt);
    }
    out
}

/// Contract two neighboring site tensors into a two-site block.
pub(crate) fn two_site_block<T: Scalar>(a: &Array3<T>, b: &Array3<T>) -> Array4<T> {
    let (al, _, _) = a.dim();
    let (_, _, br) = b.dim();
    let m = merge_left(a).dot(&merge_right(b));
    m.into_shape_with_order((al, 2, 2, br)).unwrap()
}
