//! Matrix product states over spin-1/2 chains.
//!
//! Site tensors have shape `(left_bond, 2, right_bond)`. A state carries an
//! orthogonality center: tensors strictly left of it are left-isometric,
//! tensors strictly right of it right-isometric. Public operations keep the
//! state normalized; norms of intermediate objects are returned separately
//! where they matter (linear combinations, operator application).

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use super::linalg::{lq_thin, qr_thin, svd_truncated};
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// `(left·phys, right)` matrix view of a site tensor.
pub(crate) fn merge_left<T: Scalar>(a: &Array3<T>) -> Array2<T> {
    let (l, d, r) = a.dim();
    a.to_owned()
        .into_shape_with_order((l * d, r))
        .expect("site tensor is contiguous")
}

/// `(left, phys·right)` matrix view of a site tensor.
pub(crate) fn merge_right<T: Scalar>(a: &Array3<T>) -> Array2<T> {
    let (l, d, r) = a.dim();
    a.to_owned()
        .into_shape_with_order((l, d * r))
        .expect("site tensor is contiguous")
}

pub(crate) fn split_left<T: Scalar>(m: Array2<T>, d: usize) -> Array3<T> {
    let (ld, r) = m.dim();
    m.into_shape_with_order((ld / d, d, r)).expect("matrix is contiguous")
}

pub(crate) fn split_right<T: Scalar>(m: Array2<T>, d: usize) -> Array3<T> {
    let (l, dr) = m.dim();
    m.into_shape_with_order((l, d, dr / d)).expect("matrix is contiguous")
}

pub(crate) fn adjoint<T: Scalar>(m: ArrayView2<'_, T>) -> Array2<T> {
    Array2::from_shape_fn((m.ncols(), m.nrows()), |(i, j)| m[[j, i]].conj())
}

/// Spin-1/2 site operators in the bit basis (index 1 = up / excited).
pub mod ops {
    use ndarray::{array, Array2};

    use super::Scalar;

    pub fn sz<T: Scalar>() -> Array2<T> {
        array![[T::from_real(-0.5), T::from_real(0.0)], [T::from_real(0.0), T::from_real(0.5)]]
    }

    pub fn sp<T: Scalar>() -> Array2<T> {
        array![[T::from_real(0.0), T::from_real(0.0)], [T::from_real(1.0), T::from_real(0.0)]]
    }

    pub fn sm<T: Scalar>() -> Array2<T> {
        array![[T::from_real(0.0), T::from_real(1.0)], [T::from_real(0.0), T::from_real(0.0)]]
    }

    pub fn pauli_x<T: Scalar>() -> Array2<T> {
        array![[T::from_real(0.0), T::from_real(1.0)], [T::from_real(1.0), T::from_real(0.0)]]
    }

    pub fn occupation<T: Scalar>() -> Array2<T> {
        array![[T::from_real(0.0), T::from_real(0.0)], [T::from_real(0.0), T::from_real(1.0)]]
    }

    pub fn identity<T: Scalar>() -> Array2<T> {
        array![[T::from_real(1.0), T::from_real(0.0)], [T::from_real(0.0), T::from_real(1.0)]]
    }
}

#[derive(Debug, Clone)]
pub struct MatrixProductState<T: Scalar> {
    tensors: Vec<Array3<T>>,
    center: usize,
    /// Cumulative discarded weight from every truncation applied so far.
    trunc: f64,
}

impl<T: Scalar> MatrixProductState<T> {
    /// Product state from per-site bits (0 or 1).
    pub fn product_state(bits: &[u8]) -> Self {
        assert!(!bits.is_empty());
        let tensors = bits
            .iter()
            .map(|&b| {
                let mut t = Array3::zeros((1, 2, 1));
                t[[0, (b != 0) as usize, 0]] = T::from_real(1.0);
                t
            })
            .collect();
        Self { tensors, center: 0, trunc: 0.0 }
    }

    /// Random state at the given bond dimension (for tests and noise studies).
    pub fn random(n_sites: usize, bond: usize, rng: &mut impl Rng) -> Self {
        let mut tensors = Vec::with_capacity(n_sites);
        for i in 0..n_sites {
            let dl = if i == 0 { 1 } else { bond.min(1 << i).min(1 << (n_sites - i)) };
            let dr = if i + 1 == n_sites {
                1
            } else {
                bond.min(1 << (i + 1)).min(1 << (n_sites - i - 1))
            };
            let t = Array3::from_shape_fn((dl, 2, dr), |_| {
                let re = rng.random_range(-1.0..1.0);
                let im = if T::IS_COMPLEX { rng.random_range(-1.0..1.0) } else { 0.0 };
                T::from_parts(re, im)
            });
            tensors.push(t);
        }
        let (mut s, _norm) = Self::from_raw(tensors);
        s.normalize();
        s.move_center_to(0);
        s
    }

    /// Rebuild a state from stored tensors plus canonical-form metadata,
    /// validating bond consistency. Used by the checkpoint reader.
    pub(crate) fn assemble(tensors: Vec<Array3<T>>, center: usize, trunc: f64) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::Config("empty tensor list".into()));
        }
        if tensors[0].dim().0 != 1 || tensors.last().unwrap().dim().2 != 1 {
            return Err(Error::Shape("boundary bonds must have dimension 1".into()));
        }
        for i in 0..tensors.len() - 1 {
            if tensors[i].dim().2 != tensors[i + 1].dim().0 {
                return Err(Error::Shape(format!("bond mismatch between sites {i} and {}", i + 1)));
            }
        }
        Ok(Self { tensors, center, trunc })
    }

    /// Canonicalize arbitrary tensors (full left QR sweep); returns the state
    /// normalized, along with its original norm.
    pub fn from_raw(tensors: Vec<Array3<T>>) -> (Self, f64) {
        assert!(!tensors.is_empty());
        let mut s = Self { center: tensors.len() - 1, tensors, trunc: 0.0 };
        let n = s.tensors.len();
        for i in 0..n - 1 {
            let m = merge_left(&s.tensors[i]);
            let (q, r) = qr_thin(m.view());
            s.tensors[i] = split_left(q, 2);
            let next = merge_right(&s.tensors[i + 1]);
            s.tensors[i + 1] = split_right(r.dot(&next), 2);
        }
        let norm = s.norm();
        if norm > 0.0 {
            let last = s.tensors.last_mut().unwrap();
            last.mapv_inplace(|x| x.scale(1.0 / norm));
        }
        (s, norm)
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensor(&self, i: usize) -> &Array3<T> {
        &self.tensors[i]
    }

    pub(crate) fn set_tensor(&mut self, i: usize, t: Array3<T>) {
        self.tensors[i] = t;
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub(crate) fn set_center(&mut self, c: usize) {
        self.center = c;
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        (0..self.n_sites() - 1).map(|i| self.tensors[i].dim().2).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn truncation_error(&self) -> f64 {
        self.trunc
    }

    pub(crate) fn add_truncation(&mut self, w: f64) {
        self.trunc = 1.0 - (1.0 - self.trunc) * (1.0 - w);
    }

    pub fn norm(&self) -> f64 {
        self.tensors[self.center].iter().map(|x| x.abs2()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero state");
        self.tensors[self.center].mapv_inplace(|x| x.scale(1.0 / n));
    }

    /// Move the orthogonality center, re-gauging with QR factorizations.
    pub fn move_center_to(&mut self, target: usize) {
        assert!(target < self.n_sites());
        while self.center < target {
            let i = self.center;
            let m = merge_left(&self.tensors[i]);
            let (q, r) = qr_thin(m.view());
            self.tensors[i] = split_left(q, 2);
            let next = merge_right(&self.tensors[i + 1]);
            self.tensors[i + 1] = split_right(r.dot(&next), 2);
            self.center = i + 1;
        }
        while self.center > target {
            let i = self.center;
            let m = merge_right(&self.tensors[i]);
            let (l, q) = lq_thin(m.view());
            self.tensors[i] = split_right(q, 2);
            let prev = merge_left(&self.tensors[i - 1]);
            self.tensors[i - 1] = split_left(prev.dot(&l), 2);
            self.center = i - 1;
        }
    }

    /// Truncate every bond to `max_bond` and relative discarded weight `tol`.
    /// Returns the compressed state (normalized) and the total discarded
    /// weight of this compression.
    pub fn compress(&self, max_bond: usize, tol: f64) -> (Self, f64) {
        assert!(max_bond >= 1);
        let mut s = self.clone();
        s.move_center_to(s.n_sites() - 1);
        let mut kept = 1.0;
        for i in (1..s.n_sites()).rev() {
            let m = merge_right(&s.tensors[i]);
            let svd = svd_truncated(m.view(), max_bond, tol).expect("SVD in compression");
            kept *= 1.0 - svd.discarded;
            s.tensors[i] = split_right(svd.vh, 2);
            // Carry U·S into the previous site.
            let mut us = svd.u;
            for (j, mut col) in us.columns_mut().into_iter().enumerate() {
                let w = svd.s[j];
                col.iter_mut().for_each(|x| *x = x.scale(w));
            }
            let prev = merge_left(&s.tensors[i - 1]);
            s.tensors[i - 1] = split_left(prev.dot(&us), 2);
        }
        s.center = 0;
        let discarded = 1.0 - kept;
        s.add_truncation(discarded);
        s.normalize();
        (s, discarded)
    }

    /// `⟨self|other⟩`
    pub fn overlap(&self, other: &Self) -> Result<T> {
        if self.n_sites() != other.n_sites() {
            return Err(Error::Shape("overlap of states with different site counts".into()));
        }
        // E[a, b] accumulates ⟨self|other⟩ from the left.
        let mut e = Array2::from_elem((1, 1), T::from_real(1.0));
        for (bra, ket) in self.tensors.iter().zip(&other.tensors) {
            let (_, _, br) = bra.dim();
            let (_, _, kr) = ket.dim();
            let mut next = Array2::zeros((br, kr));
            for s in 0..2 {
                let bsh = adjoint(bra.index_axis(Axis(1), s));
                let ks = ket.index_axis(Axis(1), s).to_owned();
                next = next + bsh.dot(&e).dot(&ks);
            }
            e = next;
        }
        Ok(e[[0, 0]])
    }

    /// Dense statevector in chain-bit order (bit `i` of the index = site `i`).
    pub fn to_statevector(&self) -> Vec<T> {
        let n = self.n_sites();
        assert!(n <= 24, "statevector conversion limited to 24 sites");
        let mut acc: Array2<T> = Array2::from_elem((1, 1), T::from_real(1.0));
        // acc: (2^k, bond)
        for t in &self.tensors {
            let (l, _, r) = t.dim();
            let rows = acc.nrows();
            let mut next = Array2::zeros((rows * 2, r));
            for s in 0..2 {
                let block = acc.dot(&t.index_axis(Axis(1), s).to_owned());
                for i in 0..rows {
                    for j in 0..r {
                        // bit s of site k goes into index position k (LSB first)
                        next[[i + s * rows, j]] = block[[i, j]];
                    }
                }
            }
            let _ = l;
            acc = next;
        }
        acc.into_shape_with_order(1 << n).unwrap().to_vec()
    }

    /// `⟨O_i⟩` for a single-site operator.
    pub fn expect_site(&self, op: ArrayView2<'_, T>, site: usize) -> f64 {
        let mut s = self.clone();
        s.move_center_to(site);
        let c = &s.tensors[site];
        let (l, _, r) = c.dim();
        let mut acc = T::from_real(0.0);
        for a in 0..l {
            for b in 0..r {
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        acc = acc + c[[a, s1, b]].conj() * op[[s1, s2]] * c[[a, s2, b]];
                    }
                }
            }
        }
        acc.re()
    }

    /// `⟨A_i B_j⟩` for every ordered pair, with `⟨(A·B)_i⟩` on the diagonal.
    ///
    /// Cost is `O(L² D³)`; used to assemble correlation matrices.
    pub fn two_point_matrix(&self, op_a: ArrayView2<'_, T>, op_b: ArrayView2<'_, T>) -> Array2<f64> {
        let n = self.n_sites();
        let mut out = Array2::zeros((n, n));
        let mut s = self.clone();
        let ab = op_a.dot(&op_b);
        for i in 0..n {
            s.move_center_to(i);
            out[[i, i]] = {
                let c = &s.tensors[i];
                let (l, _, r) = c.dim();
                let mut acc = T::from_real(0.0);
                for a in 0..l {
                    for b in 0..r {
                        for s1 in 0..2 {
                            for s2 in 0..2 {
                                acc = acc + c[[a, s1, b]].conj() * ab[[s1, s2]] * c[[a, s2, b]];
                            }
                        }
                    }
                }
                acc.re()
            };
            // Dressed transfer at i, then propagate right.
            let c = &s.tensors[i];
            let (_, _, r) = c.dim();
            let mut e: Array2<T> = Array2::zeros((r, r));
            for s1 in 0..2 {
                for s2 in 0..2 {
                    let w = op_a[[s1, s2]];
                    if w.abs2() == 0.0 {
                        continue;
                    }
                    let bra = adjoint(c.index_axis(Axis(1), s1));
                    let ket = c.index_axis(Axis(1), s2).to_owned();
                    e = e + (bra.dot(&ket)).mapv(|x| x * w);
                }
            }
            for j in (i + 1)..n {
                let t = &s.tensors[j];
                // close with op_b at j
                let mut val = T::from_real(0.0);
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        let w = op_b[[s1, s2]];
                        if w.abs2() == 0.0 {
                            continue;
                        }
                        let bra = adjoint(t.index_axis(Axis(1), s1));
                        let ket = t.index_axis(Axis(1), s2).to_owned();
                        let m = bra.dot(&e).dot(&ket);
                        let mut tr = T::from_real(0.0);
                        for k in 0..m.nrows().min(m.ncols()) {
                            tr = tr + m[[k, k]];
                        }
                        val = val + tr * w;
                    }
                }
                out[[i, j]] = val.re();
                out[[j, i]] = val.re();
                if j + 1 < n {
                    // propagate with identity
                    let mut next: Array2<T> = Array2::zeros((t.dim().2, t.dim().2));
                    for sp in 0..2 {
                        let bra = adjoint(t.index_axis(Axis(1), sp));
                        let ket = t.index_axis(Axis(1), sp).to_owned();
                        next = next + bra.dot(&e).dot(&ket);
                    }
                    e = next;
                }
            }
        }
        out
    }

    /// Raw `⟨Sz_i Sz_j⟩` for all pairs (¼ on the diagonal).
    pub fn all_zz(&self) -> Array2<f64> {
        self.two_point_matrix(ops::sz::<T>().view(), ops::sz::<T>().view())
    }

    /// `⟨S⃗_i·S⃗_j⟩` for all pairs (¾ on the diagonal).
    pub fn all_heisenberg(&self) -> Array2<f64> {
        let zz = self.all_zz();
        let pm = self.two_point_matrix(ops::sp::<T>().view(), ops::sm::<T>().view());
        let mp = self.two_point_matrix(ops::sm::<T>().view(), ops::sp::<T>().view());
        let n = self.n_sites();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] =
                    if i == j { 0.75 } else { zz[[i, j]] + 0.5 * (pm[[i, j]] + mp[[i, j]]) };
            }
        }
        out
    }

    /// One projective measurement in the site bit basis.
    ///
    /// Sequential conditional sampling; the state must be normalized. Cost is
    /// `O(L d D²)` per shot.
    pub fn sample_shot(&self, rng: &mut impl Rng) -> Result<Vec<u8>> {
        if (self.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Config(format!("sampling needs a normalized state, norm = {}", self.norm())));
        }
        let mut s = self.clone();
        s.move_center_to(0);
        Ok(sample_right_canonical(&s, rng))
    }

    /// Deterministic shot set: shot `k` uses an independent RNG stream keyed
    /// by `(seed, k)`, so results are reproducible and order-independent.
    pub fn sample_shots(&self, n_shots: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
        if (self.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Config(format!("sampling needs a normalized state, norm = {}", self.norm())));
        }
        let mut s = self.clone();
        s.move_center_to(0);
        Ok((0..n_shots)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                sample_right_canonical(&s, &mut rng)
            })
            .collect())
    }

    /// Largest deviation from isometry among the canonical-form tensors.
    pub fn isometry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, t) in self.tensors.iter().enumerate() {
            if i < self.center {
                let m = merge_left(t);
                let g = adjoint(m.view()).dot(&m);
                worst = worst.max(identity_residual(&g));
            } else if i > self.center {
                let m = merge_right(t);
                let g = m.dot(&adjoint(m.view()));
                worst = worst.max(identity_residual(&g));
            }
        }
        worst
    }
}

fn identity_residual<T: Scalar>(g: &Array2<T>) -> f64 {
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { 1.0 } else { 0.0 };
            let d = (g[[i, j]] - T::from_real(expect)).abs2().sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

fn sample_right_canonical<T: Scalar>(s: &MatrixProductState<T>, rng: &mut impl Rng) -> Vec<u8> {
    let n = s.n_sites();
    let mut bits = vec![0u8; n];
    // Conditioned left vector; unit norm at every step.
    let mut left: Array1<T> = Array1::from_elem(1, T::from_real(1.0));
    for (i, t) in s.tensors.iter().enumerate() {
        let cand0 = contract_left(&left, t, 0);
        let p0: f64 = cand0.iter().map(|x| x.abs2()).sum();
        let u: f64 = rng.random();
        if u < p0 {
            bits[i] = 0;
            left = cand0.mapv(|x| x.scale(1.0 / p0.sqrt().max(1e-300)));
        } else {
            bits[i] = 1;
            let cand1 = contract_left(&left, t, 1);
            let p1: f64 = cand1.iter().map(|x| x.abs2()).sum();
            left = cand1.mapv(|x| x.scale(1.0 / p1.sqrt().max(1e-300)));
        }
    }
    bits
}

fn contract_left<T: Scalar>(left: &Array1<T>, t: &Array3<T>, s: usize) -> Array1<T> {
    let block = t.index_axis(Axis(1), s);
    let (l, r) = (block.nrows(), block.ncols());
    let mut out = Array1::zeros(r);
    for a in 0..l {
        let la = left[a];
        if la.abs2() == 0.0 {
            continue;
        }
        for b in 0..r {
            out[b] = out[b] + la * block[[a, b]];
        }
    }
    out
}

/// Linear combination `Σ c_k ψ_k` as a direct-sum MPS (uncompressed), then
/// canonicalized. Returns the normalized state and the norm of the sum.
pub fn mps_sum<T: Scalar>(parts: &[(T, &MatrixProductState<T>)]) -> Result<(MatrixProductState<T>, f64)> {
    let (first_len, n) = match parts.first() {
        Some((_, s)) => (s.n_sites(), parts.len()),
        None => return Err(Error::Config("empty linear combination".into())),
    };
    if parts.iter().any(|(_, s)| s.n_sites() != first_len) {
        return Err(Error::Shape("linear combination of states with different site counts".into()));
    }
    if n == 1 {
        let (c, s) = parts[0];
        let mut out = s.clone();
        let norm = c.abs2().sqrt() * s.norm();
        out.normalize();
        return Ok((out, norm));
    }
    let l = first_len;
    let mut tensors = Vec::with_capacity(l);
    for i in 0..l {
        let dl: usize = if i == 0 { 1 } else { parts.iter().map(|(_, s)| s.tensor(i).dim().0).sum() };
        let dr: usize = if i + 1 == l { 1 } else { parts.iter().map(|(_, s)| s.tensor(i).dim().2).sum() };
        let mut t = Array3::zeros((dl, 2, dr));
        let mut off_l = 0;
        let mut off_r = 0;
        for (c, s) in parts {
            let tk = s.tensor(i);
            let (tl, _, tr) = tk.dim();
            for a in 0..tl {
                for p in 0..2 {
                    for b in 0..tr {
                        let mut v = tk[[a, p, b]];
                        if i == 0 {
                            v = *c * v;
                        }
                        let (ia, ib) =
                            (if i == 0 { 0 } else { off_l + a }, if i + 1 == l { 0 } else { off_r + b });
                        t[[ia, p, ib]] = t[[ia, p, ib]] + v;
                    }
                }
            }
            off_l += tl;
            off_r += tr;
        }
        tensors.push(t);
    }
    Ok(MatrixProductState::from_raw(tensors))
}
