//! Exact brute-force reference for small lattices: sparse Lanczos
//! diagonalization and Krylov time evolution on bitstring statevectors.
//!
//! Nothing here is stored as a matrix; Hamiltonians act on-the-fly through a
//! compiled form of a [`TermList`]. Basis states are `u64` masks where bit
//! `c` is chain site `c` (1 = spin-up / Rydberg-excited), so statevectors up
//! to ~24 spins fit in memory. Matrix-vector products are data-parallel over
//! basis chunks.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{LatticeGeometry, TermKind, TermList};
use crate::observables::{CorrelationMatrix, Picture};
use crate::tensor::linalg;

pub const MAX_GROUND_SITES: usize = 24;
pub const MAX_EVOLVE_SITES: usize = 20;

/// Binomial table for combinatorial ranking of fixed-popcount masks.
#[derive(Debug, Clone)]
struct Binomials {
    c: Vec<[u64; 65]>,
}

impl Binomials {
    fn new(n: usize) -> Self {
        let mut c = vec![[0u64; 65]; n + 1];
        for (row, item) in c.iter_mut().enumerate() {
            item[0] = 1;
            for k in 1..=row {
                item[k] = 0;
            }
        }
        for row in 1..=n {
            for k in 1..=row {
                let below = c[row - 1];
                c[row][k] = below[k - 1] + below[k];
            }
        }
        Self { c }
    }

    /// Colexicographic rank of `mask` among all masks with the same popcount.
    fn rank(&self, mask: u64) -> usize {
        let mut rank = 0u64;
        let mut m = mask;
        let mut i = 1usize;
        while m != 0 {
            let p = m.trailing_zeros() as usize;
            rank += self.c[p][i];
            m &= m - 1;
            i += 1;
        }
        rank as usize
    }
}

/// Computational basis: either the full `2^n` space or a fixed
/// total-`Sz` (fixed up-spin count) sector.
#[derive(Debug, Clone)]
pub struct SpinBasis {
    n_sites: usize,
    /// Sorted masks for a sector; `None` means the full space (index = mask).
    states: Option<Vec<u64>>,
    binomials: Option<Binomials>,
}

impl SpinBasis {
    pub fn full(n_sites: usize) -> Self {
        assert!(n_sites <= 63);
        Self { n_sites, states: None, binomials: None }
    }

    /// All masks with exactly `n_up` set bits, ascending (colex order).
    pub fn sz_sector(n_sites: usize, n_up: usize) -> Self {
        assert!(n_up <= n_sites && n_sites <= 63);
        let mut states = Vec::new();
        if n_up == 0 {
            states.push(0);
        } else {
            // Gosper's hack: iterate n_up-bit masks in increasing order.
            let mut v: u64 = (1 << n_up) - 1;
            let limit: u64 = 1 << n_sites;
            while v < limit {
                states.push(v);
                let t = v | (v - 1);
                v = (t + 1) | (((!t & t.wrapping_add(1)) - 1) >> (v.trailing_zeros() + 1));
            }
        }
        Self { n_sites, states: Some(states), binomials: Some(Binomials::new(n_sites)) }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        match &self.states {
            Some(s) => s.len(),
            None => 1usize << self.n_sites,
        }
    }

    pub fn mask(&self, index: usize) -> u64 {
        match &self.states {
            Some(s) => s[index],
            None => index as u64,
        }
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        match (&self.states, &self.binomials) {
            (Some(s), Some(b)) => {
                let r = b.rank(mask);
                (r < s.len() && s[r] == mask).then_some(r)
            }
            (Some(s), None) => s.binary_search(&mask).ok(),
            _ => Some(mask as usize),
        }
    }

    pub fn is_full(&self) -> bool {
        self.states.is_none()
    }
}

/// Off-diagonal transition rule compiled from a term.
#[derive(Debug, Clone, Copy)]
enum Flip {
    /// `X_i`: always applies.
    Single { mask: u64, coeff: f64 },
    /// Heisenberg flip-flop: applies when the two bits differ.
    Exchange { mask: u64, coeff: f64 },
}

/// A [`TermList`] compiled for fast repeated application.
#[derive(Debug, Clone)]
pub struct CompiledHamiltonian {
    basis: Arc<SpinBasis>,
    /// Precomputed diagonal.
    diag: Vec<f64>,
    flips: Vec<Flip>,
}

impl CompiledHamiltonian {
    pub fn new(terms: &TermList, basis: Arc<SpinBasis>) -> Result<Self> {
        if terms.n_sites() != basis.n_sites() {
            return Err(Error::Shape("term list and basis site counts differ".into()));
        }
        if !basis.is_full() && !terms.conserves_sz() {
            return Err(Error::Config("drive terms require the full basis".into()));
        }
        let mut flips = Vec::new();
        for t in terms.terms() {
            match t.kind {
                TermKind::Heisenberg => {
                    let mask = (1u64 << t.sites[0]) | (1u64 << t.sites[1]);
                    flips.push(Flip::Exchange { mask, coeff: 0.5 * t.coefficient });
                }
                TermKind::X => flips.push(Flip::Single {
                    mask: 1u64 << t.sites[0],
                    coeff: t.coefficient,
                }),
                _ => {}
            }
        }
        let dim = basis.dim();
        let term_data: Vec<_> = terms.terms().to_vec();
        let diag: Vec<f64> = (0..dim)
            .into_par_iter()
            .map(|idx| {
                let m = basis.mask(idx);
                let mut d = 0.0;
                for t in &term_data {
                    d += diagonal_value(t.kind, t.sites, t.coefficient, m);
                }
                d
            })
            .collect();
        Ok(Self { basis: basis.clone(), diag, flips })
    }

    pub fn basis(&self) -> &Arc<SpinBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `out = H v` for real vectors.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.apply_generic(v, out, |x, c| x * c, || 0.0f64, |a, b| a + b)
    }

    /// `out = H v` for complex vectors (coefficients are real).
    pub fn apply_complex(&self, v: &[C64], out: &mut [C64]) {
        self.apply_generic(v, out, |x, c| x * c, || C64::new(0.0, 0.0), |a, b| a + b)
    }

    fn apply_generic<T, F, Z, A>(&self, v: &[T], out: &mut [T], mul: F, zero: Z, add: A)
    where
        T: Copy + Send + Sync,
        F: Fn(T, f64) -> T + Sync,
        Z: Fn() -> T + Sync,
        A: Fn(T, T) -> T + Sync,
    {
        assert_eq!(v.len(), self.dim());
        assert_eq!(out.len(), self.dim());
        let basis = &*self.basis;
        let flips = &self.flips;
        let diag = &self.diag;
        out.par_iter_mut().enumerate().for_each(|(idx, o)| {
            let m = basis.mask(idx);
            let mut acc = mul(v[idx], diag[idx]);
            for f in flips {
                match *f {
                    Flip::Single { mask, coeff } => {
                        let target = m ^ mask;
                        // Full basis guaranteed by construction.
                        acc = add(acc, mul(v[target as usize], coeff));
                    }
                    Flip::Exchange { mask, coeff } => {
                        let bits = m & mask;
                        if bits != 0 && bits != mask {
                            let j = basis
                                .index_of(m ^ mask)
                                .expect("exchange stays in sector");
                            acc = add(acc, mul(v[j], coeff));
                        }
                    }
                }
            }
            let _ = zero;
            *o = acc;
        });
    }

    /// Dense matrix; intended for ≤ 12 sites.
    pub fn to_dense(&self) -> Array2<f64> {
        let dim = self.dim();
        assert!(dim <= 1 << 12, "dense form limited to 4096 states");
        let mut h = Array2::zeros((dim, dim));
        let mut v = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            v[j] = 1.0;
            self.apply(&v, &mut col);
            for i in 0..dim {
                h[[i, j]] = col[i];
            }
            v[j] = 0.0;
        }
        h
    }

    /// Crude upper bound on the spectral radius (Gershgorin-style).
    fn norm_bound(&self) -> f64 {
        let diag_max = self.diag.iter().fold(0.0f64, |a, &d| a.max(d.abs()));
        let flip_sum: f64 = self
            .flips
            .iter()
            .map(|f| match f {
                Flip::Single { coeff, .. } | Flip::Exchange { coeff, .. } => coeff.abs(),
            })
            .sum();
        diag_max + flip_sum
    }
}

fn diagonal_value(kind: TermKind, sites: [u32; 2], coeff: f64, m: u64) -> f64 {
    let bit = |i: u32| (m >> i) & 1;
    match kind {
        TermKind::Heisenberg | TermKind::SzSz => {
            // SzSz contribution; the Heisenberg flip-flop part is off-diagonal.
            if bit(sites[0]) == bit(sites[1]) {
                0.25 * coeff
            } else {
                -0.25 * coeff
            }
        }
        TermKind::OccOcc => {
            if bit(sites[0]) == 1 && bit(sites[1]) == 1 {
                coeff
            } else {
                0.0
            }
        }
        TermKind::Sz => (bit(sites[0]) as f64 - 0.5) * coeff,
        TermKind::Occ => bit(sites[0]) as f64 * coeff,
        TermKind::Const => coeff,
        TermKind::X => 0.0,
    }
}

/// Statevector over a [`SpinBasis`].
#[derive(Debug, Clone)]
pub struct ExactState {
    pub basis: Arc<SpinBasis>,
    pub amps: Vec<C64>,
}

impl ExactState {
    pub fn from_real(basis: Arc<SpinBasis>, amps: &[f64]) -> Self {
        assert_eq!(amps.len(), basis.dim());
        Self { basis, amps: amps.iter().map(|&x| C64::new(x, 0.0)).collect() }
    }

    /// Product state from per-chain-site bits.
    pub fn product(basis: Arc<SpinBasis>, bits: &[u8]) -> Result<Self> {
        let mut mask = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                mask |= 1 << i;
            }
        }
        let idx = basis
            .index_of(mask)
            .ok_or_else(|| Error::Config("product state outside basis sector".into()))?;
        let mut amps = vec![C64::new(0.0, 0.0); basis.dim()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Self { basis, amps })
    }

    pub fn norm(&self) -> f64 {
        self.amps.par_iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn overlap(&self, other: &ExactState) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .fold(C64::new(0.0, 0.0), |s, x| s + x)
    }

    /// Born-rule probabilities, indexed by basis index.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Two lowest eigenpairs of a term list.
#[derive(Debug, Clone)]
pub struct ExactSpectrum {
    pub basis: Arc<SpinBasis>,
    pub e0: f64,
    pub e1: f64,
    pub ground: Vec<f64>,
    pub excited: Vec<f64>,
    pub residuals: [f64; 2],
}

/// How to choose the diagonalization basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SectorPolicy {
    /// Full space below 20 sites, otherwise the `Sz_tot = 0` sector when the
    /// terms allow it.
    #[default]
    Auto,
    Full,
    /// Fixed number of up spins.
    SzSector(usize),
}

fn choose_basis(terms: &TermList, policy: SectorPolicy) -> Result<Arc<SpinBasis>> {
    let n = terms.n_sites();
    let basis = match policy {
        SectorPolicy::Full => SpinBasis::full(n),
        SectorPolicy::SzSector(n_up) => {
            if !terms.conserves_sz() {
                return Err(Error::Config("terms do not conserve total Sz".into()));
            }
            SpinBasis::sz_sector(n, n_up)
        }
        SectorPolicy::Auto => {
            if n > 20 && terms.conserves_sz() && n % 2 == 0 {
                SpinBasis::sz_sector(n, n / 2)
            } else {
                SpinBasis::full(n)
            }
        }
    };
    Ok(Arc::new(basis))
}

/// Lowest two eigenpairs via thick-restart Lanczos with full
/// reorthogonalization. Residual norms are converged below 1e-10.
pub fn exact_ground(terms: &TermList) -> Result<ExactSpectrum> {
    exact_ground_in(terms, SectorPolicy::Auto)
}

pub fn exact_ground_in(terms: &TermList, policy: SectorPolicy) -> Result<ExactSpectrum> {
    let n = terms.n_sites();
    if n > MAX_GROUND_SITES {
        return Err(Error::SizeLimit { n_sites: n, limit: MAX_GROUND_SITES });
    }
    let basis = choose_basis(terms, policy)?;
    let h = CompiledHamiltonian::new(terms, basis.clone())?;
    let dim = h.dim();
    let bound = h.norm_bound();
    let (vals, vecs, res) =
        lanczos_lowest(&|v, out| h.apply(v, out), dim, bound, 2, 1e-10)?;
    Ok(ExactSpectrum {
        basis,
        e0: vals[0],
        e1: vals[1],
        ground: vecs[0].clone(),
        excited: vecs[1].clone(),
        residuals: [res[0], res[1]],
    })
}

/// Ground state only; cheaper than [`exact_ground`] on large sectors. When
/// the terms are flip-symmetric (Heisenberg/SzSz only) and the search runs in
/// the half-filled sector, the global spin-flip symmetry splits the problem
/// into two half-size blocks diagonalized independently.
pub fn exact_ground_state(terms: &TermList, policy: SectorPolicy) -> Result<(ExactState, f64)> {
    let n = terms.n_sites();
    if n > MAX_GROUND_SITES {
        return Err(Error::SizeLimit { n_sites: n, limit: MAX_GROUND_SITES });
    }
    let basis = choose_basis(terms, policy)?;
    let flip_symmetric = terms
        .terms()
        .iter()
        .all(|t| matches!(t.kind, TermKind::Heisenberg | TermKind::SzSz | TermKind::Const));
    if flip_symmetric && !basis.is_full() && n % 2 == 0 && basis.dim() > 1 << 16 {
        let h = CompiledHamiltonian::new(terms, basis.clone())?;
        let flip = FlipBasis::new(&basis, &h);
        let bound = h.norm_bound();
        let mut best: Option<(f64, Vec<f64>, i8)> = None;
        for parity in [1i8, -1i8] {
            let (vals, vecs, _res) = lanczos_lowest(
                &|v, out| flip.apply(&h, parity, v, out),
                flip.reps.len(),
                bound,
                1,
                1e-10,
            )?;
            if best.as_ref().is_none_or(|(e, _, _)| vals[0] < *e) {
                best = Some((vals[0], vecs[0].clone(), parity));
            }
        }
        let (e0, vec, parity) = best.unwrap();
        let full = flip.expand(&vec, parity);
        return Ok((ExactState::from_real(basis, &full), e0));
    }
    let h = CompiledHamiltonian::new(terms, basis.clone())?;
    let dim = h.dim();
    let bound = h.norm_bound();
    let (vals, vecs, _res) =
        lanczos_lowest(&|v, out| h.apply(v, out), dim, bound, 1, 1e-10)?;
    Ok((ExactState::from_real(basis, &vecs[0]), vals[0]))
}

/// Global spin-flip (Z₂) blocks of a half-filled sector: representatives are
/// masks below their bit-complement; every orbit has size two.
struct FlipBasis {
    reps: Vec<u64>,
    /// Diagonal over representatives (flip-invariant for Heisenberg terms).
    diag_rep: Vec<f64>,
    /// Sector rank → (rep index, flipped flag).
    lookup: Vec<u32>,
}

const FLIPPED_BIT: u32 = 1 << 31;

impl FlipBasis {
    fn new(basis: &SpinBasis, h: &CompiledHamiltonian) -> Self {
        let n = basis.n_sites();
        let full_mask = (1u64 << n) - 1;
        let dim = basis.dim();
        let mut reps = Vec::with_capacity(dim / 2);
        let mut diag_rep = Vec::with_capacity(dim / 2);
        let mut lookup = vec![0u32; dim];
        for idx in 0..dim {
            let m = basis.mask(idx);
            let f = (!m) & full_mask;
            if m < f {
                lookup[idx] = reps.len() as u32;
                reps.push(m);
                diag_rep.push(h.diag[idx]);
            }
        }
        for idx in 0..dim {
            let m = basis.mask(idx);
            let f = (!m) & full_mask;
            if m > f {
                let fidx = basis.index_of(f).expect("complement stays in the sector");
                lookup[idx] = lookup[fidx] | FLIPPED_BIT;
            }
        }
        Self { reps, diag_rep, lookup }
    }

    /// `out = H± v` in the parity block. Heisenberg diagonals are
    /// flip-invariant, and exchange moves never connect an orbit to itself,
    /// so the block action only needs a sign on flipped targets.
    fn apply(&self, h: &CompiledHamiltonian, parity: i8, v: &[f64], out: &mut [f64]) {
        let basis = &*h.basis;
        let sign = parity as f64;
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let m = self.reps[r];
            let mut acc = self.diag_rep[r] * v[r];
            for f in &h.flips {
                if let Flip::Exchange { mask, coeff } = *f {
                    let bits = m & mask;
                    if bits != 0 && bits != mask {
                        let t = m ^ mask;
                        let trank = basis.index_of(t).expect("exchange stays in sector");
                        let code = self.lookup[trank];
                        let tr = (code & !FLIPPED_BIT) as usize;
                        let s = if code & FLIPPED_BIT != 0 { sign } else { 1.0 };
                        acc += coeff * s * v[tr];
                    }
                }
            }
            *o = acc;
        });
    }

    /// Expand a block vector to the full sector basis.
    fn expand(&self, v: &[f64], parity: i8) -> Vec<f64> {
        let mut out = vec![0.0; self.lookup.len()];
        let inv = 1.0 / 2f64.sqrt();
        for (idx, &code) in self.lookup.iter().enumerate() {
            let r = (code & !FLIPPED_BIT) as usize;
            let s = if code & FLIPPED_BIT != 0 { parity as f64 } else { 1.0 };
            out[idx] = inv * s * v[r];
        }
        out
    }
}

/// Thick-restart Lanczos for the `n_eigs` lowest eigenpairs of a symmetric
/// operator given through `matvec`. `tol` is an absolute residual target.
fn lanczos_lowest(
    matvec: &(dyn Fn(&[f64], &mut [f64]) + Sync),
    dim: usize,
    norm_bound: f64,
    n_eigs: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    assert!(n_eigs >= 1);

    if dim <= 64 {
        // Dense path for tiny problems.
        let dense = {
            let mut m = Array2::zeros((dim, dim));
            let mut v = vec![0.0; dim];
            let mut col = vec![0.0; dim];
            for j in 0..dim {
                v[j] = 1.0;
                matvec(&v, &mut col);
                for i in 0..dim {
                    m[[i, j]] = col[i];
                }
                v[j] = 0.0;
            }
            m
        };
        let (vals, vecs) = linalg::eigh(dense.view())?;
        let k = n_eigs.min(dim);
        let mut out_vals = Vec::new();
        let mut out_vecs = Vec::new();
        for i in 0..k {
            out_vals.push(vals[i]);
            out_vecs.push(vecs.column(i).to_vec());
        }
        while out_vals.len() < n_eigs {
            out_vals.push(*out_vals.last().unwrap());
            out_vecs.push(out_vecs.last().unwrap().clone());
        }
        return Ok((out_vals, out_vecs, vec![0.0; n_eigs]));
    }

    let m_max = (8 * n_eigs + 56).min(dim);
    let n_keep = (2 * n_eigs + 6).min(m_max - 2);
    let max_cycles = 120;
    let scale = norm_bound.max(1.0);

    // Deterministic pseudo-random start vector.
    let mut v0: Vec<f64> = (0..dim)
        .map(|i| ((i as f64 + 1.0) * 0.6180339887498949).fract() - 0.5)
        .collect();
    normalize(&mut v0);

    // Basis vectors and projected matrix (arrowhead after restart).
    let mut basis_vecs: Vec<Vec<f64>> = vec![v0];
    let mut t = Array2::<f64>::zeros((m_max, m_max));
    let mut k0 = 0usize; // number of restart vectors currently in basis_vecs
    let mut beta_prev: Vec<f64> = Vec::new(); // residual couplings to restart vectors

    for _cycle in 0..max_cycles {
        // Extend with standard Lanczos from basis_vecs[k0], fully
        // reorthogonalizing against everything kept so far. The trailing
        // residual direction survives the cycle in `tail`.
        let mut w = vec![0.0; dim];
        let mut tail: Option<(f64, Vec<f64>)> = None; // (β_m, q_m)
        for j in k0..m_max {
            matvec(&basis_vecs[j], &mut w);
            let alpha = dot(&basis_vecs[j], &w);
            t[[j, j]] = alpha;
            if j == k0 {
                for (i, &b) in beta_prev.iter().enumerate() {
                    t[[i, j]] = b;
                    t[[j, i]] = b;
                }
            }
            // Blocked classical Gram-Schmidt with a selective second pass.
            let pre = norm2(&w);
            let coeffs = block_dots(&basis_vecs, &w);
            block_update(&basis_vecs, &coeffs, &mut w);
            let mut beta = norm2(&w);
            if beta < 0.7 * pre {
                let coeffs = block_dots(&basis_vecs, &w);
                block_update(&basis_vecs, &coeffs, &mut w);
                beta = norm2(&w);
            }
            if beta < 1e-13 * scale {
                // Invariant subspace; try to inject a fresh direction.
                let mut fresh: Vec<f64> = (0..dim)
                    .map(|i| ((i as f64 + 2.0 + j as f64) * 0.7548776662466927).fract() - 0.5)
                    .collect();
                for _ in 0..2 {
                    let coeffs = block_dots(&basis_vecs, &fresh);
                    block_update(&basis_vecs, &coeffs, &mut fresh);
                }
                let n = norm2(&fresh);
                if n < 1e-12 {
                    break; // basis exhausts the space
                }
                fresh.iter_mut().for_each(|x| *x /= n);
                if j + 1 == m_max {
                    tail = Some((0.0, fresh));
                    break;
                }
                // Coupling to the fresh vector is zero by construction.
                basis_vecs.push(fresh);
                continue;
            }
            let mut q = std::mem::replace(&mut w, vec![0.0; dim]);
            q.iter_mut().for_each(|x| *x /= beta);
            if j + 1 == m_max {
                tail = Some((beta, q));
                break;
            }
            t[[j, j + 1]] = beta;
            t[[j + 1, j]] = beta;
            basis_vecs.push(q);
        }
        let m = basis_vecs.len();

        // Ritz pairs of the projected matrix.
        let (vals, vecs) = linalg::eigh(t.slice(ndarray::s![..m, ..m]).view())?;
        let k = n_eigs.min(m);
        let beta_m = tail.as_ref().map_or(0.0, |(b, _)| *b);
        let res_est: Vec<f64> = (0..k).map(|e| (beta_m * vecs[[m - 1, e]]).abs()).collect();

        if res_est.iter().all(|&r| r < tol) || m >= dim || tail.is_none() {
            // Assemble the candidate eigenvectors and verify residuals.
            let ritz = assemble_ritz(&basis_vecs, &vecs, m, k);
            let mut out_vals = Vec::with_capacity(n_eigs);
            let mut out_vecs = Vec::with_capacity(n_eigs);
            let mut out_res = Vec::with_capacity(n_eigs);
            let mut hw = vec![0.0; dim];
            let mut verified = true;
            for (e, mut y) in ritz.into_iter().enumerate() {
                normalize(&mut y);
                matvec(&y, &mut hw);
                let mut r = 0.0f64;
                for i in 0..dim {
                    let d = hw[i] - vals[e] * y[i];
                    r += d * d;
                }
                let r = r.sqrt();
                verified &= r < tol || m >= dim;
                out_vals.push(vals[e]);
                out_vecs.push(y);
                out_res.push(r);
            }
            if verified {
                while out_vals.len() < n_eigs {
                    out_vals.push(*out_vals.last().unwrap());
                    out_vecs.push(out_vecs.last().unwrap().clone());
                    out_res.push(*out_res.last().unwrap());
                }
                return Ok((out_vals, out_vecs, out_res));
            }
            // Estimates were optimistic; fall through to a restart.
        }

        // Thick restart: keep the lowest Ritz vectors plus the residual
        // direction; the coupling row comes from the Lanczos recurrence.
        let keep = n_keep.min(m - 1).max(k);
        let mut new_basis = assemble_ritz(&basis_vecs, &vecs, m, keep);
        for y in &mut new_basis {
            normalize(y);
        }
        let (beta_m, q_tail) = tail.expect("tail exists unless the basis exhausted the space");
        t.fill(0.0);
        beta_prev = (0..keep).map(|e| beta_m * vecs[[m - 1, e]]).collect();
        for (e, _) in new_basis.iter().enumerate() {
            t[[e, e]] = vals[e];
        }
        new_basis.push(q_tail);
        k0 = keep;
        basis_vecs = new_basis;
    }
    Err(Error::NotConverged("Lanczos did not converge within the cycle budget".into()))
}

const GS_CHUNK: usize = 1 << 15;

/// `c[i] = q_i · w`, blocked over chunks so each chunk of every basis vector
/// is streamed exactly once.
fn block_dots(basis: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let dim = w.len();
    let n_chunks = dim.div_ceil(GS_CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * GS_CHUNK;
            let hi = (lo + GS_CHUNK).min(dim);
            let wc = &w[lo..hi];
            basis
                .iter()
                .map(|q| {
                    let qc = &q[lo..hi];
                    let mut s = 0.0;
                    for (a, b) in qc.iter().zip(wc) {
                        s += a * b;
                    }
                    s
                })
                .collect::<Vec<f64>>()
        })
        .reduce(
            || vec![0.0; basis.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// `w -= Σ_i c[i] q_i`, blocked like [`block_dots`].
fn block_update(basis: &[Vec<f64>], coeffs: &[f64], w: &mut [f64]) {
    w.par_chunks_mut(GS_CHUNK).enumerate().for_each(|(c, wc)| {
        let lo = c * GS_CHUNK;
        for (q, &coef) in basis.iter().zip(coeffs) {
            if coef == 0.0 {
                continue;
            }
            let qc = &q[lo..lo + wc.len()];
            for (wi, qi) in wc.iter_mut().zip(qc) {
                *wi -= coef * qi;
            }
        }
    });
}

/// `y_e = Σ_i vecs[i, e] q_i` for `e < k`, chunked so the basis streams once.
fn assemble_ritz(basis: &[Vec<f64>], vecs: &Array2<f64>, m: usize, k: usize) -> Vec<Vec<f64>> {
    let dim = basis[0].len();
    let mut ys = vec![vec![0.0; dim]; k];
    let n_chunks = dim.div_ceil(GS_CHUNK);
    for c in 0..n_chunks {
        let lo = c * GS_CHUNK;
        let hi = (lo + GS_CHUNK).min(dim);
        for (i, q) in basis.iter().enumerate().take(m) {
            let qc = &q[lo..hi];
            for (e, y) in ys.iter_mut().enumerate() {
                let coef = vecs[[i, e]];
                if coef == 0.0 {
                    continue;
                }
                let yc = &mut y[lo..hi];
                for (yi, qi) in yc.iter_mut().zip(qc) {
                    *yi += coef * qi;
                }
            }
        }
    }
    ys
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_iter().zip(b.par_iter()).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    v.iter_mut().for_each(|x| *x /= n);
}

/// `exp(−i H t) |ψ⟩` by adaptive Krylov propagation; `t` is an angular phase
/// time (dimensionless). Error control at 1e-10, norm preserved to 1e-12.
pub fn exact_evolve(state: &ExactState, terms: &TermList, t: f64) -> Result<ExactState> {
    let n = terms.n_sites();
    if n > MAX_EVOLVE_SITES {
        return Err(Error::SizeLimit { n_sites: n, limit: MAX_EVOLVE_SITES });
    }
    let h = CompiledHamiltonian::new(terms, state.basis.clone())?;
    let mut amps = state.amps.clone();
    if t == 0.0 {
        return Ok(ExactState { basis: state.basis.clone(), amps });
    }

    let tol = 1e-10;
    let m_max = 48;
    let norm_h = h.norm_bound().max(1e-30);
    // Substep so the Krylov space stays accurate at modest dimension; double
    // the subdivision if a step fails to converge.
    let mut n_sub = ((t.abs() * norm_h / 15.0).ceil() as usize).max(1);
    'attempt: loop {
        let dt = t / n_sub as f64;
        let mut cur = amps.clone();
        for _ in 0..n_sub {
            match krylov_exp_step(&h, &cur, dt, tol, m_max) {
                Ok(next) => cur = next,
                Err(_) if n_sub < (1 << 22) => {
                    n_sub *= 2;
                    continue 'attempt;
                }
                Err(e) => return Err(e),
            }
        }
        amps = cur;
        break;
    }
    Ok(ExactState { basis: state.basis.clone(), amps })
}

fn krylov_exp_step(
    h: &CompiledHamiltonian,
    v: &[C64],
    dt: f64,
    tol: f64,
    m_max: usize,
) -> Result<Vec<C64>> {
    let dim = v.len();
    let beta0 = v.par_iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if beta0 == 0.0 {
        return Ok(v.to_vec());
    }
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m_max);
    basis.push(v.iter().map(|a| a / beta0).collect());
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];

    loop {
        let j = basis.len() - 1;
        h.apply_complex(&basis[j], &mut w);
        // Hermitian with real coefficients: projections are real.
        let alpha = basis[j]
            .par_iter()
            .zip(w.par_iter())
            .map(|(q, x)| (q.conj() * x).re)
            .sum::<f64>();
        alphas.push(alpha);
        // Full reorthogonalization within the substep.
        for q in &basis {
            let c: C64 = q
                .par_iter()
                .zip(w.par_iter())
                .map(|(qi, wi)| qi.conj() * wi)
                .reduce(|| C64::new(0.0, 0.0), |a, b| a + b);
            w.par_iter_mut().zip(q.par_iter()).for_each(|(wi, qi)| *wi -= c * qi);
        }
        let beta = w.par_iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let m = alphas.len();

        // u = exp(-i T dt) e_1 through the eigenbasis of the projection.
        let mut tmat = Array2::<f64>::zeros((m, m));
        for i in 0..m {
            tmat[[i, i]] = alphas[i];
            if i > 0 {
                tmat[[i, i - 1]] = betas[i - 1];
                tmat[[i - 1, i]] = betas[i - 1];
            }
        }
        let (evals, evecs) = linalg::eigh(tmat.view())?;
        let mut u = vec![C64::new(0.0, 0.0); m];
        for (col, &lam) in evals.iter().enumerate() {
            let phase = C64::from_polar(1.0, -lam * dt);
            let w0 = evecs[[0, col]];
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += evecs[[i, col]] * w0 * phase;
            }
        }

        let tail = beta * u[m - 1].norm() * dt.abs();
        let done = tail < tol || beta < 1e-14;
        if done || m == m_max {
            if !done {
                return Err(Error::numerical(format!(
                    "Krylov propagator residual {tail:.2e} above {tol:.0e} at depth {m}"
                )));
            }
            let mut out = vec![C64::new(0.0, 0.0); dim];
            for (i, q) in basis.iter().enumerate() {
                let c = u[i] * beta0;
                out.par_iter_mut().zip(q.par_iter()).for_each(|(o, qi)| *o += c * qi);
            }
            return Ok(out);
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
}

/// Energy expectation `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn exact_expectation(state: &ExactState, terms: &TermList) -> Result<f64> {
    let h = CompiledHamiltonian::new(terms, state.basis.clone())?;
    let mut hv = vec![C64::new(0.0, 0.0); state.amps.len()];
    h.apply_complex(&state.amps, &mut hv);
    let num: C64 = state
        .amps
        .iter()
        .zip(&hv)
        .map(|(a, b)| a.conj() * b)
        .fold(C64::new(0.0, 0.0), |s, x| s + x);
    let den: f64 = state.amps.iter().map(|a| a.norm_sqr()).sum();
    Ok(num.re / den)
}

/// Raw `⟨Sz_i Sz_j⟩` over all chain-site pairs (diagonal observable).
pub fn zz_matrix(state: &ExactState, n_sites: usize) -> Array2<f64> {
    let dim = state.basis.dim();
    let probs = state.probabilities();
    let norm: f64 = probs.iter().sum();
    let mut zz = Array2::<f64>::zeros((n_sites, n_sites));
    for idx in 0..dim {
        let p = probs[idx] / norm;
        if p == 0.0 {
            continue;
        }
        let m = state.basis.mask(idx);
        for i in 0..n_sites {
            let szi = ((m >> i) & 1) as f64 - 0.5;
            for j in i..n_sites {
                let szj = ((m >> j) & 1) as f64 - 0.5;
                zz[[i, j]] += p * szi * szj;
            }
        }
    }
    for i in 0..n_sites {
        for j in 0..i {
            zz[[i, j]] = zz[[j, i]];
        }
    }
    zz
}

/// Full `⟨S⃗_i · S⃗_j⟩` matrix (includes the off-diagonal exchange part).
pub fn heisenberg_matrix(state: &ExactState, n_sites: usize) -> Array2<f64> {
    let zz = zz_matrix(state, n_sites);
    let dim = state.basis.dim();
    let norm: f64 = state.amps.iter().map(|a| a.norm_sqr()).sum();
    let mut out = zz.clone();
    for i in 0..n_sites {
        out[[i, i]] = 0.75; // S(S+1) for spin-1/2
        for j in (i + 1)..n_sites {
            // ⟨(S+_i S-_j + S-_i S+_j)/2⟩ via one pass over basis states.
            let mask = (1u64 << i) | (1u64 << j);
            let mut acc = 0.0;
            for idx in 0..dim {
                let m = state.basis.mask(idx);
                let bits = m & mask;
                if bits != 0 && bits != mask {
                    if let Some(tgt) = state.basis.index_of(m ^ mask) {
                        acc += 0.5 * (state.amps[tgt].conj() * state.amps[idx]).re;
                    }
                }
            }
            let v = zz[[i, j]] + acc / norm;
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Staggered correlation matrix of the state (see
/// [`observables::correlation_matrix`](crate::observables::correlation_matrix)
/// for the tensor-network counterpart).
pub fn exact_correlation_matrix(
    state: &ExactState,
    geom: &LatticeGeometry,
    picture: Picture,
) -> CorrelationMatrix {
    let dim = state.basis.dim();
    let probs = state.probabilities();
    let norm: f64 = probs.iter().sum();
    let lx = geom.lx();
    let mut g = Array2::<f64>::zeros((lx, lx));
    // A_x(s) = Σ_y w(x,y) (bit − 1/2) is diagonal per basis state.
    let mut weights = vec![0.0; geom.n_sites()];
    for (x, y) in geom.sites() {
        let c = geom.chain_index(x, y);
        weights[c] = match picture {
            Picture::Spin => crate::model::stagger_sign(x, y),
            Picture::Occupation => 1.0,
        };
    }
    let chain_x: Vec<usize> = (0..geom.n_sites()).map(|c| geom.site_at(c).0).collect();
    for idx in 0..dim {
        let p = probs[idx] / norm;
        if p == 0.0 {
            continue;
        }
        let m = state.basis.mask(idx);
        let mut a = vec![0.0; lx];
        for c in 0..geom.n_sites() {
            let sz = ((m >> c) & 1) as f64 - 0.5;
            a[chain_x[c]] += weights[c] * sz;
        }
        for x1 in 0..lx {
            for x2 in x1..lx {
                g[[x1, x2]] += p * a[x1] * a[x2];
            }
        }
    }
    for x1 in 0..lx {
        for x2 in 0..x1 {
            g[[x1, x2]] = g[[x2, x1]];
        }
    }
    CorrelationMatrix::exact(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_nn_heisenberg, build_rydberg, LatticeGeometry};

    #[test]
    fn two_spin_heisenberg_spectrum() {
        let geom = LatticeGeometry::unit(2, 1).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let spec = exact_ground(&terms).unwrap();
        assert!((spec.e0 + 0.75).abs() < 1e-12);
        assert!((spec.e1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn plaquette_ground_energy() {
        // 2x2 open lattice is a 4-site ring: E0 = -2.
        let geom = LatticeGeometry::unit(2, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let spec = exact_ground(&terms).unwrap();
        assert!((spec.e0 + 2.0).abs() < 1e-10, "E0 = {}", spec.e0);
    }

    #[test]
    fn chain_matches_dense() {
        // 1x4 chain: Lanczos against dense diagonalization.
        let geom = LatticeGeometry::unit(4, 1).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let basis = Arc::new(SpinBasis::full(4));
        let h = CompiledHamiltonian::new(&terms, basis.clone()).unwrap();
        let dense = h.to_dense();
        let vals = linalg::eigvalsh(dense.view()).unwrap();
        let spec = exact_ground(&terms).unwrap();
        assert!((spec.e0 - vals[0]).abs() < 1e-10);
        // Known: E0 for the 4-site open Heisenberg chain is -(3/16)(3+2√3)... just
        // trust the dense value and additionally pin the textbook number.
        assert!((spec.e0 + 1.6160254037844386).abs() < 1e-9, "E0 = {}", spec.e0);
    }

    #[test]
    fn sector_matches_full_search() {
        let geom = LatticeGeometry::unit(4, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 0.7);
        let full = exact_ground_in(&terms, SectorPolicy::Full).unwrap();
        let sector = exact_ground_in(&terms, SectorPolicy::SzSector(4)).unwrap();
        assert!((full.e0 - sector.e0).abs() < 1e-9);
        assert!((full.e1 - sector.e1).abs() < 1e-9);
    }

    #[test]
    fn size_limit_enforced() {
        let geom = LatticeGeometry::unit(13, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        assert!(matches!(exact_ground(&terms), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn evolve_eigenstate_is_phase() {
        let geom = LatticeGeometry::unit(2, 1).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let spec = exact_ground(&terms).unwrap();
        let psi = ExactState::from_real(spec.basis.clone(), &spec.ground);
        let evolved = exact_evolve(&psi, &terms, 0.37).unwrap();
        let ov = psi.overlap(&evolved);
        assert!((ov.norm() - 1.0).abs() < 1e-10);
        assert!((evolved.norm() - 1.0).abs() < 1e-12);
        // Phase should be exp(-i E0 t).
        let expected = C64::from_polar(1.0, -spec.e0 * 0.37);
        assert!((ov - expected).norm() < 1e-9);
    }

    #[test]
    fn evolve_identity_at_zero_time() {
        let geom = LatticeGeometry::unit(2, 1).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let basis = Arc::new(SpinBasis::full(2));
        let psi = ExactState::product(basis, &[1, 0]).unwrap();
        let evolved = exact_evolve(&psi, &terms, 0.0).unwrap();
        assert!((psi.overlap(&evolved).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evolve_matches_dense_exponential() {
        // 2x3 Rydberg segment against the dense matrix exponential.
        let geom = LatticeGeometry::new(2, 3, 12.5, 11.0).unwrap();
        let delta = vec![1.3, -0.4, 2.0, 0.8, -1.1, 0.5];
        let omega = vec![5.0, 4.0, 3.0, 2.0, 6.0, 1.0];
        let terms = build_rydberg(&geom, 5.42e6, &delta, &omega).unwrap();
        let basis = Arc::new(SpinBasis::full(6));
        let psi = ExactState::product(basis.clone(), &[0; 6]).unwrap();
        let t = 0.9;
        let evolved = exact_evolve(&psi, &terms, t).unwrap();

        let h = CompiledHamiltonian::new(&terms, basis).unwrap();
        let dense = h.to_dense();
        let (vals, vecs) = linalg::eigh(dense.view()).unwrap();
        // exp(-iHt) ψ via the eigenbasis.
        let dim = 64;
        let mut expected = vec![C64::new(0.0, 0.0); dim];
        for col in 0..dim {
            let mut proj = C64::new(0.0, 0.0);
            for i in 0..dim {
                proj += vecs[[i, col]] * psi.amps[i];
            }
            let phase = C64::from_polar(1.0, -vals[col] * t);
            for i in 0..dim {
                expected[i] += vecs[[i, col]] * proj * phase;
            }
        }
        let err: f64 = evolved
            .amps
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-9, "propagator error {err}");
    }

    #[test]
    fn neel_correlation_structure() {
        // Néel statevector: G = (Ly²/4) * ones.
        let geom = LatticeGeometry::unit(3, 2).unwrap();
        let basis = Arc::new(SpinBasis::full(6));
        let mut bits = vec![0u8; 6];
        for (x, y) in geom.sites() {
            bits[geom.chain_index(x, y)] = ((x + y) % 2 == 0) as u8;
        }
        let psi = ExactState::product(basis, &bits).unwrap();
        let g = exact_correlation_matrix(&psi, &geom, Picture::Spin);
        for v in g.matrix().iter() {
            assert!((v - 1.0).abs() < 1e-12); // Ly²/4 = 1
        }
    }

    #[test]
    fn singlet_pair_heisenberg_matrix() {
        let geom = LatticeGeometry::unit(2, 1).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let spec = exact_ground(&terms).unwrap();
        let psi = ExactState::from_real(spec.basis.clone(), &spec.ground);
        let hh = heisenberg_matrix(&psi, 2);
        assert!((hh[[0, 1]] + 0.75).abs() < 1e-10);
        let zz = zz_matrix(&psi, 2);
        assert!((zz[[0, 1]] + 0.25).abs() < 1e-10);
        assert!((zz[[0, 0]] - 0.25).abs() < 1e-12);
    }
}
