//! Lattice geometries and spin Hamiltonians as explicit term lists.
//!
//! All Hamiltonians are sums of one- and two-site operators on a rectangular
//! array of spin-1/2 (equivalently two-level atom) degrees of freedom with
//! open boundaries. A [`TermList`] is the common currency consumed by the
//! tensor-network machinery, the exact-diagonalization oracle, and the
//! serialization layer.
//!
//! # Units
//!
//! Coefficients quoted in MHz are ordinary (not angular) frequencies. Time
//! evolution accumulates a phase `2π · f[MHz] · t[μs]`; the conversion is
//! applied once in the dynamics layer, never here.
//!
//! # Site ordering
//!
//! Sites `(x, y)` with `0 ≤ x < Lx`, `0 ≤ y < Ly` map onto a 1D chain by a
//! column-major snake: column `x` occupies chain slots `x·Ly .. (x+1)·Ly`,
//! traversed upward for even `x` and downward for odd `x`. This keeps every
//! vertical bond nearest-neighbor in the chain. The ordering is stable and
//! part of the serialized format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular lattice of spin-1/2 sites with open boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    lx: usize,
    ly: usize,
    ax: f64,
    ay: f64,
}

impl LatticeGeometry {
    pub fn new(lx: usize, ly: usize, ax: f64, ay: f64) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::Geometry(format!("lattice {lx}x{ly} has no sites")));
        }
        if !(ax > 0.0) || !(ay > 0.0) || !ax.is_finite() || !ay.is_finite() {
            return Err(Error::Geometry(format!("spacings must be positive, got ax={ax}, ay={ay}")));
        }
        Ok(Self { lx, ly, ax, ay })
    }

    /// Unit spacings; convenient for dimensionless couplings.
    pub fn unit(lx: usize, ly: usize) -> Result<Self> {
        Self::new(lx, ly, 1.0, 1.0)
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn ly(&self) -> usize {
        self.ly
    }

    pub fn ax(&self) -> f64 {
        self.ax
    }

    pub fn ay(&self) -> f64 {
        self.ay
    }

    pub fn n_sites(&self) -> usize {
        self.lx * self.ly
    }

    /// Chain slot of site `(x, y)` under the column-major snake.
    pub fn chain_index(&self, x: usize, y: usize) -> usize {
        debug_assert!(x < self.lx && y < self.ly);
        if x % 2 == 0 {
            x * self.ly + y
        } else {
            x * self.ly + (self.ly - 1 - y)
        }
    }

    /// Inverse of [`chain_index`](Self::chain_index).
    pub fn site_at(&self, chain: usize) -> (usize, usize) {
        debug_assert!(chain < self.n_sites());
        let x = chain / self.ly;
        let r = chain % self.ly;
        let y = if x % 2 == 0 { r } else { self.ly - 1 - r };
        (x, y)
    }

    /// Iterate sites in `(x, y)` raster order (x outer, y inner).
    pub fn sites(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.lx).flat_map(move |x| (0..self.ly).map(move |y| (x, y)))
    }

    /// Squared physical distance between two sites.
    pub fn distance2(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let dx = a.0 as f64 - b.0 as f64;
        let dy = a.1 as f64 - b.1 as f64;
        self.ax * self.ax * dx * dx + self.ay * self.ay * dy * dy
    }
}

/// Sublattice sign `(−1)^(x+y)`.
pub fn stagger_sign(x: usize, y: usize) -> f64 {
    if (x + y) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Operator content of a single term.
///
/// Spin operators act in the basis where chain bit 1 is spin-up
/// (`Sz = diag(−1/2, +1/2)` over bit values 0, 1); occupation operators act in
/// the atomic basis where bit 1 is the excited (Rydberg) state (`n = diag(0, 1)`).
/// Both pictures share the same two-level Hilbert space; converting between
/// them is the job of [`StaggeredMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `S⃗_i · S⃗_j`
    Heisenberg,
    /// `Sz_i Sz_j`
    SzSz,
    /// `n_i n_j`
    OccOcc,
    /// `Sz_i`
    Sz,
    /// `n_i`
    Occ,
    /// Pauli `X_i` (drives bit 0 ↔ bit 1; identical in both pictures)
    X,
    /// Constant multiple of the identity
    Const,
}

impl TermKind {
    pub fn arity(&self) -> usize {
        match self {
            TermKind::Heisenberg | TermKind::SzSz | TermKind::OccOcc => 2,
            TermKind::Sz | TermKind::Occ | TermKind::X => 1,
            TermKind::Const => 0,
        }
    }
}

/// One Hamiltonian term: an operator kind, its chain sites, a real coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinTerm {
    pub kind: TermKind,
    /// Chain indices; only the first `kind.arity()` entries are meaningful.
    pub sites: [u32; 2],
    pub coefficient: f64,
}

impl SpinTerm {
    pub fn two_site(kind: TermKind, i: usize, j: usize, coefficient: f64) -> Self {
        debug_assert_eq!(kind.arity(), 2);
        debug_assert_ne!(i, j, "two-site term with coincident sites");
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        Self { kind, sites: [lo as u32, hi as u32], coefficient }
    }

    pub fn one_site(kind: TermKind, i: usize, coefficient: f64) -> Self {
        debug_assert_eq!(kind.arity(), 1);
        Self { kind, sites: [i as u32, 0], coefficient }
    }

    pub fn constant(coefficient: f64) -> Self {
        Self { kind: TermKind::Const, sites: [0, 0], coefficient }
    }

    pub fn active_sites(&self) -> &[u32] {
        &self.sites[..self.kind.arity()]
    }

    fn sort_key(&self) -> (u32, u32, TermKind) {
        match self.kind.arity() {
            2 => (self.sites[0], self.sites[1], self.kind),
            1 => (self.sites[0], u32::MAX, self.kind),
            _ => (u32::MAX, u32::MAX, self.kind),
        }
    }
}

/// Ordered list of terms over a fixed geometry.
///
/// Construction is deterministic: terms are sorted by (site pair, kind), so
/// identical inputs serialize byte-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct TermList {
    geometry: LatticeGeometry,
    terms: Vec<SpinTerm>,
}

impl TermList {
    pub fn new(geometry: LatticeGeometry, mut terms: Vec<SpinTerm>) -> Self {
        for t in &terms {
            for &s in t.active_sites() {
                assert!((s as usize) < geometry.n_sites(), "term site out of range");
            }
            assert!(t.coefficient.is_finite(), "non-finite coefficient");
        }
        terms.sort_by_key(|t| t.sort_key());
        Self { geometry, terms }
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn terms(&self) -> &[SpinTerm] {
        &self.terms
    }

    pub fn n_sites(&self) -> usize {
        self.geometry.n_sites()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// True when every term commutes with total `Sz` (no `X` terms).
    pub fn conserves_sz(&self) -> bool {
        self.terms.iter().all(|t| t.kind != TermKind::X)
    }

    /// Sum of two term lists over the same geometry.
    pub fn merged(&self, other: &TermList) -> Result<TermList> {
        if self.geometry != other.geometry {
            return Err(Error::Shape("cannot merge term lists over different geometries".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Ok(TermList::new(self.geometry, terms))
    }

    /// Serialize to the documented JSON schema. Coefficients are written as
    /// shortest round-trip decimal strings so output is reproducible and
    /// lossless.
    pub fn to_json(&self) -> Result<String> {
        let doc = TermListDoc {
            schema: SCHEMA_NAME.into(),
            version: SCHEMA_VERSION,
            geometry: self.geometry,
            terms: self
                .terms
                .iter()
                .map(|t| TermDoc {
                    kind: t.kind,
                    sites: t.active_sites().to_vec(),
                    coefficient: format_f64(t.coefficient),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(json: &str) -> Result<TermList> {
        let doc: TermListDoc = serde_json::from_str(json)?;
        if doc.schema != SCHEMA_NAME {
            return Err(Error::Config(format!("unexpected schema `{}`", doc.schema)));
        }
        if doc.version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema version {}", doc.version)));
        }
        let mut terms = Vec::with_capacity(doc.terms.len());
        for t in &doc.terms {
            if t.sites.len() != t.kind.arity() {
                return Err(Error::Config(format!(
                    "term kind {:?} expects {} site(s), got {}",
                    t.kind,
                    t.kind.arity(),
                    t.sites.len()
                )));
            }
            let coefficient: f64 = t
                .coefficient
                .parse()
                .map_err(|_| Error::Config(format!("bad coefficient `{}`", t.coefficient)))?;
            let mut sites = [0u32; 2];
            sites[..t.sites.len()].copy_from_slice(&t.sites);
            terms.push(SpinTerm { kind: t.kind, sites, coefficient });
        }
        Ok(TermList::new(doc.geometry, terms))
    }
}

const SCHEMA_NAME: &str = "dtheory/term-list";
const SCHEMA_VERSION: u32 = 1;

/// Shortest decimal string that round-trips to the same f64.
pub(crate) fn format_f64(x: f64) -> String {
    let s = format!("{x}");
    debug_assert_eq!(s.parse::<f64>().unwrap(), x);
    s
}

#[derive(Serialize, Deserialize)]
struct TermListDoc {
    schema: String,
    version: u32,
    geometry: LatticeGeometry,
    terms: Vec<TermDoc>,
}

#[derive(Serialize, Deserialize)]
struct TermDoc {
    kind: TermKind,
    sites: Vec<u32>,
    coefficient: String,
}

/// Nearest-neighbor antiferromagnetic Heisenberg model:
/// `Jx Σ S⃗_(x,y)·S⃗_(x+1,y) + Jy Σ S⃗_(x,y)·S⃗_(x,y+1)` with open boundaries.
pub fn build_nn_heisenberg(geom: &LatticeGeometry, jx: f64, jy: f64) -> TermList {
    assert!(jx.is_finite() && jy.is_finite());
    let mut terms = Vec::new();
    for (x, y) in geom.sites() {
        if x + 1 < geom.lx() {
            terms.push(SpinTerm::two_site(
                TermKind::Heisenberg,
                geom.chain_index(x, y),
                geom.chain_index(x + 1, y),
                jx,
            ));
        }
        if y + 1 < geom.ly() {
            terms.push(SpinTerm::two_site(
                TermKind::Heisenberg,
                geom.chain_index(x, y),
                geom.chain_index(x, y + 1),
                jy,
            ));
        }
    }
    TermList::new(*geom, terms)
}

/// All-pairs staggered `1/r⁶` Heisenberg model:
/// coefficient `(−1)^(1+x1+y1+x2+y2) / (ax²Δx² + ay²Δy²)³` for every site pair.
///
/// The staggering makes the long-range couplings frustration-free: x- and
/// y-nearest neighbors come out antiferromagnetic, diagonal neighbors
/// ferromagnetic.
pub fn build_d6_heisenberg(geom: &LatticeGeometry) -> TermList {
    let n = geom.n_sites();
    let mut terms = Vec::with_capacity(n * (n - 1) / 2);
    let coords: Vec<(usize, usize)> = geom.sites().collect();
    for (a, &(x1, y1)) in coords.iter().enumerate() {
        for &(x2, y2) in coords.iter().skip(a + 1) {
            let r2 = geom.distance2((x1, y1), (x2, y2));
            assert!(r2 > 0.0, "coincident sites");
            let sign = -stagger_sign(x1, y1) * stagger_sign(x2, y2); // (−1)^(1+x1+y1+x2+y2)
            terms.push(SpinTerm::two_site(
                TermKind::Heisenberg,
                geom.chain_index(x1, y1),
                geom.chain_index(x2, y2),
                sign / (r2 * r2 * r2),
            ));
        }
    }
    TermList::new(*geom, terms)
}

/// Rydberg-array Hamiltonian at one instant:
/// `Σ_i Ω_i/2 X_i + Σ_i Δ_i n_i + Σ_(i<j) C6/|r_i − r_j|⁶ n_i n_j`.
///
/// `delta` and `omega` hold per-site values in `(x, y)` raster order (x outer).
pub fn build_rydberg(
    geom: &LatticeGeometry,
    c6: f64,
    delta: &[f64],
    omega: &[f64],
) -> Result<TermList> {
    if !(c6 > 0.0) {
        return Err(Error::Config(format!("C6 must be positive, got {c6}")));
    }
    let n = geom.n_sites();
    if delta.len() != n || omega.len() != n {
        return Err(Error::Shape(format!(
            "expected {n} per-site values, got {} detunings and {} drives",
            delta.len(),
            omega.len()
        )));
    }
    let mut terms = Vec::new();
    let coords: Vec<(usize, usize)> = geom.sites().collect();
    for (a, &(x1, y1)) in coords.iter().enumerate() {
        let i = geom.chain_index(x1, y1);
        if delta[a] != 0.0 {
            terms.push(SpinTerm::one_site(TermKind::Occ, i, delta[a]));
        }
        if omega[a] != 0.0 {
            terms.push(SpinTerm::one_site(TermKind::X, i, omega[a] / 2.0));
        }
        for (b, &(x2, y2)) in coords.iter().enumerate().skip(a + 1) {
            let _ = b;
            let r2 = geom.distance2((x1, y1), (x2, y2));
            terms.push(SpinTerm::two_site(
                TermKind::OccOcc,
                i,
                geom.chain_index(x2, y2),
                c6 / (r2 * r2 * r2),
            ));
        }
    }
    Ok(TermList::new(*geom, terms))
}

/// The per-site identification `n_(x,y) = 1/2 + (−1)^(x+y) Sz_(x,y)` between
/// the occupation and spin pictures.
///
/// It is an invertible affine relabeling: on even-parity sites occupied ↔
/// spin-up, on odd-parity sites occupied ↔ spin-down, so the all-atoms-ground
/// configuration is a Néel spin state.
#[derive(Debug, Clone, Copy)]
pub struct StaggeredMap {
    geom: LatticeGeometry,
}

pub fn staggered_map(geom: &LatticeGeometry) -> StaggeredMap {
    StaggeredMap { geom: *geom }
}

impl StaggeredMap {
    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geom
    }

    /// `(−1)^(x+y)` for the site at the given chain index.
    pub fn sign_at_chain(&self, chain: usize) -> f64 {
        let (x, y) = self.geom.site_at(chain);
        stagger_sign(x, y)
    }

    /// Spin `Sz` value corresponding to an occupation number at a site.
    pub fn spin_z(&self, x: usize, y: usize, n: f64) -> f64 {
        (n - 0.5) * stagger_sign(x, y)
    }

    /// Occupation number corresponding to a spin `Sz` value at a site.
    pub fn occupation(&self, x: usize, y: usize, sz: f64) -> f64 {
        0.5 + stagger_sign(x, y) * sz
    }

    /// Relabel a measured bitstring (chain order) from the spin picture to
    /// the occupation picture: odd-parity sites invert.
    pub fn occupation_bits(&self, spin_bits: &[u8]) -> Vec<u8> {
        spin_bits
            .iter()
            .enumerate()
            .map(|(c, &b)| if self.sign_at_chain(c) > 0.0 { b } else { 1 - b })
            .collect()
    }

    /// Inverse of [`occupation_bits`] (the relabeling is an involution).
    pub fn spin_bits(&self, occupation_bits: &[u8]) -> Vec<u8> {
        self.occupation_bits(occupation_bits)
    }

    /// Rewrite occupation-picture terms (`Occ`, `OccOcc`) as spin-picture
    /// terms (`Sz`, `SzSz`, `Const`). `X`, `Heisenberg`, and spin terms pass
    /// through unchanged.
    pub fn to_spin_picture(&self, terms: &TermList) -> TermList {
        let mut out = Vec::new();
        for t in terms.terms() {
            match t.kind {
                TermKind::Occ => {
                    let i = t.sites[0] as usize;
                    let s = self.sign_at_chain(i);
                    out.push(SpinTerm::constant(0.5 * t.coefficient));
                    out.push(SpinTerm::one_site(TermKind::Sz, i, s * t.coefficient));
                }
                TermKind::OccOcc => {
                    let (i, j) = (t.sites[0] as usize, t.sites[1] as usize);
                    let (si, sj) = (self.sign_at_chain(i), self.sign_at_chain(j));
                    let c = t.coefficient;
                    out.push(SpinTerm::constant(0.25 * c));
                    out.push(SpinTerm::one_site(TermKind::Sz, i, 0.5 * si * c));
                    out.push(SpinTerm::one_site(TermKind::Sz, j, 0.5 * sj * c));
                    out.push(SpinTerm::two_site(TermKind::SzSz, i, j, si * sj * c));
                }
                _ => out.push(*t),
            }
        }
        TermList::new(*terms.geometry(), collect_like_terms(out))
    }

    /// Inverse of [`to_spin_picture`]: rewrite `Sz`/`SzSz` in terms of
    /// occupations.
    pub fn to_occupation_picture(&self, terms: &TermList) -> TermList {
        let mut out = Vec::new();
        for t in terms.terms() {
            match t.kind {
                TermKind::Sz => {
                    let i = t.sites[0] as usize;
                    let s = self.sign_at_chain(i);
                    // Sz_i = s_i (n_i − 1/2)
                    out.push(SpinTerm::one_site(TermKind::Occ, i, s * t.coefficient));
                    out.push(SpinTerm::constant(-0.5 * s * t.coefficient));
                }
                TermKind::SzSz => {
                    let (i, j) = (t.sites[0] as usize, t.sites[1] as usize);
                    let (si, sj) = (self.sign_at_chain(i), self.sign_at_chain(j));
                    let c = si * sj * t.coefficient;
                    // SzSz = s_i s_j (n_i − 1/2)(n_j − 1/2)
                    out.push(SpinTerm::two_site(TermKind::OccOcc, i, j, c));
                    out.push(SpinTerm::one_site(TermKind::Occ, i, -0.5 * c));
                    out.push(SpinTerm::one_site(TermKind::Occ, j, -0.5 * c));
                    out.push(SpinTerm::constant(0.25 * c));
                }
                _ => out.push(*t),
            }
        }
        TermList::new(*terms.geometry(), collect_like_terms(out))
    }
}

/// Merge terms with identical (kind, sites), dropping exact zeros.
fn collect_like_terms(mut terms: Vec<SpinTerm>) -> Vec<SpinTerm> {
    terms.sort_by_key(|t| t.sort_key());
    let mut out: Vec<SpinTerm> = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(prev) if prev.kind == t.kind && prev.active_sites() == t.active_sites() => {
                prev.coefficient += t.coefficient;
            }
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coefficient != 0.0);
    out
}
