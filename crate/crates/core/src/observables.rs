//! Measurement layer: staggered correlation matrix, renormalized coupling,
//! step-scaling points, finite-shot estimation with bootstrap errors, and the
//! two-loop perturbative reference curve.
//!
//! The finite-volume coupling is defined from the two largest eigenvalues of
//! the staggered correlation matrix
//! `G(x1,x2) = Σ_{y1,y2} (−1)^(x1+y1+x2+y2) ⟨Sz_{x1,y1} Sz_{x2,y2}⟩`:
//!
//! `ḡ(L) = ½ √( (G0/G1 − 1) / (L sin(π/2L)) )`,
//!
//! and the step-scaling function is `F_s(z) = s ḡ(sL)/ḡ(L)` at fixed bare
//! parameters, with `z = ḡ(L)`.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{stagger_sign, LatticeGeometry};
use crate::tensor::{MatrixProductState, Scalar};

/// Which on-site basis the state is expressed in.
///
/// Spin-picture states measure `Sz` directly; occupation-picture states
/// (Rydberg simulations) measure `n`, and the staggered identification
/// `(−1)^(x+y) Sz = n − 1/2` makes the staggered sign drop out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Picture {
    Spin,
    Occupation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CorrelationSource {
    Exact,
    Shots { n_shots: usize, seed: u64 },
}

/// Symmetric `Lx × Lx` staggered correlation matrix.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    g: Array2<f64>,
    source: CorrelationSource,
}

impl CorrelationMatrix {
    pub fn exact(g: Array2<f64>) -> Self {
        debug_assert_eq!(g.nrows(), g.ncols());
        Self { g, source: CorrelationSource::Exact }
    }

    pub fn from_shots_matrix(g: Array2<f64>, n_shots: usize, seed: u64) -> Self {
        Self { g, source: CorrelationSource::Shots { n_shots, seed } }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.g
    }

    pub fn lx(&self) -> usize {
        self.g.nrows()
    }

    pub fn source(&self) -> &CorrelationSource {
        &self.source
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let vals = crate::tensor::linalg::eigvalsh(self.g.view())?;
        let mut v: Vec<f64> = vals.to_vec();
        v.reverse();
        Ok(v)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.g.nrows() {
            for j in 0..i {
                worst = worst.max((self.g[[i, j]] - self.g[[j, i]]).abs());
            }
        }
        worst
    }
}

/// Staggered correlation matrix from exact tensor-network expectations.
pub fn correlation_matrix<T: Scalar>(
    state: &MatrixProductState<T>,
    geom: &LatticeGeometry,
    picture: Picture,
) -> Result<CorrelationMatrix> {
    if state.n_sites() != geom.n_sites() {
        return Err(Error::Shape("state and geometry site counts differ".into()));
    }
    let zz = state.all_zz();
    Ok(reduce_zz_to_correlation(&zz, geom, picture))
}

/// Contract a raw per-site `⟨Sz_i Sz_j⟩` matrix (chain indices) down to the
/// staggered `Lx × Lx` correlation matrix.
pub fn reduce_zz_to_correlation(
    zz: &Array2<f64>,
    geom: &LatticeGeometry,
    picture: Picture,
) -> CorrelationMatrix {
    let lx = geom.lx();
    let n = geom.n_sites();
    let mut weights = vec![0.0; n];
    let mut col = vec![0usize; n];
    for (x, y) in geom.sites() {
        let c = geom.chain_index(x, y);
        weights[c] = match picture {
            Picture::Spin => stagger_sign(x, y),
            // (−1)^(x+y) Sz = n − 1/2: the sign is absorbed by the map.
            Picture::Occupation => 1.0,
        };
        col[c] = x;
    }
    let mut g = Array2::<f64>::zeros((lx, lx));
    for i in 0..n {
        for j in 0..n {
            g[[col[i], col[j]]] += weights[i] * weights[j] * zz[[i, j]];
        }
    }
    // Exact symmetrization against rounding.
    for x1 in 0..lx {
        for x2 in 0..x1 {
            let v = 0.5 * (g[[x1, x2]] + g[[x2, x1]]);
            g[[x1, x2]] = v;
            g[[x2, x1]] = v;
        }
    }
    CorrelationMatrix::exact(g)
}

/// Renormalized coupling with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingResult {
    pub gbar: f64,
    pub g0: f64,
    pub g1: f64,
    /// Bootstrap (or jackknife) error when the source is statistical.
    pub stat_error: Option<f64>,
    pub lx: usize,
}

/// Relative eigenvalue gap below which the spectrum is treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// `ḡ(L)` from the two largest eigenvalues of the correlation matrix.
pub fn renormalized_coupling(g: &CorrelationMatrix) -> Result<CouplingResult> {
    let lx = g.lx();
    if lx < 2 {
        return Err(Error::Config("coupling needs Lx ≥ 2".into()));
    }
    let evs = g.eigenvalues()?;
    let (g0, g1) = (evs[0], evs[1]);
    // A rank-one matrix has G1 at rounding level; treat it as degenerate.
    if g1 <= 0.0 || g1 <= 1e-12 * g0.abs() {
        return Err(Error::DegenerateSpectrum(format!(
            "second eigenvalue must be positive, got G0 = {g0:.6e}, G1 = {g1:.6e}"
        )));
    }
    if (g0 - g1) < DEGENERACY_GAP * g0.abs() {
        return Err(Error::DegenerateSpectrum(format!(
            "leading eigenvalues degenerate: G0 = {g0:.6e}, G1 = {g1:.6e}"
        )));
    }
    let l = lx as f64;
    let ratio = g0 / g1 - 1.0;
    if ratio < 0.0 {
        return Err(Error::DegenerateSpectrum("negative eigenvalue ratio".into()));
    }
    let gbar = 0.5 * (ratio / (l * (std::f64::consts::PI / (2.0 * l)).sin())).sqrt();
    Ok(CouplingResult { gbar, g0, g1, stat_error: None, lx })
}

/// Identifying tags for "same bare parameters" checks across a lattice pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarePoint {
    /// Model tag, e.g. "nn" or "d6".
    pub model: String,
    pub ly: usize,
    /// Anisotropy knob: `Jx/Jy` for the NN model, `(ay/ax)^6` for `1/r⁶`.
    pub anisotropy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepScalingPoint {
    /// `z = ḡ(L)`
    pub z: f64,
    pub z_err: Option<f64>,
    /// `F_s(z) = s ḡ(sL)/ḡ(L)`
    pub f: f64,
    pub f_err: Option<f64>,
    pub s_num: u32,
    pub s_den: u32,
    pub lx: usize,
    pub ly: usize,
    pub anisotropy: f64,
    pub model: String,
}

impl StepScalingPoint {
    pub fn s(&self) -> f64 {
        self.s_num as f64 / self.s_den as f64
    }
}

/// Combine couplings at `L` and `sL` (same bare parameters) into a
/// step-scaling point; errors are propagated in quadrature.
pub fn step_scaling(
    small: &CouplingResult,
    large: &CouplingResult,
    s: (u32, u32),
    bare_small: &BarePoint,
    bare_large: &BarePoint,
) -> Result<StepScalingPoint> {
    let (num, den) = s;
    if num == 0 || den == 0 {
        return Err(Error::Config("step factor must be positive".into()));
    }
    if bare_small != bare_large {
        return Err(Error::Config(format!(
            "bare parameters differ between the lattice pair: {bare_small:?} vs {bare_large:?}"
        )));
    }
    if small.lx * num as usize != large.lx * den as usize {
        return Err(Error::Config(format!(
            "lattice pair {} -> {} does not realize s = {num}/{den}",
            small.lx, large.lx
        )));
    }
    let s_val = num as f64 / den as f64;
    let f = s_val * large.gbar / small.gbar;
    let f_err = match (small.stat_error, large.stat_error) {
        (None, None) => None,
        (es, el) => {
            let rs = es.unwrap_or(0.0) / small.gbar;
            let rl = el.unwrap_or(0.0) / large.gbar;
            Some(f.abs() * (rs * rs + rl * rl).sqrt())
        }
    };
    Ok(StepScalingPoint {
        z: small.gbar,
        z_err: small.stat_error,
        f,
        f_err,
        s_num: num,
        s_den: den,
        lx: small.lx,
        ly: bare_small.ly,
        anisotropy: bare_small.anisotropy,
        model: bare_small.model.clone(),
    })
}

/// Per-shot staggered row sums `A_x = Σ_y (n_{x,y} − 1/2)`; equal in
/// distribution to `Σ_y (−1)^(x+y) Sz` under the staggered identification.
fn shot_row_sums(shot: &[u8], geom: &LatticeGeometry, picture: Picture) -> Vec<f64> {
    let mut a = vec![0.0; geom.lx()];
    for (x, y) in geom.sites() {
        let c = geom.chain_index(x, y);
        let sz = shot[c] as f64 - 0.5;
        let w = match picture {
            Picture::Occupation => 1.0,
            Picture::Spin => stagger_sign(x, y),
        };
        a[x] += w * sz;
    }
    a
}

/// Unbiased estimator of the correlation matrix from measurement shots taken
/// in the occupation basis.
pub fn shot_estimator(
    shots: &[Vec<u8>],
    geom: &LatticeGeometry,
    seed: u64,
) -> Result<CorrelationMatrix> {
    shot_estimator_in(shots, geom, Picture::Occupation, seed)
}

pub fn shot_estimator_in(
    shots: &[Vec<u8>],
    geom: &LatticeGeometry,
    picture: Picture,
    seed: u64,
) -> Result<CorrelationMatrix> {
    if shots.len() < 2 {
        return Err(Error::TooFewSamples { got: shots.len(), need: 2 });
    }
    let lx = geom.lx();
    let mut g = Array2::<f64>::zeros((lx, lx));
    for shot in shots {
        if shot.len() != geom.n_sites() {
            return Err(Error::Shape("shot length does not match geometry".into()));
        }
        let a = shot_row_sums(shot, geom, picture);
        for x1 in 0..lx {
            for x2 in 0..lx {
                g[[x1, x2]] += a[x1] * a[x2];
            }
        }
    }
    g.mapv_inplace(|v| v / shots.len() as f64);
    Ok(CorrelationMatrix::from_shots_matrix(g, shots.len(), seed))
}

#[derive(Debug, Clone)]
pub struct BootstrapDiagnostics {
    pub n_resamples: usize,
    pub n_degenerate: usize,
}

/// Coupling with a nonparametric bootstrap error: whole shots are resampled
/// with replacement (preserving cross-site correlations), `ḡ` recomputed per
/// resample, and the standard deviation over resamples reported.
/// Deterministic given `seed`.
pub fn bootstrap_coupling(
    shots: &[Vec<u8>],
    geom: &LatticeGeometry,
    n_resamples: usize,
    seed: u64,
) -> Result<(CouplingResult, BootstrapDiagnostics)> {
    if n_resamples < 100 {
        return Err(Error::Config(format!("need at least 100 resamples, got {n_resamples}")));
    }
    let central = renormalized_coupling(&shot_estimator(shots, geom, seed)?)?;
    let n = shots.len();
    let lx = geom.lx();
    // Row sums only depend on the shot, not the resample.
    let rows: Vec<Vec<f64>> =
        shots.iter().map(|s| shot_row_sums(s, geom, Picture::Occupation)).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_resamples);
    let mut n_degenerate = 0usize;
    for _ in 0..n_resamples {
        let mut g = Array2::<f64>::zeros((lx, lx));
        for _ in 0..n {
            let a = &rows[rng.random_range(0..n)];
            for x1 in 0..lx {
                for x2 in 0..lx {
                    g[[x1, x2]] += a[x1] * a[x2];
                }
            }
        }
        g.mapv_inplace(|v| v / n as f64);
        match renormalized_coupling(&CorrelationMatrix::exact(g)) {
            Ok(c) => values.push(c.gbar),
            Err(Error::DegenerateSpectrum(_)) => n_degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if values.len() < 2 {
        return Err(Error::DegenerateSpectrum(
            "all bootstrap resamples had degenerate correlation spectra".into(),
        ));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    Ok((
        CouplingResult { stat_error: Some(var.sqrt()), ..central },
        BootstrapDiagnostics { n_resamples, n_degenerate },
    ))
}

/// Two-loop running of `u = ḡ²` between `L` and `sL`:
/// `du/d ln L = b0 u² + b1 u³` with `b0 = 1/(2π)`, `b1 = 1/(4π²)`.
pub const B0: f64 = 1.0 / (2.0 * std::f64::consts::PI);
pub const B1: f64 = 1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::PI);

/// `z` beyond this is outside the trustworthy perturbative window and the
/// result carries a warning flag.
pub const PERTURBATIVE_WINDOW: f64 = 0.7;

#[derive(Debug, Clone, Copy)]
pub struct PerturbativeResult {
    pub f: f64,
    /// Set when `z` is outside the validity window.
    pub out_of_window: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loops {
    One,
    Two,
}

/// Reference step-scaling curve `F_s(z)` from the running coupling. This is a
/// literature-derived reference, not a measurement of this package.
pub fn perturbative_step_scaling(z: f64, s: f64, loops: Loops) -> Result<PerturbativeResult> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Config(format!("z must be nonnegative, got {z}")));
    }
    if !(s > 0.0) {
        return Err(Error::Config(format!("step factor must be positive, got {s}")));
    }
    if z == 0.0 || s == 1.0 {
        return Ok(PerturbativeResult { f: s, out_of_window: z > PERTURBATIVE_WINDOW });
    }
    let u0 = z * z;
    let beta = |u: f64| match loops {
        Loops::One => B0 * u * u,
        Loops::Two => B0 * u * u + B1 * u * u * u,
    };
    // RK4 on d u / d t with t = ln(scale), from 0 to ln s.
    let t_end = s.ln();
    let n_steps = 256;
    let h = t_end / n_steps as f64;
    let mut u = u0;
    for _ in 0..n_steps {
        let k1 = beta(u);
        let k2 = beta(u + 0.5 * h * k1);
        let k3 = beta(u + 0.5 * h * k2);
        let k4 = beta(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    let f = s * (u / u0).sqrt();
    Ok(PerturbativeResult { f, out_of_window: z > PERTURBATIVE_WINDOW })
}

/// Tabulated reference curve loadable from CSV (`z,F` per line, `#` comments),
/// interpolated by a monotone piecewise-cubic (PCHIP).
#[derive(Debug, Clone)]
pub struct ReferenceCurve {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl ReferenceCurve {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        points.dedup_by(|a, b| a.0 == b.0);
        if points.len() < 2 {
            return Err(Error::Config("reference curve needs at least two points".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        let slopes = pchip_slopes(&xs, &ys);
        Ok(Self { xs, ys, slopes })
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.map(str::trim)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad curve row at line {}", lineno + 1)))
            };
            let z = parse(it.next())?;
            let f = parse(it.next())?;
            points.push((z, f));
        }
        Self::new(points)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Interpolated value; clamps outside the tabulated domain.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let k = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (m0, m1) = (self.slopes[k], self.slopes[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + m0 * h * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + m1 * h * (t3 - t2)
    }
}

/// Fritsch–Carlson monotone slopes.
fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut d = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        d.push((ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]));
    }
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * (xs[k + 1] - xs[k]) + (xs[k] - xs[k - 1]);
            let w2 = (xs[k + 1] - xs[k]) + 2.0 * (xs[k] - xs[k - 1]);
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    for k in 0..n - 1 {
        if d[k] == 0.0 {
            m[k] = 0.0;
            m[k + 1] = 0.0;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn coupling_formula_value() {
        let g = CorrelationMatrix::exact(array![[4.0, 0.0], [0.0, 1.0]]);
        let c = renormalized_coupling(&g).unwrap();
        // ½ √(3 / (2 sin(π/4))) = 0.7282375...
        assert!((c.gbar - 0.72824).abs() < 1e-5, "gbar = {}", c.gbar);
        assert_eq!((c.g0, c.g1), (4.0, 1.0));
    }

    #[test]
    fn neel_matrix_is_degenerate() {
        // Rank-1 all-ones matrix: G1 = 0 → explicit degenerate-spectrum error.
        let g = CorrelationMatrix::exact(Array2::from_elem((4, 4), 2.25));
        assert!(matches!(
            renormalized_coupling(&g),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn coupling_scale_invariant() {
        let base = array![[5.0, 1.0, 0.2], [1.0, 3.0, 0.4], [0.2, 0.4, 2.0]];
        let a = renormalized_coupling(&CorrelationMatrix::exact(base.clone())).unwrap();
        let b = renormalized_coupling(&CorrelationMatrix::exact(base * 37.5)).unwrap();
        assert!((a.gbar - b.gbar).abs() < 1e-12);
    }

    #[test]
    fn step_scaling_identities() {
        let mk = |lx: usize, gbar: f64| CouplingResult {
            gbar,
            g0: 2.0,
            g1: 1.0,
            stat_error: None,
            lx,
        };
        let bare = BarePoint { model: "nn".into(), ly: 6, anisotropy: 1.0 };
        // ḡ(sL) = ḡ(L) → F = s
        let p = step_scaling(&mk(6, 0.5), &mk(8, 0.5), (4, 3), &bare, &bare).unwrap();
        assert!((p.f - 4.0 / 3.0).abs() < 1e-12);
        // massive scaling ḡ ∝ 1/L → F = 1
        let p = step_scaling(&mk(6, 0.5), &mk(8, 0.5 * 6.0 / 8.0), (4, 3), &bare, &bare).unwrap();
        assert!((p.f - 1.0).abs() < 1e-12);
        // mismatched bare parameters rejected
        let other = BarePoint { model: "nn".into(), ly: 6, anisotropy: 0.9 };
        assert!(step_scaling(&mk(6, 0.5), &mk(8, 0.5), (4, 3), &bare, &other).is_err());
        // wrong lattice pair rejected
        assert!(step_scaling(&mk(6, 0.5), &mk(9, 0.5), (4, 3), &bare, &bare).is_err());
    }

    #[test]
    fn lorentzian_toy_deep_ir() {
        // G(k) ∝ 1/(k² + m²) sampled on the discrete Brillouin modes of an
        // open chain; with mL ≫ 1 the step scaling tends to 1.
        let gbar_of = |l: usize, m: f64| {
            let k = |n: usize| std::f64::consts::PI * n as f64 / l as f64;
            let g0 = 1.0 / (k(1).powi(2) + m * m);
            let g1 = 1.0 / (k(2).powi(2) + m * m);
            let lf = l as f64;
            0.5 * ((g0 / g1 - 1.0) / (lf * (std::f64::consts::PI / (2.0 * lf)).sin())).sqrt()
        };
        let m = 40.0;
        let (l, s_num, s_den) = (12usize, 4usize, 3usize);
        let sl = l * s_num / s_den;
        let f = (s_num as f64 / s_den as f64) * gbar_of(sl, m) / gbar_of(l, m);
        assert!((f - 1.0).abs() < 0.05, "F = {f}");
    }

    #[test]
    fn shot_estimator_rank_one_for_repeated_bitstring() {
        let geom = LatticeGeometry::unit(3, 2).unwrap();
        let shot = vec![1u8, 0, 1, 1, 0, 0];
        let shots = vec![shot.clone(); 50];
        let g = shot_estimator(&shots, &geom, 7).unwrap();
        let evs = g.eigenvalues().unwrap();
        assert!(evs[1].abs() < 1e-12, "rank-1 expected, got {evs:?}");
        assert!(matches!(g.source(), CorrelationSource::Shots { n_shots: 50, .. }));
    }

    #[test]
    fn shot_estimator_needs_two_shots() {
        let geom = LatticeGeometry::unit(2, 1).unwrap();
        assert!(matches!(
            shot_estimator(&[vec![0, 1]], &geom, 0),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn bootstrap_identical_shots_degenerate() {
        // A single repeated bitstring gives a rank-1 estimator in every
        // resample: the explicit degenerate-spectrum error, not a coupling.
        let geom = LatticeGeometry::unit(2, 2).unwrap();
        let shots = vec![vec![1u8, 1, 1, 1]; 200];
        assert!(matches!(
            bootstrap_coupling(&shots, &geom, 200, 11),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn bootstrap_small_spread() {
        // Nearly deterministic shot set: bootstrap error is small compared to
        // the central value, and degenerate resamples stay rare.
        let geom = LatticeGeometry::unit(2, 2).unwrap();
        let mut shots = Vec::new();
        for k in 0..400 {
            shots.push(match k % 5 {
                0 => vec![1u8, 1, 0, 0], // A = (+1, -1)
                1 | 2 => vec![1, 1, 1, 1], // A = (+1, +1)
                _ => vec![0, 0, 0, 0],     // A = (-1, -1)
            });
        }
        let (c, diag) = bootstrap_coupling(&shots, &geom, 300, 11).unwrap();
        let err = c.stat_error.unwrap();
        assert!(err > 0.0 && err < 0.5 * c.gbar, "gbar = {}, err = {err}", c.gbar);
        assert_eq!(diag.n_resamples, 300);
        assert!(diag.n_degenerate < 30);
    }

    #[test]
    fn perturbative_limits() {
        // s = 1 → F = 1
        let r = perturbative_step_scaling(0.4, 1.0, Loops::Two).unwrap();
        assert_eq!(r.f, 1.0);
        // z → 0 → frozen coupling → F = s
        let r = perturbative_step_scaling(0.0, 4.0 / 3.0, Loops::Two).unwrap();
        assert!((r.f - 4.0 / 3.0).abs() < 1e-12);
        // asymptotic freedom: F grows past s as z grows
        let f1 = perturbative_step_scaling(0.3, 4.0 / 3.0, Loops::Two).unwrap().f;
        let f2 = perturbative_step_scaling(0.6, 4.0 / 3.0, Loops::Two).unwrap().f;
        assert!(f2 > f1 && f1 > 4.0 / 3.0);
        // warning flag outside the window
        assert!(perturbative_step_scaling(0.9, 4.0 / 3.0, Loops::Two).unwrap().out_of_window);
    }

    #[test]
    fn one_loop_close_to_two_loop_in_window() {
        for z in [0.1, 0.2, 0.3, 0.4, 0.5, 0.55] {
            let f1 = perturbative_step_scaling(z, 4.0 / 3.0, Loops::One).unwrap().f;
            let f2 = perturbative_step_scaling(z, 4.0 / 3.0, Loops::Two).unwrap().f;
            assert!(((f1 - f2) / f2).abs() < 0.02, "z = {z}: {f1} vs {f2}");
        }
    }

    #[test]
    fn reference_curve_interpolates_monotonically() {
        let curve = ReferenceCurve::from_csv("# z,F\n0.1,1.34\n0.3,1.36\n0.5,1.40\n0.7,1.50\n")
            .unwrap();
        assert!((curve.eval(0.3) - 1.36).abs() < 1e-12);
        let mut last = 0.0;
        for i in 0..100 {
            let v = curve.eval(0.1 + 0.006 * i as f64);
            assert!(v >= last - 1e-12);
            last = v;
        }
    }
}
