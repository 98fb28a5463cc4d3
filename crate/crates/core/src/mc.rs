//! Classical Monte Carlo for the unit-vector lattice field on an `L_t × L_x`
//! Euclidean lattice: Wolff embedded-cluster updates (with a Metropolis
//! cross-check), equal-time-slice correlators, and jackknife-errored
//! renormalized couplings feeding the infrared reference curve.
//!
//! Action: `S = −β Σ_⟨ij⟩ φ_i · φ_j` with `β = 1/g_bare`, open boundaries in
//! `x`, periodic (configurable) in `t`. The classical coupling analog uses
//! the same eigenvalue-ratio formula as the quantum pipeline, built from
//! `C(x1, x2) = ⟨φ(x1, t0) · φ(x2, t0)⟩` averaged over slices.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::observables::{
    renormalized_coupling, step_scaling, BarePoint, CorrelationMatrix, CouplingResult,
    StepScalingPoint,
};

/// Unit 3-vector field on an `L_t × L_x` lattice.
#[derive(Debug, Clone)]
pub struct SpinField {
    lt: usize,
    lx: usize,
    beta: f64,
    t_periodic: bool,
    spins: Vec<[f64; 3]>,
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    // Marsaglia's method.
    loop {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        let s = a * a + b * b;
        if s < 1.0 {
            let f = 2.0 * (1.0 - s).sqrt();
            return [a * f, b * f, 1.0 - 2.0 * s];
        }
    }
}

impl SpinField {
    /// Cold start: all spins aligned along z.
    pub fn aligned(lt: usize, lx: usize, beta: f64) -> Self {
        assert!(lt >= 2 && lx >= 2 && beta >= 0.0);
        Self { lt, lx, beta, t_periodic: true, spins: vec![[0.0, 0.0, 1.0]; lt * lx] }
    }

    pub fn random(lt: usize, lx: usize, beta: f64, rng: &mut impl Rng) -> Self {
        let mut f = Self::aligned(lt, lx, beta);
        for s in &mut f.spins {
            *s = random_unit(rng);
        }
        f
    }

    pub fn with_open_time_boundary(mut self) -> Self {
        self.t_periodic = false;
        self
    }

    pub fn lt(&self) -> usize {
        self.lt
    }

    pub fn lx(&self) -> usize {
        self.lx
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_sites(&self) -> usize {
        self.lt * self.lx
    }

    fn idx(&self, t: usize, x: usize) -> usize {
        t * self.lx + x
    }

    pub fn spin(&self, t: usize, x: usize) -> [f64; 3] {
        self.spins[self.idx(t, x)]
    }

    /// Neighbor indices of a site (open in x, periodic/open in t).
    fn neighbors(&self, site: usize, out: &mut Vec<usize>) {
        out.clear();
        let (t, x) = (site / self.lx, site % self.lx);
        if x + 1 < self.lx {
            out.push(self.idx(t, x + 1));
        }
        if x > 0 {
            out.push(self.idx(t, x - 1));
        }
        if self.t_periodic {
            out.push(self.idx((t + 1) % self.lt, x));
            out.push(self.idx((t + self.lt - 1) % self.lt, x));
        } else {
            if t + 1 < self.lt {
                out.push(self.idx(t + 1, x));
            }
            if t > 0 {
                out.push(self.idx(t - 1, x));
            }
        }
    }

    /// `−Σ_⟨ij⟩ φ_i · φ_j` (so the Boltzmann weight is `exp(−β·energy)`).
    pub fn energy(&self) -> f64 {
        let mut e = 0.0;
        for t in 0..self.lt {
            for x in 0..self.lx {
                let s = self.spin(t, x);
                if x + 1 < self.lx {
                    e -= dot3(s, self.spin(t, x + 1));
                }
                if self.t_periodic {
                    e -= dot3(s, self.spin((t + 1) % self.lt, x));
                } else if t + 1 < self.lt {
                    e -= dot3(s, self.spin(t + 1, x));
                }
            }
        }
        e
    }

    /// Re-unitize spins against floating-point drift.
    pub fn renormalize(&mut self) {
        for s in &mut self.spins {
            let n = dot3(*s, *s).sqrt();
            s[0] /= n;
            s[1] /= n;
            s[2] /= n;
        }
    }

    /// Apply a global O(3) rotation (symmetry check helper).
    pub fn rotate_global(&mut self, axis: [f64; 3], angle: f64) {
        let (sin, cos) = angle.sin_cos();
        for s in &mut self.spins {
            let par = dot3(*s, axis);
            let cross = [
                axis[1] * s[2] - axis[2] * s[1],
                axis[2] * s[0] - axis[0] * s[2],
                axis[0] * s[1] - axis[1] * s[0],
            ];
            for k in 0..3 {
                s[k] = s[k] * cos + cross[k] * sin + axis[k] * par * (1.0 - cos);
            }
        }
    }

    /// Equal-time-slice correlator `C(x1, x2)` averaged over slices.
    pub fn slice_correlator(&self) -> Array2<f64> {
        let slices: Vec<usize> = if self.t_periodic {
            (0..self.lt).collect()
        } else {
            // Central half only when the time boundary is open.
            (self.lt / 4..self.lt - self.lt / 4).collect()
        };
        let mut c = Array2::<f64>::zeros((self.lx, self.lx));
        for &t in &slices {
            for x1 in 0..self.lx {
                let s1 = self.spin(t, x1);
                for x2 in x1..self.lx {
                    let v = dot3(s1, self.spin(t, x2));
                    c[[x1, x2]] += v;
                }
            }
        }
        let norm = slices.len() as f64;
        for x1 in 0..self.lx {
            for x2 in x1..self.lx {
                c[[x1, x2]] /= norm;
                c[[x2, x1]] = c[[x1, x2]];
            }
        }
        c
    }
}

/// One Wolff embedded-cluster update; returns the cluster size. Rejection
/// free: the grown cluster is always flipped.
pub fn wolff_update(field: &mut SpinField, rng: &mut impl Rng) -> usize {
    let axis = random_unit(rng);
    let seed = rng.random_range(0..field.n_sites());
    wolff_update_along(field, axis, seed, rng)
}

pub(crate) fn wolff_update_along(
    field: &mut SpinField,
    axis: [f64; 3],
    seed: usize,
    rng: &mut impl Rng,
) -> usize {
    let beta = field.beta;
    let mut in_cluster = vec![false; field.n_sites()];
    let mut stack = vec![seed];
    let mut cluster = Vec::new();
    in_cluster[seed] = true;
    let mut nbrs = Vec::with_capacity(4);
    while let Some(site) = stack.pop() {
        cluster.push(site);
        let pi = dot3(field.spins[site], axis);
        field.neighbors(site, &mut nbrs);
        for &nb in &nbrs {
            if in_cluster[nb] {
                continue;
            }
            let pj = dot3(field.spins[nb], axis);
            let prod = pi * pj;
            if prod <= 0.0 {
                continue;
            }
            let p_add = 1.0 - (-2.0 * beta * prod).exp();
            if rng.random::<f64>() < p_add {
                in_cluster[nb] = true;
                stack.push(nb);
            }
        }
    }
    // Reflect the cluster through the plane orthogonal to the axis.
    for &site in &cluster {
        let s = field.spins[site];
        let par = dot3(s, axis);
        for k in 0..3 {
            field.spins[site][k] = s[k] - 2.0 * par * axis[k];
        }
    }
    cluster.len()
}

/// One full Metropolis sweep (independent baseline for validating Wolff);
/// returns the acceptance fraction.
pub fn metropolis_sweep(field: &mut SpinField, rng: &mut impl Rng, step: f64) -> f64 {
    let mut accepted = 0usize;
    let n = field.n_sites();
    let mut nbrs = Vec::with_capacity(4);
    for site in 0..n {
        let old = field.spins[site];
        let kick = random_unit(rng);
        let mut new = [0.0; 3];
        for k in 0..3 {
            new[k] = old[k] + step * kick[k];
        }
        let norm = dot3(new, new).sqrt();
        for v in &mut new {
            *v /= norm;
        }
        field.neighbors(site, &mut nbrs);
        let mut delta_e = 0.0;
        for &nb in &nbrs {
            let s = field.spins[nb];
            delta_e -= dot3(new, s) - dot3(old, s);
        }
        if delta_e <= 0.0 || rng.random::<f64>() < (-field.beta * delta_e).exp() {
            field.spins[site] = new;
            accepted += 1;
        }
    }
    accepted as f64 / n as f64
}

#[derive(Debug, Clone)]
pub struct McConfig {
    /// `β = 1/g_bare`.
    pub beta: f64,
    /// `L_t = lt_over_lx · L_x`.
    pub lt_over_lx: usize,
    /// Thermalization sweeps (one sweep flips ≳ one lattice volume).
    pub n_therm: usize,
    pub n_measurements: usize,
    pub sweeps_per_measurement: usize,
    pub n_blocks: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            lt_over_lx: 8,
            n_therm: 200,
            n_measurements: 2000,
            sweeps_per_measurement: 2,
            n_blocks: 20,
            seed: 1,
        }
    }
}

/// A fixed number of cluster updates; returns total sites flipped.
///
/// Measurement cadence must be state-independent: sampling "until a volume
/// has flipped" under-counts disordered configurations (they need more
/// clusters per volume) and biases averages. Calibrate a fixed update count
/// from thermalization statistics instead.
pub fn wolff_updates(field: &mut SpinField, rng: &mut impl Rng, n_updates: usize) -> usize {
    (0..n_updates).map(|_| wolff_update(field, rng)).sum()
}

/// Updates needed to flip about one lattice volume, from a mean cluster size.
pub fn updates_per_volume(volume: usize, mean_cluster: f64) -> usize {
    ((volume as f64 / mean_cluster.max(1.0)).ceil() as usize).max(1)
}

#[derive(Debug, Clone)]
pub struct McChain {
    pub correlators: Vec<Array2<f64>>,
    pub energies: Vec<f64>,
    pub mean_cluster: f64,
    /// Integrated autocorrelation time of the energy series, in measurement
    /// units.
    pub tau_int: f64,
}

/// Run one Wolff chain at `L_x` and collect slice correlators.
pub fn run_chain(lx: usize, config: &McConfig) -> Result<McChain> {
    if lx < 2 {
        return Err(Error::Config("need Lx ≥ 2".into()));
    }
    let lt = config.lt_over_lx * lx;
    let volume = lt * lx;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut field = SpinField::aligned(lt, lx, config.beta);
    // Thermalize with an adaptive volume's worth of clusters per sweep, then
    // freeze the cadence for the measurement phase.
    let mut therm_flipped = 0usize;
    let mut therm_clusters = 0usize;
    for _ in 0..config.n_therm {
        let mut flipped = 0;
        while flipped < volume {
            flipped += wolff_update(&mut field, &mut rng);
            therm_clusters += 1;
        }
        therm_flipped += flipped;
    }
    let mean_cluster = therm_flipped as f64 / therm_clusters.max(1) as f64;
    let per_sweep = updates_per_volume(volume, mean_cluster);

    let mut correlators = Vec::with_capacity(config.n_measurements);
    let mut energies = Vec::with_capacity(config.n_measurements);
    for k in 0..config.n_measurements {
        wolff_updates(&mut field, &mut rng, per_sweep * config.sweeps_per_measurement);
        if k % 64 == 0 {
            field.renormalize();
        }
        correlators.push(field.slice_correlator());
        energies.push(field.energy());
    }
    let tau_int = integrated_autocorrelation(&energies);
    Ok(McChain { correlators, energies, mean_cluster, tau_int })
}

/// Integrated autocorrelation time with an automatic window (cut when the
/// window exceeds 6τ).
pub fn integrated_autocorrelation(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 8 {
        return 0.5;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var: f64 = series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for w in 1..n / 2 {
        let mut c = 0.0;
        for i in 0..n - w {
            c += (series[i] - mean) * (series[i + w] - mean);
        }
        c /= (n - w) as f64 * var;
        if c < 0.0 {
            break;
        }
        tau += c;
        if w as f64 > 6.0 * tau {
            break;
        }
    }
    tau
}

/// Coupling from a measured ensemble: central value from the full-sample mean
/// correlator, error from jackknife over blocks. Errors if the estimated
/// autocorrelation exceeds the block length.
pub fn mc_coupling(chain: &McChain, n_blocks: usize) -> Result<CouplingResult> {
    let n = chain.correlators.len();
    if n_blocks < 4 || n < 2 * n_blocks {
        return Err(Error::Config(format!(
            "need at least {} measurements for {n_blocks} blocks, got {n}",
            2 * n_blocks
        )));
    }
    let block_len = n / n_blocks;
    if chain.tau_int > block_len as f64 {
        return Err(Error::NotConverged(format!(
            "autocorrelation time {:.1} exceeds the jackknife block length {block_len}; \
             run longer or thin more aggressively",
            chain.tau_int
        )));
    }
    let lx = chain.correlators[0].nrows();
    let used = block_len * n_blocks;
    let mut mean = Array2::<f64>::zeros((lx, lx));
    for c in &chain.correlators[..used] {
        mean += c;
    }
    mean.mapv_inplace(|v| v / used as f64);
    let central = renormalized_coupling(&CorrelationMatrix::exact(mean.clone()))?;

    let mut jack = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let mut m = mean.clone() * (used as f64);
        for c in &chain.correlators[b * block_len..(b + 1) * block_len] {
            m -= c;
        }
        m.mapv_inplace(|v| v / (used - block_len) as f64);
        jack.push(renormalized_coupling(&CorrelationMatrix::exact(m))?.gbar);
    }
    let jmean = jack.iter().sum::<f64>() / n_blocks as f64;
    let var = jack.iter().map(|v| (v - jmean) * (v - jmean)).sum::<f64>() * (n_blocks - 1) as f64
        / n_blocks as f64;
    Ok(CouplingResult { stat_error: Some(var.sqrt()), ..central })
}

/// Paired simulations at `L_x` and `s·L_x` with the same bare coupling.
pub fn mc_step_scaling(
    g_bare: f64,
    lx: usize,
    s: (u32, u32),
    config: &McConfig,
) -> Result<StepScalingPoint> {
    if !(g_bare > 0.0) {
        return Err(Error::Config("bare coupling must be positive".into()));
    }
    let (num, den) = s;
    if (lx * num as usize) % den as usize != 0 {
        return Err(Error::Config(format!("s·Lx = {lx}·{num}/{den} is not an integer")));
    }
    let slx = lx * num as usize / den as usize;
    let mut cfg = config.clone();
    cfg.beta = 1.0 / g_bare;
    let small_chain = run_chain(lx, &cfg)?;
    let small = mc_coupling(&small_chain, cfg.n_blocks)?;
    cfg.seed = config.seed.wrapping_add(1);
    let large_chain = run_chain(slx, &cfg)?;
    let large = mc_coupling(&large_chain, cfg.n_blocks)?;
    let bare = BarePoint { model: "mc".into(), ly: cfg.lt_over_lx, anisotropy: g_bare };
    step_scaling(&small, &large, s, &bare, &bare)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn high_temperature_clusters_are_single_sites() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut field = SpinField::random(8, 8, 1e-4, &mut rng);
        let n = 4000;
        let mut total = 0usize;
        for _ in 0..n {
            total += wolff_update(&mut field, &mut rng);
        }
        let mean = total as f64 / n as f64;
        // At β → 0 the add probability vanishes; allow a generous 3σ.
        assert!(mean < 1.02, "mean cluster size {mean}");
    }

    #[test]
    fn aligned_field_percolates_along_alignment_axis() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut field = SpinField::aligned(8, 8, 5.0);
        let size = wolff_update_along(&mut field, [0.0, 0.0, 1.0], 0, &mut rng);
        assert_eq!(size, 64, "cluster spans the lattice at large β");
    }

    #[test]
    fn wolff_matches_metropolis_energy() {
        // Coarse 6x6 check at one β; the full three-β comparison on 8x8 runs
        // in the acceptance suite. Cadence is fixed (state-independent).
        let beta = 0.8;
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut wolff_field = SpinField::aligned(6, 6, beta);
        wolff_updates(&mut wolff_field, &mut rng, 3000);
        let mut wolff_e = Vec::new();
        for _ in 0..4000 {
            wolff_updates(&mut wolff_field, &mut rng, 10);
            wolff_e.push(wolff_field.energy());
        }
        let mut met_field = SpinField::aligned(6, 6, beta);
        for _ in 0..400 {
            metropolis_sweep(&mut met_field, &mut rng, 0.8);
        }
        let mut met_e = Vec::new();
        for _ in 0..6000 {
            metropolis_sweep(&mut met_field, &mut rng, 0.8);
            met_e.push(met_field.energy());
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let tau = integrated_autocorrelation(v);
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
            (m, (var * 2.0 * tau / v.len() as f64).sqrt())
        };
        let (mw, ew) = stats(&wolff_e);
        let (mm, em) = stats(&met_e);
        let sigma = (ew * ew + em * em).sqrt();
        assert!(
            (mw - mm).abs() < 3.0 * sigma,
            "Wolff {mw:.3} ± {ew:.3} vs Metropolis {mm:.3} ± {em:.3}"
        );
    }

    #[test]
    fn global_rotation_invariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut field = SpinField::random(8, 6, 1.1, &mut rng);
        wolff_updates(&mut field, &mut rng, 500);
        let e0 = field.energy();
        let c0 = field.slice_correlator();
        field.rotate_global([1.0 / 3f64.sqrt(); 3], 1.234);
        let e1 = field.energy();
        let c1 = field.slice_correlator();
        assert!((e0 - e1).abs() < 1e-9);
        for (a, b) in c0.iter().zip(c1.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn free_spin_limit_small_coupling() {
        let config = McConfig {
            beta: 0.05,
            lt_over_lx: 8,
            n_therm: 50,
            n_measurements: 800,
            sweeps_per_measurement: 1,
            n_blocks: 10,
            seed: 13,
        };
        let chain = run_chain(6, &config).unwrap();
        let c = mc_coupling(&chain, config.n_blocks).unwrap();
        // G ∝ identity + noise: tiny coupling.
        assert!(c.gbar < 0.25, "free-spin gbar = {}", c.gbar);
    }

    #[test]
    fn aligned_ensemble_is_degenerate() {
        // Frozen ordered configurations: rank-1 correlator → explicit error.
        let field = SpinField::aligned(16, 4, 10.0);
        let chain = McChain {
            correlators: vec![field.slice_correlator(); 64],
            energies: vec![field.energy(); 64],
            mean_cluster: 64.0,
            tau_int: 0.5,
        };
        assert!(matches!(
            mc_coupling(&chain, 8),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn thermalization_guard_triggers() {
        let chain = McChain {
            correlators: vec![Array2::eye(4); 100],
            energies: (0..100).map(|i| i as f64).collect(), // maximally correlated
            mean_cluster: 1.0,
            tau_int: integrated_autocorrelation(
                &(0..100).map(|i| i as f64).collect::<Vec<_>>(),
            ),
        };
        assert!(matches!(mc_coupling(&chain, 10), Err(Error::NotConverged(_))));
    }
}
