//! Variational ground-state and first-excited-state search: two-site DMRG
//! with density-matrix noise on early sweeps, plus the energy gap.
//!
//! The excited state is found by minimizing `H + w |0⟩⟨0|` with `w = 10|E0|`;
//! it comes out orthogonal to the ground state up to a checked tolerance.

use ndarray::{Array2, Array4};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::model::{LatticeGeometry, TermKind, TermList};
use crate::tensor::env::{two_site_block, Environments, OverlapEnvs};
use crate::tensor::krylov::lanczos_ground;
use crate::tensor::linalg::{eigh, svd_truncated};
use crate::tensor::mps::{split_left, split_right};
use crate::tensor::{expectation, MatrixProductOperator, MatrixProductState};

#[derive(Debug, Clone)]
pub struct DmrgConfig {
    /// Per-sweep bond cap; the last entry repeats for remaining sweeps.
    pub bond_schedule: Vec<usize>,
    pub max_sweeps: usize,
    /// Discarded-weight tolerance per truncated bond.
    pub trunc_tol: f64,
    /// Sweep-to-sweep energy change declaring convergence.
    pub energy_tol: f64,
    /// Density-matrix noise per sweep; the last entry repeats.
    pub noise_schedule: Vec<f64>,
    /// Compression tolerance used when building operators from terms.
    pub mpo_tol: f64,
    /// Residual tolerance of the local eigensolver.
    pub local_tol: f64,
    pub local_max_iter: usize,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            bond_schedule: vec![32, 64, 128, 256],
            max_sweeps: 24,
            trunc_tol: 1e-11,
            energy_tol: 1e-10,
            noise_schedule: vec![1e-5, 1e-6, 1e-7, 1e-8, 0.0],
            mpo_tol: 1e-12,
            local_tol: 1e-9,
            local_max_iter: 32,
        }
    }
}

impl DmrgConfig {
    pub fn with_max_bond(mut self, chi: usize) -> Self {
        let mut schedule: Vec<usize> = self.bond_schedule.iter().copied().filter(|&b| b < chi).collect();
        schedule.push(chi);
        self.bond_schedule = schedule;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.bond_schedule.is_empty() || self.noise_schedule.is_empty() {
            return Err(Error::Config("bond and noise schedules must be non-empty".into()));
        }
        if !(self.trunc_tol >= 0.0) || !(self.energy_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn bond_at(&self, sweep: usize) -> usize {
        *self.bond_schedule.get(sweep).unwrap_or(self.bond_schedule.last().unwrap())
    }

    fn noise_at(&self, sweep: usize) -> f64 {
        *self.noise_schedule.get(sweep).unwrap_or(self.noise_schedule.last().unwrap())
    }

    /// First sweep index at which the schedule has reached its final bond.
    fn settled_sweep(&self) -> usize {
        self.bond_schedule.len().saturating_sub(1).max(self.noise_position_of_zero())
    }

    fn noise_position_of_zero(&self) -> usize {
        self.noise_schedule
            .iter()
            .position(|&a| a == 0.0)
            .unwrap_or(self.noise_schedule.len())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRecord {
    pub sweep: usize,
    pub energy: f64,
    pub max_bond: usize,
    pub discarded: f64,
    pub noise: f64,
}

#[derive(Debug, Clone)]
pub struct DmrgRun {
    pub state: MatrixProductState<f64>,
    pub energy: f64,
    pub converged: bool,
    pub sweeps: Vec<SweepRecord>,
}

impl DmrgRun {
    /// Convergence log: `sweep,energy,max_bond,discarded_weight` per line.
    pub fn write_convergence_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "sweep,energy,max_bond,discarded_weight")?;
        for r in &self.sweeps {
            writeln!(w, "{},{},{},{}", r.sweep, crate::model::format_f64(r.energy), r.max_bond, crate::model::format_f64(r.discarded))?;
        }
        Ok(())
    }
}

/// Néel product state in the spin picture (up on even `(x+y)` sublattice).
pub fn neel_state(geom: &LatticeGeometry) -> MatrixProductState<f64> {
    let mut bits = vec![0u8; geom.n_sites()];
    for (x, y) in geom.sites() {
        bits[geom.chain_index(x, y)] = ((x + y) % 2 == 0) as u8;
    }
    MatrixProductState::product_state(&bits)
}

/// Deterministic random MPS for initial-state robustness checks.
pub fn seeded_random_state(n_sites: usize, bond: usize, seed: u64) -> MatrixProductState<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    MatrixProductState::random(n_sites, bond, &mut rng)
}

struct PenaltyTerm<'a> {
    weight: f64,
    reference: &'a MatrixProductState<f64>,
    envs: OverlapEnvs<f64>,
}

/// Ground-state search. The returned run is flagged `converged = false` when
/// the energy criterion was not met within the sweep budget.
pub fn dmrg_ground(
    mpo: &MatrixProductOperator<f64>,
    config: &DmrgConfig,
    init: &MatrixProductState<f64>,
) -> Result<DmrgRun> {
    dmrg_minimize(mpo, config, init, &mut [])
}

/// Lowest state orthogonal to `ground`, via the penalty `H + w|0⟩⟨0|`.
pub fn dmrg_excited(
    mpo: &MatrixProductOperator<f64>,
    config: &DmrgConfig,
    ground: &DmrgRun,
) -> Result<DmrgRun> {
    let weight = 10.0 * ground.energy.abs().max(1e-3);
    let init = seeded_random_state(ground.state.n_sites(), 8, 0x5eed_0001);
    let mut penalties = [PenaltyTerm {
        weight,
        reference: &ground.state,
        envs: OverlapEnvs::new(&init, &ground.state),
    }];
    let mut run = dmrg_minimize(mpo, config, &init, &mut penalties)?;
    let overlap = run.state.overlap(&ground.state)?.abs();
    if overlap > 1e-4 {
        return Err(Error::NotConverged(format!(
            "excited-state search kept overlap {overlap:.3e} with the ground state \
             (penalty weight {weight:.3e}); raise the penalty or the sweep budget"
        )));
    }
    // Report the physical energy, not the penalized one.
    run.energy = expectation(&run.state, mpo)?;
    Ok(run)
}

#[derive(Debug, Clone)]
pub struct GapResult {
    pub e0: f64,
    pub e1: f64,
    pub delta: f64,
    pub ground_converged: bool,
    pub excited_converged: bool,
    /// `|⟨0|1⟩|` at the end of the excited search.
    pub residual_overlap: f64,
    /// `2S+1` when the excited state sits in a detectable SU(2) multiplet
    /// (evaluated on oracle-scale Heisenberg lattices only).
    pub multiplet: Option<usize>,
}

/// Ground and first-excited energies of a term list, from a Néel start.
pub fn energy_gap(terms: &TermList, config: &DmrgConfig) -> Result<GapResult> {
    config.validate()?;
    let mpo = MatrixProductOperator::from_terms(terms, config.mpo_tol)?;
    let ground = dmrg_ground(&mpo, config, &neel_state(terms.geometry()))?;
    let excited = dmrg_excited(&mpo, config, &ground)?;
    let residual_overlap = excited.state.overlap(&ground.state)?.abs();
    let delta = excited.energy - ground.energy;
    let heisenberg_only = terms
        .terms()
        .iter()
        .all(|t| matches!(t.kind, TermKind::Heisenberg | TermKind::Const));
    let multiplet = if heisenberg_only && terms.n_sites() <= 24 {
        let s_tot2: f64 = excited.state.all_heisenberg().sum();
        // S(S+1) = s_tot2 → multiplicity 2S+1
        let s = 0.5 * ((1.0 + 4.0 * s_tot2.max(0.0)).sqrt() - 1.0);
        let mult = (2.0 * s + 1.0).round() as usize;
        (mult > 1).then_some(mult)
    } else {
        None
    };
    Ok(GapResult {
        e0: ground.energy,
        e1: excited.energy,
        delta,
        ground_converged: ground.converged,
        excited_converged: excited.converged,
        residual_overlap,
        multiplet,
    })
}

fn dmrg_minimize(
    mpo: &MatrixProductOperator<f64>,
    config: &DmrgConfig,
    init: &MatrixProductState<f64>,
    penalties: &mut [PenaltyTerm<'_>],
) -> Result<DmrgRun> {
    config.validate()?;
    let n = mpo.n_sites();
    if init.n_sites() != n {
        return Err(Error::Shape("initial state and operator site counts differ".into()));
    }
    if n < 2 {
        return Err(Error::Config("DMRG needs at least two sites".into()));
    }
    let mut state = init.clone();
    state.move_center_to(0);
    state.normalize();
    let mut envs = Environments::new(&state, mpo);
    for p in penalties.iter_mut() {
        p.envs = OverlapEnvs::new(&state, p.reference);
    }

    let mut sweeps = Vec::new();
    let mut last_energy = f64::INFINITY;
    let mut converged = false;
    for sweep in 0..config.max_sweeps {
        let chi = config.bond_at(sweep);
        let alpha = config.noise_at(sweep);
        let mut sweep_discarded = 0.0f64;
        let mut energy = 0.0;

        // Left-to-right, then right-to-left.
        for i in 0..n - 1 {
            let (e, d) =
                update_two_site(&mut state, mpo, &mut envs, penalties, config, i, chi, alpha, true)?;
            energy = e;
            sweep_discarded = sweep_discarded.max(d);
        }
        for i in (0..n - 1).rev() {
            let (e, d) = update_two_site(
                &mut state, mpo, &mut envs, penalties, config, i, chi, alpha, false,
            )?;
            energy = e;
            sweep_discarded = sweep_discarded.max(d);
        }

        sweeps.push(SweepRecord {
            sweep,
            energy,
            max_bond: state.max_bond(),
            discarded: sweep_discarded,
            noise: alpha,
        });
        let settled = sweep >= config.settled_sweep();
        if settled && (last_energy - energy).abs() < config.energy_tol * energy.abs().max(1.0) {
            converged = true;
            last_energy = energy;
            break;
        }
        last_energy = energy;
    }
    state.normalize();
    Ok(DmrgRun { state, energy: last_energy, converged, sweeps })
}

/// One two-site update at `(i, i+1)`; returns (local energy, discarded weight).
#[allow(clippy::too_many_arguments)]
fn update_two_site(
    state: &mut MatrixProductState<f64>,
    mpo: &MatrixProductOperator<f64>,
    envs: &mut Environments<f64>,
    penalties: &mut [PenaltyTerm<'_>],
    config: &DmrgConfig,
    i: usize,
    chi: usize,
    alpha: f64,
    moving_right: bool,
) -> Result<(f64, f64)> {
    debug_assert!(state.center() == i || state.center() == i + 1);
    let theta0 = two_site_block(state.tensor(i), state.tensor(i + 1));
    let (dl, _, _, dr) = theta0.dim();
    let dim = dl * 4 * dr;
    let w1 = mpo.tensor(i);
    let w2 = mpo.tensor(i + 1);
    let windows: Vec<(f64, Array4<f64>)> = penalties
        .iter()
        .map(|p| (p.weight, p.envs.window_two_site(i, p.reference)))
        .collect();

    let mut matvec = |x: &[f64], y: &mut [f64]| {
        let theta = Array4::from_shape_vec((dl, 2, 2, dr), x.to_vec()).unwrap();
        let mut hv = envs.apply_two_site(i, w1, w2, &theta);
        for (weight, g) in &windows {
            let proj: f64 = g.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            hv.zip_mut_with(g, |h, &gv| *h += weight * proj * gv);
        }
        y.copy_from_slice(hv.as_slice().unwrap());
    };

    let flat0 = theta0.as_slice().unwrap();
    let (energy, theta_vec) =
        lanczos_ground(&mut matvec, flat0, config.local_tol, config.local_max_iter.min(dim))?;
    let theta =
        Array2::from_shape_vec((dl * 2, 2 * dr), theta_vec).expect("contiguous local solution");

    let discarded = if alpha > 0.0 {
        truncate_with_noise(state, envs, mpo, i, &theta, chi, config.trunc_tol, alpha, moving_right)?
    } else {
        truncate_svd(state, i, &theta, chi, config.trunc_tol, moving_right)?
    };
    state.add_truncation(discarded);

    // Refresh environments for the direction of motion.
    if moving_right {
        state.set_center(i + 1);
        envs.update_left(i, state, mpo);
        for p in penalties.iter_mut() {
            p.envs.update_left(i, state, p.reference);
        }
    } else {
        state.set_center(i);
        envs.update_right(i + 1, state, mpo);
        for p in penalties.iter_mut() {
            p.envs.update_right(i + 1, state, p.reference);
        }
    }
    Ok((energy, discarded))
}

fn truncate_svd(
    state: &mut MatrixProductState<f64>,
    i: usize,
    theta: &Array2<f64>,
    chi: usize,
    tol: f64,
    moving_right: bool,
) -> Result<f64> {
    let svd = svd_truncated(theta.view(), chi, tol)?;
    if moving_right {
        state.set_tensor(i, split_left(svd.u, 2));
        let mut sv = svd.vh;
        for (r, mut row) in sv.rows_mut().into_iter().enumerate() {
            let w = svd.s[r];
            row.iter_mut().for_each(|x| *x *= w);
        }
        let norm: f64 = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        sv.mapv_inplace(|x| x / norm);
        state.set_tensor(i + 1, split_right(sv, 2));
    } else {
        state.set_tensor(i + 1, split_right(svd.vh, 2));
        let mut us = svd.u;
        for (c, mut col) in us.columns_mut().into_iter().enumerate() {
            let w = svd.s[c];
            col.iter_mut().for_each(|x| *x *= w);
        }
        let norm: f64 = svd.s.iter().map(|s| s * s).sum::<f64>().sqrt();
        us.mapv_inplace(|x| x / norm);
        state.set_tensor(i, split_left(us, 2));
    }
    Ok(svd.discarded)
}

/// Density-matrix truncation with a noise term built from the half-applied
/// Hamiltonian, stabilizing 2D snake sweeps against local minima.
#[allow(clippy::too_many_arguments)]
fn truncate_with_noise(
    state: &mut MatrixProductState<f64>,
    envs: &Environments<f64>,
    mpo: &MatrixProductOperator<f64>,
    i: usize,
    theta: &Array2<f64>,
    chi: usize,
    tol: f64,
    alpha: f64,
    moving_right: bool,
) -> Result<f64> {
    let (rows, cols) = theta.dim();
    if moving_right {
        // System block = (left bond, first physical index).
        let mut rho = theta.dot(&theta.t());
        let m = envs.noise_half_applied_right(i, mpo.tensor(i), theta);
        let mm = m.dot(&m.t());
        let tr_rho = (0..rows).map(|k| rho[[k, k]]).sum::<f64>();
        let tr_mm = (0..rows).map(|k| mm[[k, k]]).sum::<f64>().max(1e-300);
        rho = rho + mm.mapv(|x| x * (alpha * tr_rho / tr_mm));
        let (vals, vecs) = eigh(rho.view())?;
        let (keep, discarded) = keep_count(&vals, chi, tol);
        // Top eigenvectors (faer returns ascending).
        let mut u = Array2::zeros((rows, keep));
        for k in 0..keep {
            let col = rows - 1 - k;
            for r in 0..rows {
                u[[r, k]] = vecs[[r, col]];
            }
        }
        state.set_tensor(i, split_left(u.clone(), 2));
        let mut core = u.t().dot(theta);
        let norm = core.iter().map(|x| x * x).sum::<f64>().sqrt();
        core.mapv_inplace(|x| x / norm);
        state.set_tensor(i + 1, split_right(core, 2));
        Ok(discarded)
    } else {
        let mut rho = theta.t().dot(theta);
        let m = envs.noise_half_applied_left(i, mpo.tensor(i + 1), theta);
        let mm = m.t().dot(&m);
        let tr_rho = (0..cols).map(|k| rho[[k, k]]).sum::<f64>();
        let tr_mm = (0..cols).map(|k| mm[[k, k]]).sum::<f64>().max(1e-300);
        rho = rho + mm.mapv(|x| x * (alpha * tr_rho / tr_mm));
        let (vals, vecs) = eigh(rho.view())?;
        let (keep, discarded) = keep_count(&vals, chi, tol);
        let mut u = Array2::zeros((cols, keep));
        for k in 0..keep {
            let col = cols - 1 - k;
            for r in 0..cols {
                u[[r, k]] = vecs[[r, col]];
            }
        }
        // Right tensor = Uᵀ reshaped; left absorbs θ·U.
        state.set_tensor(i + 1, split_right(u.t().as_standard_layout().to_owned(), 2));
        let mut core = theta.dot(&u);
        let norm = core.iter().map(|x| x * x).sum::<f64>().sqrt();
        core.mapv_inplace(|x| x / norm);
        state.set_tensor(i, split_left(core, 2));
        Ok(discarded)
    }
}

/// Rank kept under (bond cap, discarded-weight tolerance) for an eigenvalue
/// spectrum in ascending order; returns (kept, discarded weight).
fn keep_count(vals: &ndarray::Array1<f64>, chi: usize, tol: f64) -> (usize, f64) {
    let n = vals.len();
    let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 {
        return (1, 0.0);
    }
    let mut keep = n.min(chi.max(1));
    if tol > 0.0 {
        let mut acc = 0.0;
        let mut needed = 1;
        for k in 0..n {
            acc += vals[k].max(0.0);
            if acc > tol * total {
                needed = n - k;
                break;
            }
        }
        keep = keep.min(needed.max(1));
    }
    while keep > 1 && vals[n - keep] <= 0.0 {
        keep -= 1;
    }
    let kept: f64 = (0..keep).map(|k| vals[n - 1 - k].max(0.0)).sum();
    (keep, ((total - kept) / total).max(0.0))
}
