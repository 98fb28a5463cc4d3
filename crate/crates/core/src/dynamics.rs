//! Real-time evolution of matrix product states under piecewise-constant
//! Hamiltonians: one-site TDVP with global Krylov bond expansion.
//!
//! Frequencies are MHz and times μs throughout; a segment of duration `τ`
//! under a Hamiltonian with MHz coefficients evolves by `exp(−i 2π H τ)`.
//! The dimensionless phase `2π·f·τ` is formed here and nowhere else.

use ndarray::{Array2, Array3};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::TermList;
use crate::spiral::PulseSchedule;
use crate::tensor::env::Environments;
use crate::tensor::krylov::lanczos_expm;
use crate::tensor::linalg::{lq_thin, qr_thin, svd_truncated};
use crate::tensor::mps::{adjoint, merge_left, merge_right, ops, split_left, split_right};
use crate::tensor::{expectation, mps_sum, MatrixProductOperator, MatrixProductState};

/// Angular phase per (MHz · μs).
pub const PHASE_PER_MHZ_US: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct TdvpConfig {
    pub n_steps: usize,
    pub max_bond: usize,
    /// Krylov vectors `Hψ … H^kψ` mixed into the bond basis before each step.
    pub krylov_depth: usize,
    /// Bond cap for the Krylov enrichment vectors themselves.
    pub krylov_bond: usize,
    /// Truncation tolerance when building enrichment vectors.
    pub krylov_tol: f64,
    /// Gram-Schmidt pass over the enrichment vectors.
    pub reorthogonalize: bool,
    /// Singular-value cutoff (relative) for accepting new basis directions.
    pub expansion_cutoff: f64,
    /// Tolerance of the local Lanczos exponentials.
    pub local_expm_tol: f64,
    /// Compression tolerance for operator construction.
    pub mpo_tol: f64,
}

impl Default for TdvpConfig {
    fn default() -> Self {
        Self {
            n_steps: 200,
            max_bond: 550,
            krylov_depth: 3,
            krylov_bond: 64,
            krylov_tol: 1e-10,
            reorthogonalize: true,
            expansion_cutoff: 1e-10,
            local_expm_tol: 1e-12,
            mpo_tol: 1e-10,
        }
    }
}

/// One piecewise-constant segment: the Hamiltonian evaluated at the segment
/// midpoint, and the segment duration in μs.
#[derive(Debug, Clone)]
pub struct ScheduleSegment {
    pub terms: TermList,
    pub duration_us: f64,
    pub t_mid_us: f64,
}

/// Discretize a pulse schedule into piecewise-constant segments, sampling
/// waveforms at segment midpoints. Segment durations sum to the schedule's
/// evolution window exactly.
pub fn discretize_schedule(
    schedule: &PulseSchedule,
    n_steps: usize,
) -> Result<Vec<ScheduleSegment>> {
    if n_steps == 0 {
        return Err(Error::Config("need at least one step".into()));
    }
    let t_ramp = schedule.ramp_time();
    let dt = t_ramp / n_steps as f64;
    let mut segments = Vec::new();
    for k in 0..n_steps {
        let t_mid = (k as f64 + 0.5) * dt;
        segments.push(ScheduleSegment {
            terms: schedule.terms_at(t_mid)?,
            duration_us: dt,
            t_mid_us: t_mid,
        });
    }
    // The measurement quench keeps the same nominal resolution.
    if let Some(quench) = schedule.quench_duration() {
        let n_q = ((quench / dt).round() as usize).max(1);
        let dq = quench / n_q as f64;
        for k in 0..n_q {
            let t_mid = t_ramp + (k as f64 + 0.5) * dq;
            segments.push(ScheduleSegment {
                terms: schedule.terms_at(t_mid)?,
                duration_us: dq,
                t_mid_us: t_mid,
            });
        }
    }
    Ok(segments)
}

/// Per-step trajectory record.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub step: usize,
    pub time_us: f64,
    /// `⟨H(t_mid)⟩` in MHz.
    pub energy: f64,
    pub norm: f64,
    pub max_bond: usize,
    pub truncation: f64,
    /// `Σ_i (⟨n_i⟩ − 1/2)`, the staggered magnetization under the
    /// occupation↔spin identification.
    pub staggered_magnetization: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub final_state: MatrixProductState<C64>,
}

impl Trajectory {
    /// `step,time_us,energy_mhz,norm,max_bond,truncation,staggered_magnetization`
    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "step,time_us,energy_mhz,norm,max_bond,truncation,staggered_magnetization")?;
        for r in &self.steps {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.step,
                crate::model::format_f64(r.time_us),
                crate::model::format_f64(r.energy),
                crate::model::format_f64(r.norm),
                r.max_bond,
                crate::model::format_f64(r.truncation),
                crate::model::format_f64(r.staggered_magnetization),
            )?;
        }
        Ok(())
    }
}

/// Evolve through a discretized schedule: before every step the bond basis is
/// enriched with global Krylov vectors, then a symmetric one-site TDVP step
/// advances the state.
pub fn evolve_schedule(
    init: &MatrixProductState<C64>,
    schedule: &PulseSchedule,
    config: &TdvpConfig,
) -> Result<Trajectory> {
    let segments = discretize_schedule(schedule, config.n_steps)?;
    evolve_segments(init, &segments, config)
}

/// Evolve through explicit segments (also used for fixed-Hamiltonian runs).
pub fn evolve_segments(
    init: &MatrixProductState<C64>,
    segments: &[ScheduleSegment],
    config: &TdvpConfig,
) -> Result<Trajectory> {
    if segments.is_empty() {
        return Err(Error::Config("empty schedule".into()));
    }
    let mut state = init.clone();
    state.move_center_to(0);
    let mut steps = Vec::with_capacity(segments.len());
    let mut time = 0.0;
    for (k, seg) in segments.iter().enumerate() {
        let mpo = MatrixProductOperator::from_terms(&seg.terms, config.mpo_tol)?.to_complex();
        if config.krylov_depth > 0 {
            state = krylov_expand(&state, &mpo, config.krylov_depth, config.max_bond, config)?;
        }
        let dt_phase = PHASE_PER_MHZ_US * seg.duration_us;
        tdvp_step_inner(&mut state, &mpo, dt_phase, config)?;
        time += seg.duration_us;

        let energy = expectation(&state, &mpo)?;
        let norm = state.norm();
        let stag: f64 = (0..state.n_sites())
            .map(|i| state.expect_site(ops::occupation::<C64>().view(), i) - 0.5)
            .sum();
        steps.push(StepRecord {
            step: k,
            time_us: time,
            energy,
            norm,
            max_bond: state.max_bond(),
            truncation: state.truncation_error(),
            staggered_magnetization: stag,
        });
    }
    Ok(Trajectory { steps, final_state: state })
}

/// One symmetric one-site TDVP step `exp(−i H dt)` (second order in `dt`).
/// `dt` is the dimensionless phase. Bond dimensions never grow here; pair
/// with [`krylov_expand`] to open the manifold.
pub fn tdvp_step(
    state: &MatrixProductState<C64>,
    mpo: &MatrixProductOperator<C64>,
    dt: f64,
    max_bond: usize,
) -> Result<MatrixProductState<C64>> {
    if state.n_sites() != mpo.n_sites() {
        return Err(Error::Shape("state and operator site counts differ".into()));
    }
    if state.max_bond() > max_bond {
        return Err(Error::Config(format!(
            "state bond {} exceeds cap {max_bond}",
            state.max_bond()
        )));
    }
    if (state.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Config("TDVP needs a normalized state".into()));
    }
    let mut out = state.clone();
    out.move_center_to(0);
    let config = TdvpConfig::default();
    tdvp_step_inner(&mut out, mpo, dt, &config)?;
    Ok(out)
}

fn tdvp_step_inner(
    state: &mut MatrixProductState<C64>,
    mpo: &MatrixProductOperator<C64>,
    dt: f64,
    config: &TdvpConfig,
) -> Result<()> {
    let n = state.n_sites();
    debug_assert_eq!(state.center(), 0);
    let mut envs = Environments::new(state, mpo);
    let half = 0.5 * dt;

    // Left-to-right half step.
    for i in 0..n {
        evolve_site(state, mpo, &envs, i, half, config)?;
        if i + 1 < n {
            // Split and back-evolve the bond.
            let t = state.tensor(i);
            let (q, c) = {
                let m = merge_left(t);
                qr_thin(m.view())
            };
            state.set_tensor(i, split_left(q, 2));
            envs.update_left(i, state, mpo);
            let c_new = evolve_bond(&envs, i + 1, &c, -half, config)?;
            let next = merge_right(state.tensor(i + 1));
            state.set_tensor(i + 1, split_right(c_new.dot(&next), 2));
            state.set_center(i + 1);
        }
    }
    // Right-to-left half step.
    for i in (0..n).rev() {
        evolve_site(state, mpo, &envs, i, half, config)?;
        if i > 0 {
            let t = state.tensor(i);
            let (c, q) = {
                let m = merge_right(t);
                lq_thin(m.view())
            };
            state.set_tensor(i, split_right(q, 2));
            envs.update_right(i, state, mpo);
            let c_new = evolve_bond(&envs, i, &c, -half, config)?;
            let prev = merge_left(state.tensor(i - 1));
            state.set_tensor(i - 1, split_left(prev.dot(&c_new), 2));
            state.set_center(i - 1);
        }
    }
    state.normalize();
    Ok(())
}

fn evolve_site(
    state: &mut MatrixProductState<C64>,
    mpo: &MatrixProductOperator<C64>,
    envs: &Environments<C64>,
    i: usize,
    dt: f64,
    config: &TdvpConfig,
) -> Result<()> {
    let t = state.tensor(i).clone();
    let dims = t.dim();
    let flat: Vec<C64> = t.iter().copied().collect();
    let w = mpo.tensor(i);
    let mut matvec = |x: &[C64], y: &mut [C64]| {
        let v = Array3::from_shape_vec(dims, x.to_vec()).unwrap();
        let hv = envs.apply_one_site(i, w, &v);
        y.copy_from_slice(hv.as_slice().unwrap());
    };
    let out = lanczos_expm(&mut matvec, &flat, dt, config.local_expm_tol, 40)
        .map_err(|e| Error::numerical(format!("site {i} integrator failed: {e}")))?;
    state.set_tensor(i, Array3::from_shape_vec(dims, out).unwrap());
    Ok(())
}

fn evolve_bond(
    envs: &Environments<C64>,
    i: usize,
    c: &Array2<C64>,
    dt: f64,
    config: &TdvpConfig,
) -> Result<Array2<C64>> {
    let dims = c.dim();
    let flat: Vec<C64> = c.iter().copied().collect();
    let mut matvec = |x: &[C64], y: &mut [C64]| {
        let v = Array2::from_shape_vec(dims, x.to_vec()).unwrap();
        let kv = envs.apply_bond(i, &v);
        y.copy_from_slice(kv.as_slice().unwrap());
    };
    let out = lanczos_expm(&mut matvec, &flat, dt, config.local_expm_tol, 40)
        .map_err(|e| Error::numerical(format!("bond {i} integrator failed: {e}")))?;
    Ok(Array2::from_shape_vec(dims, out).unwrap())
}

/// Report from a bond expansion.
#[derive(Debug, Clone)]
pub struct ExpansionReport {
    pub bond_before: usize,
    pub bond_after: usize,
    /// Truncation applied to the enrichment vectors (the state itself is
    /// represented exactly in the enlarged basis).
    pub enrichment_truncation: f64,
    pub capped: bool,
}

/// Enlarge bond bases with the span of `{ψ, Hψ, …, H^k ψ}` without changing
/// the state as a vector: new directions enter with zero weight, exactly.
pub fn krylov_expand(
    state: &MatrixProductState<C64>,
    mpo: &MatrixProductOperator<C64>,
    k: usize,
    max_bond: usize,
    config: &TdvpConfig,
) -> Result<MatrixProductState<C64>> {
    Ok(krylov_expand_report(state, mpo, k, max_bond, config)?.0)
}

pub fn krylov_expand_report(
    state: &MatrixProductState<C64>,
    mpo: &MatrixProductOperator<C64>,
    k: usize,
    max_bond: usize,
    config: &TdvpConfig,
) -> Result<(MatrixProductState<C64>, ExpansionReport)> {
    if k == 0 {
        let report = ExpansionReport {
            bond_before: state.max_bond(),
            bond_after: state.max_bond(),
            enrichment_truncation: 0.0,
            capped: false,
        };
        return Ok((state.clone(), report));
    }
    let bond_before = state.max_bond();
    // Krylov vectors at their own (smaller) bond cap.
    let phi_bond = config.krylov_bond.min(max_bond);
    let mut phis: Vec<MatrixProductState<C64>> = Vec::with_capacity(k);
    let mut enrich_trunc = 0.0f64;
    let mut prev = state.clone();
    for _ in 0..k {
        let (next, _norm, disc) = mpo.apply_to(&prev, phi_bond, config.krylov_tol)?;
        enrich_trunc = enrich_trunc.max(disc);
        let next = if config.reorthogonalize {
            orthogonalize_against(&next, state, &phis, phi_bond, config.krylov_tol)?
        } else {
            next
        };
        phis.push(next.clone());
        prev = next;
    }

    // Sweep left-to-right extending each left basis by the component of the
    // Krylov bases orthogonal to the state's own.
    let n = state.n_sites();
    let mut psi = state.clone();
    psi.move_center_to(n - 1);
    for phi in &mut phis {
        phi.move_center_to(n - 1);
    }
    // Overlap maps from the expanded bra bases into each φ's bases.
    let mut maps: Vec<Array2<C64>> =
        phis.iter().map(|_| Array2::from_elem((1, 1), C64::new(1.0, 0.0))).collect();
    let mut capped = false;

    for i in 0..n - 1 {
        let a = psi.tensor(i); // left-isometric (or center at last site)
        let (dl, _, dr) = a.dim();
        let a_m = merge_left(a); // (dl·2, dr)
        // Candidate new directions from each φ, lifted into the joint frame.
        let mut blocks: Vec<Array2<C64>> = Vec::new();
        for (j, phi) in phis.iter().enumerate() {
            let f = phi.tensor(i);
            let (fl, _, fr) = f.dim();
            let lift = &maps[j]; // (dl, fl)
            let f_m = merge_right(f); // (fl, 2·fr)
            let lifted = lift
                .dot(&f_m)
                .into_shape_with_order((dl, 2, fr))
                .unwrap();
            let lifted_m = merge_left(&lifted); // (dl·2, fr)
            // Project out the retained basis.
            let overlap = adjoint(a_m.view()).dot(&lifted_m);
            let residual = &lifted_m - &a_m.dot(&overlap);
            blocks.push(residual);
            let _ = fl;
        }
        let total_cols: usize = blocks.iter().map(|b| b.ncols()).sum();
        let cand = {
            let mut c = Array2::zeros((dl * 2, total_cols));
            let mut off = 0;
            for b in &blocks {
                c.slice_mut(ndarray::s![.., off..off + b.ncols()]).assign(b);
                off += b.ncols();
            }
            c
        };
        let room = max_bond.saturating_sub(dr);
        let extra = if room == 0 || total_cols == 0 {
            capped = capped || total_cols > 0;
            Array2::zeros((dl * 2, 0))
        } else {
            let svd = svd_truncated(cand.view(), room, 0.0)?;
            // Keep directions above the cutoff only.
            let sig0 = svd.s.first().copied().unwrap_or(0.0);
            let mut keep = 0;
            for v in svd.s.iter() {
                if *v > config.expansion_cutoff * sig0.max(1e-300) {
                    keep += 1;
                }
            }
            if keep < svd.rank && room <= svd.rank {
                capped = true;
            }
            svd.u.slice(ndarray::s![.., ..keep]).to_owned()
        };
        let new_dr = dr + extra.ncols();

        // New site tensor: [A | extra]; the next tensor gains zero rows.
        let mut a_new = Array2::zeros((dl * 2, new_dr));
        a_new.slice_mut(ndarray::s![.., ..dr]).assign(&a_m);
        a_new.slice_mut(ndarray::s![.., dr..]).assign(&extra);

        // Update overlap maps: T'_j = [A|extra]† · lifted_j
        for (j, phi) in phis.iter().enumerate() {
            let f = phi.tensor(i);
            let (_, _, fr) = f.dim();
            let lift = &maps[j];
            let f_m = merge_right(f);
            let lifted = lift.dot(&f_m).into_shape_with_order((dl, 2, fr)).unwrap();
            let lifted_m = merge_left(&lifted);
            maps[j] = adjoint(a_new.view()).dot(&lifted_m);
        }

        psi.set_tensor(i, split_left(a_new, 2));
        // Pad the next tensor with zero rows.
        let next = psi.tensor(i + 1);
        let (_, _, nr) = next.dim();
        let mut padded = Array3::zeros((new_dr, 2, nr));
        padded.slice_mut(ndarray::s![..dr, .., ..]).assign(next);
        psi.set_tensor(i + 1, padded);
    }
    psi.move_center_to(0);
    psi.normalize();
    let report = ExpansionReport {
        bond_before,
        bond_after: psi.max_bond(),
        enrichment_truncation: enrich_trunc,
        capped,
    };
    Ok((psi, report))
}

/// Remove the components of `v` along `state` and the previous Krylov
/// vectors, re-compressing to the enrichment bond.
fn orthogonalize_against(
    v: &MatrixProductState<C64>,
    state: &MatrixProductState<C64>,
    others: &[MatrixProductState<C64>],
    max_bond: usize,
    tol: f64,
) -> Result<MatrixProductState<C64>> {
    let mut parts: Vec<(C64, &MatrixProductState<C64>)> = vec![(C64::new(1.0, 0.0), v)];
    let c0 = state.overlap(v)?;
    parts.push((-c0, state));
    for o in others {
        let c = o.overlap(v)?;
        parts.push((-c, o));
    }
    let (sum, norm) = mps_sum(&parts)?;
    if norm < 1e-12 {
        // Nothing left after projection; keep the raw vector.
        return Ok(v.clone());
    }
    let (out, _) = sum.compress(max_bond, tol);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundstate::{dmrg_ground, neel_state, DmrgConfig};
    use crate::model::{build_nn_heisenberg, LatticeGeometry};
    use crate::oracle::{self, SpinBasis};
    use std::sync::Arc;

    fn to_complex(s: &MatrixProductState<f64>) -> MatrixProductState<C64> {
        let tensors = (0..s.n_sites())
            .map(|i| s.tensor(i).mapv(|x| C64::new(x, 0.0)))
            .collect();
        let (mut c, _) = MatrixProductState::from_raw(tensors);
        c.move_center_to(0);
        c
    }

    #[test]
    fn eigenstate_gets_phase_only() {
        let geom = LatticeGeometry::unit(2, 1).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo = MatrixProductOperator::from_terms(&terms, 0.0).unwrap();
        let ground = dmrg_ground(&mpo, &DmrgConfig::default(), &neel_state(&geom)).unwrap();
        let psi0 = to_complex(&ground.state);
        let dt = 0.31;
        let psi1 = tdvp_step(&psi0, &mpo.to_complex(), dt, 8).unwrap();
        let ov = psi0.overlap(&psi1).unwrap();
        assert!((ov.norm() - 1.0).abs() < 1e-10, "|overlap| = {}", ov.norm());
        let expected = C64::from_polar(1.0, -ground.energy * dt);
        assert!((ov - expected).norm() < 1e-8, "phase error {}", (ov - expected).norm());
    }

    #[test]
    fn two_spin_matches_exact_exponential() {
        // Néel start on a bond: full Rabi-like singlet-triplet oscillation.
        let geom = LatticeGeometry::unit(2, 1).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo = MatrixProductOperator::from_terms(&terms, 0.0).unwrap().to_complex();
        let mut psi = to_complex(&neel_state(&geom));
        let basis = Arc::new(SpinBasis::full(2));
        let bits: Vec<u8> = (0..2)
            .map(|c| {
                let (x, y) = geom.site_at(c);
                ((x + y) % 2 == 0) as u8
            })
            .collect();
        let exact0 = oracle::ExactState::product(basis, &bits).unwrap();
        let config = TdvpConfig { max_bond: 4, krylov_depth: 2, krylov_bond: 4, ..Default::default() };
        let n_steps = 40;
        let dt = 0.1;
        for _ in 0..n_steps {
            psi = krylov_expand(&psi, &mpo, config.krylov_depth, config.max_bond, &config).unwrap();
            let mut s = psi.clone();
            tdvp_step_inner(&mut s, &mpo, dt, &config).unwrap();
            psi = s;
        }
        let exact = oracle::exact_evolve(&exact0, &terms, dt * n_steps as f64).unwrap();
        let v = psi.to_statevector();
        let fid: C64 = exact.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        assert!((fid.norm() - 1.0).abs() < 1e-8, "fidelity {}", fid.norm());
    }

    #[test]
    fn krylov_expansion_is_exact_on_state() {
        let geom = LatticeGeometry::unit(3, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 0.7);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap().to_complex();
        let psi = to_complex(&neel_state(&geom));
        let config = TdvpConfig::default();
        let (expanded, report) = krylov_expand_report(&psi, &mpo, 3, 32, &config).unwrap();
        assert!(report.bond_after > report.bond_before);
        let ov = expanded.overlap(&psi).unwrap().norm();
        assert!((ov - 1.0).abs() < 1e-10, "expansion changed the state: {ov}");
    }

    #[test]
    fn krylov_depth_zero_is_identity() {
        let geom = LatticeGeometry::unit(2, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap().to_complex();
        let psi = to_complex(&neel_state(&geom));
        let config = TdvpConfig::default();
        let out = krylov_expand(&psi, &mpo, 0, 16, &config).unwrap();
        assert_eq!(out.bond_dims(), psi.bond_dims());
    }

    #[test]
    fn plain_tdvp_stagnates_where_expansion_tracks_ed() {
        // From a product state, one-site TDVP alone cannot grow the bond and
        // misses the dynamics; with expansion it follows the exact result.
        let geom = LatticeGeometry::unit(2, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap().to_complex();
        let psi0 = to_complex(&neel_state(&geom));
        let basis = Arc::new(SpinBasis::full(4));
        let mut bits = vec![0u8; 4];
        for (x, y) in geom.sites() {
            bits[geom.chain_index(x, y)] = ((x + y) % 2 == 0) as u8;
        }
        let exact0 = oracle::ExactState::product(basis, &bits).unwrap();
        let t_total = 2.0;
        let n_steps = 50;
        let dt = t_total / n_steps as f64;
        let exact = oracle::exact_evolve(&exact0, &terms, t_total).unwrap();

        let config = TdvpConfig { krylov_bond: 16, ..TdvpConfig::default() };
        let mut plain = psi0.clone();
        let mut enriched = psi0.clone();
        for _ in 0..n_steps {
            let mut s = plain.clone();
            tdvp_step_inner(&mut s, &mpo, dt, &config).unwrap();
            plain = s;
            enriched = krylov_expand(&enriched, &mpo, 3, 16, &config).unwrap();
            let mut s = enriched.clone();
            tdvp_step_inner(&mut s, &mpo, dt, &config).unwrap();
            enriched = s;
        }
        let fid = |s: &MatrixProductState<C64>| -> f64 {
            let v = s.to_statevector();
            let f: C64 = exact.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            f.norm()
        };
        let f_plain = fid(&plain);
        let f_enriched = fid(&enriched);
        assert!(f_enriched > 1.0 - 1e-6, "enriched fidelity {f_enriched}");
        assert!(f_plain < 0.9, "plain 1-site TDVP unexpectedly accurate: {f_plain}");
    }

    #[test]
    fn forward_backward_round_trip() {
        let geom = LatticeGeometry::unit(3, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap().to_complex();
        let psi0 = to_complex(&neel_state(&geom));
        let config = TdvpConfig { krylov_bond: 24, ..TdvpConfig::default() };
        let mut psi = psi0.clone();
        let dt = 0.05;
        for _ in 0..20 {
            psi = krylov_expand(&psi, &mpo, 3, 24, &config).unwrap();
            let mut s = psi.clone();
            tdvp_step_inner(&mut s, &mpo, dt, &config).unwrap();
            psi = s;
        }
        for _ in 0..20 {
            let mut s = psi.clone();
            tdvp_step_inner(&mut s, &mpo, -dt, &config).unwrap();
            psi = s;
        }
        let fid = psi.overlap(&psi0).unwrap().norm();
        assert!(fid > 1.0 - 1e-6, "round-trip fidelity {fid}");
    }

    #[test]
    fn energy_conserved_under_constant_hamiltonian() {
        let geom = LatticeGeometry::unit(3, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let mpo_r = MatrixProductOperator::from_terms(&terms, 1e-12).unwrap();
        let mpo = mpo_r.to_complex();
        let psi0 = to_complex(&neel_state(&geom));
        let config = TdvpConfig { krylov_bond: 32, ..TdvpConfig::default() };
        let mut psi = krylov_expand(&psi0, &mpo, 3, 64, &config).unwrap();
        let e0 = expectation(&psi, &mpo).unwrap();
        for _ in 0..100 {
            psi = krylov_expand(&psi, &mpo, 2, 64, &config).unwrap();
            let mut s = psi.clone();
            tdvp_step_inner(&mut s, &mpo, 0.05, &config).unwrap();
            psi = s;
        }
        let e1 = expectation(&psi, &mpo).unwrap();
        assert!(
            (e1 - e0).abs() < 1e-6 * e0.abs().max(1.0),
            "energy drift {} over 100 steps",
            (e1 - e0).abs()
        );
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }
}
