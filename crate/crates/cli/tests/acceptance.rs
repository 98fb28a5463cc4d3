//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line. Tolerances are pinned here.
//!
//! The multi-hour benchmarks (full-size step-scaling curves and the 6x6
//! adiabatic-spiral run) are `#[ignore]`d; run them with
//! `cargo test --release -p dtheory-cli --test acceptance -- --ignored`.

use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64 as C64;

use dtheory::dynamics::{discretize_schedule, evolve_segments, ScheduleSegment, TdvpConfig};
use dtheory::groundstate::{dmrg_excited, dmrg_ground, neel_state, DmrgConfig, DmrgRun};
use dtheory::model::{
    build_d6_heisenberg, build_nn_heisenberg, staggered_map, LatticeGeometry,
};
use dtheory::observables::{
    bootstrap_coupling, correlation_matrix, perturbative_step_scaling, reduce_zz_to_correlation,
    renormalized_coupling, shot_estimator, step_scaling, BarePoint, CorrelationMatrix, Loops,
    Picture,
};
use dtheory::oracle::{self, SectorPolicy, SpinBasis};
use dtheory::spiral::{
    add_measurement_quench, build_spiral, optimize_penalty, run_spiral, SpiralRunConfig, AY_UM,
    C6_MHZ_UM6, T_RAMP_US,
};
use dtheory::tensor::{expectation, MatrixProductOperator, MatrixProductState};
use dtheory::Error;

// ---------------------------------------------------------------------------
// pinned tolerances
// ---------------------------------------------------------------------------

const C1_REL_TOL: f64 = 1e-8;
const C1_RUNTIME_S: f64 = 300.0;
const C2_TOTAL_SPIN_TOL: f64 = 1e-6;
const C2_ISOTROPY_TOL: f64 = 1e-6;
const C3_GBAR: f64 = 0.72824;
const C3_GBAR_TOL: f64 = 1e-5;
const C4_WINDOW: (f64, f64) = (0.45, 0.55);
const C4_REL_TOL: f64 = 0.05;
const C5_REL_TOL: f64 = 0.05;
const C5_Z_MAX: f64 = 0.55;
const C6_ENERGY_OVER_GAP: f64 = 2.81;
const C6_ENERGY_REL_TOL: f64 = 0.15;
const C6_PENALTY: f64 = 0.44;
const C6_PENALTY_TOL: f64 = 0.1;
const C6_REDUCED_RUNTIME_S: f64 = 1800.0;
const C6_REDUCED_FIDELITY: f64 = 0.999;
const C6_REDUCED_ENERGY_REL: f64 = 1e-3;
const C7_NORM_DRIFT: f64 = 1e-8;
const C7_ENERGY_DRIFT_REL: f64 = 1e-6;
const C8_SLOPE: f64 = -0.5;
const C8_SLOPE_TOL: f64 = 0.05;
const C8_COVERAGE: f64 = 0.68;
const C8_COVERAGE_TOL: f64 = 0.05;
const C9_SIGMA: f64 = 3.0;

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

struct Check {
    name: String,
    ok: bool,
    detail: String,
}

fn check(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), ok, detail: detail.into() }
}

fn conclude(criterion: &str, checks: Vec<Check>) {
    let ok = checks.iter().all(|c| c.ok);
    let summary: Vec<String> = checks
        .iter()
        .map(|c| format!("{}{} ({})", if c.ok { "" } else { "!! " }, c.name, c.detail))
        .collect();
    println!("criterion {criterion}: {} — {}", if ok { "PASS" } else { "FAIL" }, summary.join("; "));
    assert!(
        ok,
        "criterion {criterion} failed: {}",
        checks.iter().filter(|c| !c.ok).map(|c| format!("{} ({})", c.name, c.detail)).collect::<Vec<_>>().join("; ")
    );
}

fn exact_reference(lx: usize, ly: usize) -> (oracle::ExactState, f64, CorrelationMatrix) {
    let geom = LatticeGeometry::unit(lx, ly).unwrap();
    let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
    let (state, e0) = oracle::exact_ground_state(&terms, SectorPolicy::Auto).unwrap();
    let zz = oracle::zz_matrix(&state, geom.n_sites());
    let g = reduce_zz_to_correlation(&zz, &geom, Picture::Spin);
    (state, e0, g)
}

fn dmrg_vacuum(lx: usize, ly: usize, chi: usize) -> DmrgRun {
    let geom = LatticeGeometry::unit(lx, ly).unwrap();
    let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
    let config = DmrgConfig {
        trunc_tol: 1e-13,
        energy_tol: 1e-11,
        local_tol: 1e-12,
        max_sweeps: 16,
        ..DmrgConfig::default()
    }
    .with_max_bond(chi);
    let mpo = MatrixProductOperator::from_terms(&terms, config.mpo_tol).unwrap();
    dmrg_ground(&mpo, &config, &neel_state(&geom)).unwrap()
}

// ---------------------------------------------------------------------------
// criterion 1: oracle equivalence
// ---------------------------------------------------------------------------

#[test]
fn c01_oracle_equivalence() {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    for (lx, ly, chi) in [(2, 2, 8), (4, 2, 32), (4, 4, 256), (6, 4, 512)] {
        let geom = LatticeGeometry::unit(lx, ly).unwrap();
        let (_, e0, g_exact) = exact_reference(lx, ly);
        let run = dmrg_vacuum(lx, ly, chi);
        let e_rel = (run.energy - e0).abs() / e0.abs();
        let g_mps = correlation_matrix(&run.state, &geom, Picture::Spin).unwrap();
        let scale = g_exact.matrix().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let g_err = g_mps
            .matrix()
            .iter()
            .zip(g_exact.matrix().iter())
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0f64, f64::max);
        let gb_exact = renormalized_coupling(&g_exact).unwrap().gbar;
        let gb = renormalized_coupling(&g_mps).unwrap().gbar;
        let gb_rel = (gb - gb_exact).abs() / gb_exact;
        checks.push(check(
            format!("{lx}x{ly} E0"),
            e_rel < C1_REL_TOL,
            format!("rel {e_rel:.2e}"),
        ));
        checks.push(check(format!("{lx}x{ly} G"), g_err < C1_REL_TOL, format!("rel {g_err:.2e}")));
        checks.push(check(
            format!("{lx}x{ly} gbar"),
            gb_rel < C1_REL_TOL,
            format!("rel {gb_rel:.2e}"),
        ));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    checks.push(check("runtime", elapsed < C1_RUNTIME_S, format!("{elapsed:.0} s / {C1_RUNTIME_S:.0} s")));
    conclude("1 (oracle equivalence)", checks);
}

// ---------------------------------------------------------------------------
// criterion 2: singlet isotropy of converged vacua
// ---------------------------------------------------------------------------

#[test]
fn c02_singlet_isotropy() {
    let mut checks = Vec::new();
    for (lx, ly, chi) in [(4, 2, 32), (4, 4, 256)] {
        let run = dmrg_vacuum(lx, ly, chi);
        let hh = run.state.all_heisenberg();
        let zz = run.state.all_zz();
        let s_tot2: f64 = hh.sum();
        checks.push(check(
            format!("{lx}x{ly} S_tot²"),
            s_tot2.abs() < C2_TOTAL_SPIN_TOL,
            format!("{s_tot2:.2e}"),
        ));
        let n = lx * ly;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max((zz[[i, j]] - hh[[i, j]] / 3.0).abs());
                }
            }
        }
        checks.push(check(
            format!("{lx}x{ly} isotropy"),
            worst < C2_ISOTROPY_TOL,
            format!("max |SzSz − S·S/3| = {worst:.2e}"),
        ));
    }
    conclude("2 (singlet isotropy)", checks);
}

// ---------------------------------------------------------------------------
// criterion 3: coupling formula and degenerate-spectrum error
// ---------------------------------------------------------------------------

#[test]
fn c03_formula_check() {
    let mut checks = Vec::new();
    let g = CorrelationMatrix::exact(ndarray::array![[4.0, 0.0], [0.0, 1.0]]);
    let c = renormalized_coupling(&g).unwrap();
    checks.push(check(
        "diag(4,1) formula",
        (c.gbar - C3_GBAR).abs() < C3_GBAR_TOL,
        format!("gbar = {:.6}", c.gbar),
    ));

    // Néel product state through the real pipeline: rank-1 matrix → error.
    let geom = LatticeGeometry::unit(4, 4).unwrap();
    let neel = neel_state(&geom);
    let g_neel = correlation_matrix(&neel, &geom, Picture::Spin).unwrap();
    let err = renormalized_coupling(&g_neel);
    checks.push(check(
        "Néel degenerate error",
        matches!(err, Err(Error::DegenerateSpectrum(_))),
        format!("{err:?}").chars().take(60).collect::<String>(),
    ));
    conclude("3 (formula check)", checks);
}

// ---------------------------------------------------------------------------
// criteria 4 & 5: step-scaling consistency and the perturbative window
// ---------------------------------------------------------------------------

fn coupling_point(
    model: &str,
    lx: usize,
    ly: usize,
    aniso: f64,
    chi: usize,
) -> dtheory::observables::CouplingResult {
    let terms = match model {
        "nn" => build_nn_heisenberg(&LatticeGeometry::unit(lx, ly).unwrap(), aniso, 1.0),
        "d6" => {
            let ay = aniso.powf(1.0 / 6.0);
            build_d6_heisenberg(&LatticeGeometry::new(lx, ly, 1.0, ay).unwrap())
        }
        _ => unreachable!(),
    };
    let geom = *terms.geometry();
    let config = DmrgConfig {
        energy_tol: 1e-9,
        local_tol: 1e-10,
        trunc_tol: 1e-11,
        mpo_tol: 1e-9,
        max_sweeps: 20,
        ..DmrgConfig::default()
    }
    .with_max_bond(chi);
    let mpo = MatrixProductOperator::from_terms(&terms, config.mpo_tol).unwrap();
    let run = dmrg_ground(&mpo, &config, &neel_state(&geom)).unwrap();
    assert!(run.converged, "{model} {lx}x{ly} aniso {aniso} did not converge");
    let g = correlation_matrix(&run.state, &geom, Picture::Spin).unwrap();
    renormalized_coupling(&g).unwrap()
}

fn scaling_curve(model: &str, ly: usize, anisotropies: &[f64], chi: usize) -> Vec<(f64, f64)> {
    anisotropies
        .iter()
        .map(|&a| {
            let small = coupling_point(model, 6, ly, a, chi);
            let large = coupling_point(model, 8, ly, a, chi);
            let bare = BarePoint { model: model.into(), ly, anisotropy: a };
            let p = step_scaling(&small, &large, (4, 3), &bare, &bare).unwrap();
            (p.z, p.f)
        })
        .collect()
}

fn interp(points: &[(f64, f64)], z: f64) -> Option<f64> {
    let mut sorted: Vec<(f64, f64)> = points.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for w in sorted.windows(2) {
        if w[0].0 <= z && z <= w[1].0 {
            let t = (z - w[0].0) / (w[1].0 - w[0].0);
            return Some(w[0].1 + t * (w[1].1 - w[0].1));
        }
    }
    None
}

#[test]
#[ignore = "multi-hour benchmark: 48- to 64-spin DMRG sweeps"]
fn c04_step_scaling_consistency() {
    // Both regularizations at matched z in the window must agree within 5%.
    let nn = scaling_curve("nn", 8, &[0.45, 0.6, 0.8], 384);
    let d6 = scaling_curve("d6", 6, &[0.35, 0.55, 0.8], 256);
    let mut checks = Vec::new();
    let mut compared = 0;
    for z in [C4_WINDOW.0, 0.5, C4_WINDOW.1] {
        if let (Some(f_nn), Some(f_d6)) = (interp(&nn, z), interp(&d6, z)) {
            let rel = (f_nn - f_d6).abs() / f_d6;
            compared += 1;
            checks.push(check(
                format!("z = {z:.2}"),
                rel < C4_REL_TOL,
                format!("nn {f_nn:.4} vs d6 {f_d6:.4} (rel {rel:.2e})"),
            ));
        }
    }
    checks.push(check("window coverage", compared >= 2, format!("{compared} matched z values")));
    conclude("4 (step-scaling consistency)", checks);
}

#[test]
#[ignore = "multi-hour benchmark: 48- to 64-spin DMRG sweeps"]
fn c05_perturbative_window() {
    let nn = scaling_curve("nn", 8, &[0.3, 0.45, 0.6, 0.8, 1.0, 1.2], 384);
    let mut checks = Vec::new();
    let mut prev_dev: Option<f64> = None;
    let mut monotone = true;
    for &(z, f) in &nn {
        let reference = perturbative_step_scaling(z, 4.0 / 3.0, Loops::Two).unwrap().f;
        let rel = (f - reference).abs() / reference;
        if z <= C5_Z_MAX {
            checks.push(check(
                format!("z = {z:.3}"),
                rel < C5_REL_TOL,
                format!("F {f:.4} vs two-loop {reference:.4} ({rel:.2e})"),
            ));
        } else {
            if let Some(p) = prev_dev {
                monotone &= rel >= p - 0.01;
            }
            prev_dev = Some(rel);
        }
    }
    checks.push(check("deviation grows beyond the window", monotone, "monotone trend"));
    conclude("5 (perturbative window)", checks);
}

// ---------------------------------------------------------------------------
// criterion 6: spiral benchmark (reduced 4x4 pipeline; full 6x6 ignored)
// ---------------------------------------------------------------------------

struct ReducedPipeline {
    gbar_tdvp: f64,
    gbar_ed: f64,
    gbar_shots: f64,
    shots_sigma: f64,
    fidelity: f64,
    e_tdvp: f64,
    e_ed: f64,
    gbar_doubled: f64,
    runtime_s: f64,
}

fn reduced_geom() -> LatticeGeometry {
    LatticeGeometry::new(4, 4, 12.5, AY_UM).unwrap()
}

fn reduced_tdvp(n_steps: usize) -> TdvpConfig {
    TdvpConfig {
        n_steps,
        max_bond: 64,
        krylov_depth: 3,
        krylov_bond: 24,
        mpo_tol: 1e-10,
        ..TdvpConfig::default()
    }
}

fn reduced_pipeline() -> &'static ReducedPipeline {
    static CELL: OnceLock<ReducedPipeline> = OnceLock::new();
    CELL.get_or_init(|| {
        let t0 = Instant::now();
        let geom = reduced_geom();
        // Vacuum coupling of the target Hamiltonian.
        let target = build_d6_heisenberg(&geom);
        let dmrg = DmrgConfig::default().with_max_bond(128);
        let mpo = MatrixProductOperator::from_terms(&target, dmrg.mpo_tol).unwrap();
        let vacuum = dmrg_ground(&mpo, &dmrg, &neel_state(&geom)).unwrap();
        let gbar_vac = renormalized_coupling(
            &correlation_matrix(&vacuum.state, &geom, Picture::Spin).unwrap(),
        )
        .unwrap()
        .gbar;

        // Small penalty scan, then the final run at the winner.
        let run_cfg = SpiralRunConfig { tdvp: reduced_tdvp(200), ..SpiralRunConfig::default() };
        let search =
            optimize_penalty(&geom, C6_MHZ_UM6, &[0.4, 0.6], gbar_vac, &run_cfg, 0).unwrap();
        let (trajectory, gbar_tdvp) =
            run_spiral(&geom, C6_MHZ_UM6, search.best_h_p, &run_cfg).unwrap();

        // The same discretized schedule through the exact propagator.
        let schedule = add_measurement_quench(
            build_spiral(&geom, C6_MHZ_UM6, search.best_h_p, run_cfg.omega_d, T_RAMP_US).unwrap(),
        )
        .unwrap();
        let segments = discretize_schedule(&schedule, 200).unwrap();
        let basis = std::sync::Arc::new(SpinBasis::full(16));
        let mut exact = oracle::ExactState::product(basis, &[0u8; 16]).unwrap();
        for seg in &segments {
            let phase = dtheory::dynamics::PHASE_PER_MHZ_US * seg.duration_us;
            exact = oracle::exact_evolve(&exact, &seg.terms, phase).unwrap();
        }
        let g_ed = oracle::exact_correlation_matrix(&exact, &geom, Picture::Occupation);
        let gbar_ed = renormalized_coupling(&g_ed).unwrap().gbar;
        let e_ed = oracle::exact_expectation(&exact, &segments.last().unwrap().terms).unwrap();

        // Fidelity and energy of the TDVP state against the exact one.
        let v = trajectory.final_state.to_statevector();
        let fid: C64 = exact.amps.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        let final_mpo = MatrixProductOperator::from_terms(&segments.last().unwrap().terms, 1e-10)
            .unwrap()
            .to_complex();
        let e_tdvp = expectation(&trajectory.final_state, &final_mpo).unwrap();

        // Finite shots.
        let shots = trajectory.final_state.sample_shots(5000, 77).unwrap();
        let (coupling, _) = bootstrap_coupling(&shots, &geom, 500, 77).unwrap();

        // Step-doubled trajectory for the Trotter-consistency check.
        let run_cfg_2x = SpiralRunConfig { tdvp: reduced_tdvp(400), ..SpiralRunConfig::default() };
        let (_, gbar_doubled) =
            run_spiral(&geom, C6_MHZ_UM6, search.best_h_p, &run_cfg_2x).unwrap();

        ReducedPipeline {
            gbar_tdvp,
            gbar_ed,
            gbar_shots: coupling.gbar,
            shots_sigma: coupling.stat_error.unwrap_or(0.0),
            fidelity: fid.norm(),
            e_tdvp,
            e_ed,
            gbar_doubled,
            runtime_s: t0.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn c06_spiral_benchmark_reduced() {
    let p = reduced_pipeline();
    let mut checks = Vec::new();
    checks.push(check(
        "runtime",
        p.runtime_s < C6_REDUCED_RUNTIME_S,
        format!("{:.0} s / {C6_REDUCED_RUNTIME_S:.0} s (includes the doubled run)", p.runtime_s),
    ));
    checks.push(check(
        "fidelity vs ED",
        p.fidelity > C6_REDUCED_FIDELITY,
        format!("{:.6}", p.fidelity),
    ));
    let e_rel = (p.e_tdvp - p.e_ed).abs() / p.e_ed.abs();
    checks.push(check("energy vs ED", e_rel < C6_REDUCED_ENERGY_REL, format!("rel {e_rel:.2e}")));
    let dg = (p.gbar_tdvp - p.gbar_ed).abs();
    checks.push(check(
        "gbar vs ED",
        dg < 3.0 * p.shots_sigma.max(1e-3),
        format!("{:.5} vs {:.5}", p.gbar_tdvp, p.gbar_ed),
    ));
    let shots_dev = (p.gbar_shots - p.gbar_ed).abs();
    checks.push(check(
        "shot estimate",
        shots_dev < 4.0 * p.shots_sigma,
        format!("{:.4} ± {:.4} vs {:.4}", p.gbar_shots, p.shots_sigma, p.gbar_ed),
    ));
    conclude("6 (spiral benchmark, reduced 4x4)", checks);
}

#[test]
#[ignore = "multi-hour benchmark: 36-spin TDVP at bond 550 with a penalty grid"]
fn c06_spiral_benchmark_full() {
    let geom = LatticeGeometry::new(6, 6, 12.5, AY_UM).unwrap();
    let target = build_d6_heisenberg(&geom);
    let dmrg = DmrgConfig::default().with_max_bond(512);
    let mpo = MatrixProductOperator::from_terms(&target, dmrg.mpo_tol).unwrap();
    let vacuum = dmrg_ground(&mpo, &dmrg, &neel_state(&geom)).unwrap();
    let excited = dmrg_excited(&mpo, &dmrg, &vacuum).unwrap();
    let delta = excited.energy - vacuum.energy;
    let gbar_vac = renormalized_coupling(
        &correlation_matrix(&vacuum.state, &geom, Picture::Spin).unwrap(),
    )
    .unwrap()
    .gbar;

    let run_cfg = SpiralRunConfig {
        tdvp: TdvpConfig { n_steps: 200, max_bond: 550, ..TdvpConfig::default() },
        ..SpiralRunConfig::default()
    };
    let grid: Vec<f64> = vec![0.35, 0.40, 0.45, 0.50, 0.55];
    let search = optimize_penalty(&geom, C6_MHZ_UM6, &grid, gbar_vac, &run_cfg, 0).unwrap();
    let (trajectory, _) = run_spiral(&geom, C6_MHZ_UM6, search.best_h_p, &run_cfg).unwrap();

    let map = staggered_map(&geom);
    let target_occ = map.to_occupation_picture(&target);
    let target_mpo = MatrixProductOperator::from_terms(&target_occ, 1e-10).unwrap().to_complex();
    let e_prep = expectation(&trajectory.final_state, &target_mpo).unwrap();
    let ratio = (e_prep - vacuum.energy) / delta;

    let mut checks = Vec::new();
    checks.push(check(
        "(E−E0)/Δ",
        (ratio - C6_ENERGY_OVER_GAP).abs() < C6_ENERGY_REL_TOL * C6_ENERGY_OVER_GAP,
        format!("{ratio:.3} vs {C6_ENERGY_OVER_GAP} ± 15%"),
    ));
    checks.push(check(
        "optimized penalty",
        (search.best_h_p - C6_PENALTY).abs() <= C6_PENALTY_TOL,
        format!("{:.3} MHz vs {C6_PENALTY} ± {C6_PENALTY_TOL}", search.best_h_p),
    ));
    conclude("6 (spiral benchmark, full 6x6)", checks);
}

// ---------------------------------------------------------------------------
// criterion 7: TDVP integrity
// ---------------------------------------------------------------------------

#[test]
fn c07_tdvp_integrity() {
    // 200 steps under a fixed Rydberg Hamiltonian on an oracle-scale lattice.
    let geom = LatticeGeometry::new(3, 2, 12.5, AY_UM).unwrap();
    let schedule = build_spiral(&geom, C6_MHZ_UM6, 0.4, 25.0 / 2f64.sqrt(), T_RAMP_US).unwrap();
    let fixed = schedule.terms_at(0.5 * T_RAMP_US).unwrap();
    let segments: Vec<ScheduleSegment> = (0..200)
        .map(|k| ScheduleSegment {
            terms: fixed.clone(),
            duration_us: 0.01,
            t_mid_us: 0.01 * (k as f64 + 0.5),
        })
        .collect();
    let init = MatrixProductState::<C64>::product_state(&vec![0u8; 6]);
    let config = TdvpConfig { max_bond: 64, krylov_bond: 16, ..TdvpConfig::default() };
    let trajectory = evolve_segments(&init, &segments, &config).unwrap();

    let mut checks = Vec::new();
    let worst_norm = trajectory
        .steps
        .iter()
        .map(|s| (s.norm - 1.0).abs())
        .fold(0.0f64, f64::max);
    checks.push(check(
        "norm drift",
        worst_norm < C7_NORM_DRIFT,
        format!("{worst_norm:.2e} over 200 steps"),
    ));
    let e0 = trajectory.steps[5].energy; // after the initial bond growth
    let e1 = trajectory.steps.last().unwrap().energy;
    let drift = (e1 - e0).abs() / e0.abs().max(1.0);
    checks.push(check(
        "energy drift",
        drift < C7_ENERGY_DRIFT_REL,
        format!("rel {drift:.2e} on a time-independent segment"),
    ));

    // Trotter consistency on the reduced benchmark: halving segment durations
    // moves the final coupling by less than the 5000-shot statistical error.
    let p = reduced_pipeline();
    let dg = (p.gbar_doubled - p.gbar_tdvp).abs();
    checks.push(check(
        "step doubling",
        dg < p.shots_sigma,
        format!("|Δgbar| = {dg:.2e} vs shot σ {:.2e}", p.shots_sigma),
    ));
    conclude("7 (TDVP integrity)", checks);
}

// ---------------------------------------------------------------------------
// criterion 8: shot statistics
// ---------------------------------------------------------------------------

#[test]
fn c08_shot_statistics() {
    let geom = LatticeGeometry::unit(2, 2).unwrap();
    let map = staggered_map(&geom);
    let run = dmrg_vacuum(2, 2, 8);
    let (exact, _, g_exact) = exact_reference(2, 2);
    let _ = exact;
    let gbar_exact = renormalized_coupling(&g_exact).unwrap().gbar;

    // Estimator error scaling: slope of log‖Ĝ−G‖∞ vs log n.
    let ns = [100usize, 1_000, 10_000, 100_000];
    let repeats = 24;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let mut mean_err = 0.0;
        for r in 0..repeats {
            let seed = 1000 + (i * repeats + r) as u64;
            let spin_shots = run.state.sample_shots(n, seed).unwrap();
            let occ_shots: Vec<Vec<u8>> =
                spin_shots.iter().map(|s| map.occupation_bits(s)).collect();
            let g_hat = shot_estimator(&occ_shots, &geom, seed).unwrap();
            let err = g_hat
                .matrix()
                .iter()
                .zip(g_exact.matrix().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            mean_err += err;
        }
        xs.push((n as f64).ln());
        ys.push((mean_err / repeats as f64).ln());
    }
    let slope = {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    };

    // Bootstrap coverage over synthetic experiments.
    let n_experiments = 500;
    let shots_per_experiment = 400;
    let mut covered = 0;
    for k in 0..n_experiments {
        let seed = 50_000 + k as u64;
        let spin_shots = run.state.sample_shots(shots_per_experiment, seed).unwrap();
        let occ_shots: Vec<Vec<u8>> = spin_shots.iter().map(|s| map.occupation_bits(s)).collect();
        match bootstrap_coupling(&occ_shots, &geom, 250, seed) {
            Ok((c, _)) => {
                if (c.gbar - gbar_exact).abs() <= c.stat_error.unwrap_or(0.0) {
                    covered += 1;
                }
            }
            Err(Error::DegenerateSpectrum(_)) => {}
            Err(e) => panic!("unexpected bootstrap error: {e}"),
        }
    }
    let coverage = covered as f64 / n_experiments as f64;

    let checks = vec![
        check(
            "error scaling slope",
            (slope - C8_SLOPE).abs() < C8_SLOPE_TOL,
            format!("{slope:.3} vs −0.5 ± {C8_SLOPE_TOL}"),
        ),
        check(
            "bootstrap coverage",
            (coverage - C8_COVERAGE).abs() < C8_COVERAGE_TOL,
            format!("{coverage:.3} over {n_experiments} experiments"),
        ),
    ];
    conclude("8 (shot statistics)", checks);
}

// ---------------------------------------------------------------------------
// criterion 9: Monte Carlo
// ---------------------------------------------------------------------------

#[test]
fn c09_monte_carlo() {
    use dtheory::mc::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    let mut checks = Vec::new();
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let tau = integrated_autocorrelation(v);
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
        (m, (var * 2.0 * tau / v.len() as f64).sqrt())
    };
    for beta in [0.5, 1.0, 1.5] {
        let mut rng = ChaCha12Rng::seed_from_u64(100 + (beta * 10.0) as u64);
        let mut wf = SpinField::aligned(8, 8, beta);
        wolff_updates(&mut wf, &mut rng, 4000);
        let mut we = Vec::new();
        for _ in 0..4000 {
            wolff_updates(&mut wf, &mut rng, 12);
            we.push(wf.energy());
        }
        let mut mf = SpinField::aligned(8, 8, beta);
        for _ in 0..600 {
            metropolis_sweep(&mut mf, &mut rng, 0.8);
        }
        let mut me = Vec::new();
        for _ in 0..8000 {
            metropolis_sweep(&mut mf, &mut rng, 0.8);
            me.push(mf.energy());
        }
        let (mw, ew) = stats(&we);
        let (mm, em) = stats(&me);
        let sigma = (ew * ew + em * em).sqrt();
        checks.push(check(
            format!("Wolff vs Metropolis β={beta}"),
            (mw - mm).abs() < C9_SIGMA * sigma,
            format!("{mw:.3}±{ew:.3} vs {mm:.3}±{em:.3}"),
        ));
    }

    // Deep infrared: massive regime, F → 1.
    let config = McConfig {
        lt_over_lx: 8,
        n_therm: 100,
        n_measurements: 2500,
        sweeps_per_measurement: 1,
        n_blocks: 10,
        seed: 31,
        ..McConfig::default()
    };
    let point = mc_step_scaling(2.0, 12, (4, 3), &config).unwrap();
    checks.push(check(
        "deep-IR F → 1",
        (point.f - 1.0).abs() < 0.15 && point.f < 4.0 / 3.0 - 0.05,
        format!("F = {:.3} ± {:.3} at z = {:.3}", point.f, point.f_err.unwrap_or(0.0), point.z),
    ));
    conclude("9 (Monte Carlo)", checks);
}

// ---------------------------------------------------------------------------
// criterion 10: CLI determinism
// ---------------------------------------------------------------------------

#[test]
fn c10_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_dtheory");
    let base = std::env::temp_dir().join(format!("dtheory-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);

    let mut checks = Vec::new();
    let run_twice = |name: &str, args: &[&str], files: &[&str], checks: &mut Vec<Check>| {
        let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
        for rep in 0..2 {
            let out = base.join(format!("{name}-{rep}"));
            let status = std::process::Command::new(bin)
                .args(args)
                .arg("--out")
                .arg(&out)
                .status()
                .expect("spawning the CLI");
            assert!(status.success(), "{name} run {rep} failed: {status:?}");
            outputs.push(
                files
                    .iter()
                    .map(|f| std::fs::read(out.join(f)).unwrap_or_else(|e| panic!("{f}: {e}")))
                    .collect(),
            );
        }
        for (i, f) in files.iter().enumerate() {
            checks.push(check(
                format!("{name}/{f}"),
                outputs[0][i] == outputs[1][i],
                "byte-identical across re-runs".to_string(),
            ));
        }
    };

    run_twice(
        "perturbative",
        &["run", "perturbative", "--z-sweep", "0.05:0.6:12"],
        &["perturbative.csv"],
        &mut checks,
    );
    run_twice(
        "mc-reference",
        &[
            "run",
            "mc-reference",
            "--g-sweep",
            "1.5:1.5:1",
            "--pair",
            "3:4",
            "--measurements",
            "600",
            "--blocks",
            "8",
            "--seed",
            "5",
        ],
        &["mc_reference.csv"],
        &mut checks,
    );
    run_twice(
        "step-scale",
        &[
            "run",
            "step-scale",
            "--model",
            "nn",
            "--pair",
            "3:4",
            "--ly",
            "2",
            "--sweep",
            "1.0:1.0:1",
            "--bond",
            "32",
            "--seed",
            "9",
        ],
        &["step_scale.csv"],
        &mut checks,
    );

    let _ = std::fs::remove_dir_all(&base);
    conclude("10 (CLI determinism)", checks);
}
