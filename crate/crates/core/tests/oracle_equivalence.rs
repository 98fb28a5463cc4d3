//! Cross-checks between the variational tensor-network stack and the exact
//! diagonalization reference on small lattices.

use std::time::Instant;

use dtheory::groundstate::{dmrg_ground, neel_state, DmrgConfig};
use dtheory::model::{build_nn_heisenberg, LatticeGeometry};
use dtheory::observables::{
    correlation_matrix, reduce_zz_to_correlation, renormalized_coupling, Picture,
};
use dtheory::oracle::{self, ExactState, SectorPolicy};
use dtheory::tensor::MatrixProductOperator;

fn check_lattice(lx: usize, ly: usize, chi: usize, tol: f64) {
    let t0 = Instant::now();
    let geom = LatticeGeometry::unit(lx, ly).unwrap();
    let terms = build_nn_heisenberg(&geom, 1.0, 1.0);

    let (exact, e0_exact) =
        oracle::exact_ground_state(&terms, SectorPolicy::Auto).expect("oracle ground state");
    let zz_exact = oracle::zz_matrix(&exact, geom.n_sites());
    let g_exact = reduce_zz_to_correlation(&zz_exact, &geom, Picture::Spin);

    let config = DmrgConfig::default().with_max_bond(chi);
    let mpo = MatrixProductOperator::from_terms(&terms, config.mpo_tol).unwrap();
    let run = dmrg_ground(&mpo, &config, &neel_state(&geom)).expect("DMRG run");
    assert!(run.converged, "{lx}x{ly}: DMRG did not converge");

    let e_rel = (run.energy - e0_exact).abs() / e0_exact.abs();
    assert!(e_rel < tol, "{lx}x{ly}: E0 relative error {e_rel:.3e}");

    let g_mps = correlation_matrix(&run.state, &geom, Picture::Spin).unwrap();
    let scale = g_exact.matrix().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut g_err = 0.0f64;
    for (a, b) in g_mps.matrix().iter().zip(g_exact.matrix().iter()) {
        g_err = g_err.max((a - b).abs() / scale);
    }
    assert!(g_err < tol, "{lx}x{ly}: correlation matrix relative error {g_err:.3e}");

    let c_mps = renormalized_coupling(&g_mps).unwrap();
    let c_exact = renormalized_coupling(&g_exact).unwrap();
    let c_rel = (c_mps.gbar - c_exact.gbar).abs() / c_exact.gbar;
    assert!(c_rel < tol, "{lx}x{ly}: coupling relative error {c_rel:.3e}");

    eprintln!(
        "{lx}x{ly}: E0 {:.12} (rel err {e_rel:.2e}), gbar {:.8} (rel err {c_rel:.2e}), G err {g_err:.2e}, {:.1?}",
        run.energy,
        c_mps.gbar,
        t0.elapsed()
    );
    let _ = ExactState::from_real(exact.basis.clone(), &exact.amps.iter().map(|a| a.re).collect::<Vec<_>>());
}

#[test]
fn dmrg_matches_ed_2x2() {
    check_lattice(2, 2, 8, 1e-8);
}

#[test]
fn dmrg_matches_ed_4x2() {
    check_lattice(4, 2, 32, 1e-8);
}

#[test]
fn dmrg_matches_ed_4x4() {
    check_lattice(4, 4, 256, 1e-8);
}

#[test]
#[ignore = "several minutes; exercised by the acceptance suite"]
fn dmrg_matches_ed_6x4() {
    check_lattice(6, 4, 512, 1e-8);
}
