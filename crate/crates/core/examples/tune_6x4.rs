use std::time::Instant;
use dtheory::groundstate::{dmrg_ground, neel_state, DmrgConfig};
use dtheory::model::{build_nn_heisenberg, LatticeGeometry};
use dtheory::observables::{correlation_matrix, reduce_zz_to_correlation, renormalized_coupling, Picture};
use dtheory::oracle::{self, SectorPolicy};
use dtheory::tensor::MatrixProductOperator;

fn main() {
    let geom = LatticeGeometry::unit(6, 4).unwrap();
    let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
    let t0 = Instant::now();
    let (exact, e0) = oracle::exact_ground_state(&terms, SectorPolicy::Auto).unwrap();
    eprintln!("ED: E0 = {e0:.12} in {:.1?}", t0.elapsed());
    let zz = oracle::zz_matrix(&exact, 24);
    let g_exact = reduce_zz_to_correlation(&zz, &geom, Picture::Spin);
    let gb_exact = renormalized_coupling(&g_exact).unwrap().gbar;

    for (chi, local_tol, energy_tol) in [(384usize, 1e-12, 1e-12), (512, 1e-12, 1e-12), (640, 1e-12, 1e-12)] {
        let t1 = Instant::now();
        let config = DmrgConfig {
            bond_schedule: vec![32, 64, 128, 256, chi],
            max_sweeps: 20,
            trunc_tol: 1e-13,
            energy_tol,
            local_tol,
            local_max_iter: 40,
            ..DmrgConfig::default()
        };
        let mpo = MatrixProductOperator::from_terms(&terms, config.mpo_tol).unwrap();
        let run = dmrg_ground(&mpo, &config, &neel_state(&geom)).unwrap();
        let t_dmrg = t1.elapsed();
        let t2 = Instant::now();
        let g = correlation_matrix(&run.state, &geom, Picture::Spin).unwrap();
        let t_corr = t2.elapsed();
        let scale = g_exact.matrix().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let gerr = g.matrix().iter().zip(g_exact.matrix().iter()).map(|(a, b)| (a - b).abs() / scale).fold(0.0f64, f64::max);
        let gb = renormalized_coupling(&g).unwrap().gbar;
        eprintln!(
            "chi {chi} ltol {local_tol:.0e}: w={} E err {:.2e} | G err {gerr:.2e} | gbar err {:.2e} | disc {:.2e} | sweeps {} | dmrg {t_dmrg:.1?} corr {t_corr:.1?}",
            mpo.max_bond(),
            (run.energy - e0).abs() / e0.abs(),
            (gb - gb_exact).abs() / gb_exact,
            run.sweeps.last().unwrap().discarded,
            run.sweeps.len(),
        );
    }
}
