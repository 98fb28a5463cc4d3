//! Property tests for structural invariants: serialization round trips,
//! gauge invariance, symmetry of generated Hamiltonians, coupling-scale
//! invariance, and drive-envelope monotonicity.

use proptest::prelude::*;

use dtheory::model::{
    build_d6_heisenberg, build_nn_heisenberg, staggered_map, LatticeGeometry, TermList,
};
use dtheory::observables::{renormalized_coupling, CorrelationMatrix};
use dtheory::oracle::{CompiledHamiltonian, SpinBasis};
use dtheory::spiral::{build_spiral, omega_d_default};
use dtheory::tensor::{mpo_from_terms, MatrixProductState};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

fn small_geometry() -> impl Strategy<Value = LatticeGeometry> {
    (1usize..=4, 1usize..=3, 0.5f64..2.0, 0.5f64..2.0)
        .prop_map(|(lx, ly, ax, ay)| LatticeGeometry::new(lx, ly, ax, ay).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn term_list_json_round_trips(geom in small_geometry(), jx in -2.0f64..2.0, jy in -2.0f64..2.0) {
        let terms = build_nn_heisenberg(&geom, jx, jy);
        let json = terms.to_json().unwrap();
        let back = TermList::from_json(&json).unwrap();
        prop_assert_eq!(&back, &terms);
        prop_assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn staggered_map_is_involutive(geom in small_geometry()) {
        let map = staggered_map(&geom);
        let terms = build_d6_heisenberg(&geom);
        if terms.is_empty() {
            return Ok(());
        }
        let occ = map.to_occupation_picture(&terms);
        let spin_again = map.to_spin_picture(&occ);
        // Same operator: compare matrix elements through the oracle (≤ 12 spins).
        if geom.n_sites() <= 10 {
            let basis = Arc::new(SpinBasis::full(geom.n_sites()));
            let a = CompiledHamiltonian::new(&terms, basis.clone()).unwrap().to_dense();
            let b = CompiledHamiltonian::new(&spin_again, basis).unwrap().to_dense();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn heisenberg_term_lists_commute_with_total_spin(
        geom in (2usize..=3, 2usize..=3).prop_map(|(lx, ly)| LatticeGeometry::unit(lx, ly).unwrap()),
        jx in 0.1f64..2.0,
        jy in 0.1f64..2.0,
    ) {
        // [H, S_tot^a] = 0 for every Heisenberg term list, checked as a
        // commutator norm on the dense forms.
        let terms = build_nn_heisenberg(&geom, jx, jy);
        let n = geom.n_sites();
        let basis = Arc::new(SpinBasis::full(n));
        let h = CompiledHamiltonian::new(&terms, basis.clone()).unwrap().to_dense();
        let dim = 1usize << n;
        // Total Sz and total Sx as dense matrices.
        let mut sz = Array2::<f64>::zeros((dim, dim));
        let mut sx = Array2::<f64>::zeros((dim, dim));
        for m in 0..dim {
            for i in 0..n {
                let bit = (m >> i) & 1;
                sz[[m, m]] += bit as f64 - 0.5;
                sx[[m ^ (1 << i), m]] += 0.5;
            }
        }
        for s in [sz, sx] {
            let comm = h.dot(&s) - s.dot(&h);
            let norm = comm.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm < 1e-10, "commutator norm {norm}");
        }
    }

    #[test]
    fn coupling_invariant_under_rescaling(scale in 0.01f64..100.0) {
        let base = ndarray::array![
            [5.0, 1.0, 0.2, 0.1],
            [1.0, 3.0, 0.4, 0.2],
            [0.2, 0.4, 2.0, 0.3],
            [0.1, 0.2, 0.3, 1.0]
        ];
        let a = renormalized_coupling(&CorrelationMatrix::exact(base.clone())).unwrap();
        let b = renormalized_coupling(&CorrelationMatrix::exact(base * scale)).unwrap();
        prop_assert!((a.gbar - b.gbar).abs() < 1e-10 * a.gbar);
    }

    #[test]
    fn gauge_moves_preserve_overlap(seed in 0u64..1000, target in 0usize..6) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut s = MatrixProductState::<f64>::random(6, 6, &mut rng);
        let reference = s.clone();
        s.move_center_to(target);
        let ov = s.overlap(&reference).unwrap().abs();
        prop_assert!((ov - 1.0).abs() < 1e-10);
        prop_assert!(s.isometry_residual() < 1e-10);
    }

    #[test]
    fn compression_never_increases_bond(seed in 0u64..1000, chi in 1usize..8) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let s = MatrixProductState::<f64>::random(7, 10, &mut rng);
        let (c, discarded) = s.compress(chi, 0.0);
        prop_assert!(c.max_bond() <= chi.max(1));
        prop_assert!((0.0..=1.0).contains(&discarded));
        prop_assert!((c.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn drive_envelope_monotone(h_p in 0.05f64..1.0, t_frac in 0.0f64..1.0) {
        let geom = LatticeGeometry::new(3, 3, 12.5, 11.0).unwrap();
        let s = build_spiral(&geom, 5.42e6, h_p, omega_d_default(), 3.83).unwrap();
        let t = 3.83 * t_frac;
        let eps = 1e-4;
        if t + eps <= 3.83 {
            let a = s.omega_at(t).unwrap();
            let b = s.omega_at(t + eps).unwrap();
            prop_assert!(b >= a - 1e-12);
        }
    }

    #[test]
    fn mpo_expectation_matches_oracle_on_random_products(
        seed in 0u64..500,
        jx in 0.2f64..1.5,
    ) {
        let geom = LatticeGeometry::unit(3, 2).unwrap();
        let terms = build_nn_heisenberg(&geom, jx, 1.0);
        let mpo = mpo_from_terms(&terms, 1e-12).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let bits: Vec<u8> = (0..6).map(|_| rng.random_range(0..2u8)).collect();
        let psi = MatrixProductState::<f64>::product_state(&bits);
        let e = dtheory::tensor::expectation(&psi, &mpo).unwrap();
        // Oracle route.
        let basis = Arc::new(SpinBasis::full(6));
        let h = CompiledHamiltonian::new(&terms, basis.clone()).unwrap();
        let mut mask = 0u64;
        for (i, &b) in bits.iter().enumerate() {
            mask |= (b as u64) << i;
        }
        let mut v = vec![0.0; 64];
        v[mask as usize] = 1.0;
        let mut hv = vec![0.0; 64];
        h.apply(&v, &mut hv);
        prop_assert!((e - hv[mask as usize]).abs() < 1e-10);
    }
}
