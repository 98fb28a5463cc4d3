//! `run oracle-suite`: cross-implementation equivalence report between the
//! tensor-network stack and exact diagonalization.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use dtheory::groundstate::{dmrg_ground, energy_gap, neel_state, DmrgConfig};
use dtheory::model::{build_d6_heisenberg, build_nn_heisenberg, LatticeGeometry};
use dtheory::observables::{
    correlation_matrix, reduce_zz_to_correlation, renormalized_coupling, Picture,
};
use dtheory::oracle::{self, SectorPolicy};
use dtheory::tensor::MatrixProductOperator;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSuiteConfig {
    /// Include the slow 6x4 lattice.
    pub full: bool,
}

pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
}

fn report(outcomes: &mut Vec<CheckOutcome>, name: &str, passed: bool, detail: String) {
    println!("[{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    outcomes.push(CheckOutcome { name: name.into(), passed });
}

fn equivalence_check(
    outcomes: &mut Vec<CheckOutcome>,
    lx: usize,
    ly: usize,
    chi: usize,
    tol: f64,
) -> Result<()> {
    let geom = LatticeGeometry::unit(lx, ly)?;
    let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
    let (exact, e0) = oracle::exact_ground_state(&terms, SectorPolicy::Auto)?;
    let zz = oracle::zz_matrix(&exact, geom.n_sites());
    let g_exact = reduce_zz_to_correlation(&zz, &geom, Picture::Spin);
    let config = DmrgConfig {
        trunc_tol: 1e-13,
        energy_tol: 1e-12,
        local_tol: 1e-12,
        ..DmrgConfig::default()
    }
    .with_max_bond(chi);
    let mpo = MatrixProductOperator::from_terms(&terms, config.mpo_tol)?;
    let run = dmrg_ground(&mpo, &config, &neel_state(&geom))?;
    let e_rel = (run.energy - e0).abs() / e0.abs();
    let g_mps = correlation_matrix(&run.state, &geom, Picture::Spin)?;
    let scale = g_exact.matrix().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let g_err = g_mps
        .matrix()
        .iter()
        .zip(g_exact.matrix().iter())
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0f64, f64::max);
    let gb_rel = {
        let a = renormalized_coupling(&g_mps)?.gbar;
        let b = renormalized_coupling(&g_exact)?.gbar;
        (a - b).abs() / b
    };
    let passed = e_rel < tol && g_err < tol && gb_rel < tol && run.converged;
    report(
        outcomes,
        &format!("dmrg-vs-ed-{lx}x{ly}"),
        passed,
        format!("E0 rel {e_rel:.2e}, G rel {g_err:.2e}, gbar rel {gb_rel:.2e} (tol {tol:.0e})"),
    );
    Ok(())
}

pub fn run(config: &OracleSuiteConfig) -> Result<()> {
    let mut outcomes = Vec::new();

    equivalence_check(&mut outcomes, 2, 2, 8, 1e-8)?;
    equivalence_check(&mut outcomes, 4, 2, 32, 1e-8)?;
    equivalence_check(&mut outcomes, 4, 4, 256, 1e-8)?;
    if config.full {
        equivalence_check(&mut outcomes, 6, 4, 768, 1e-8)?;
    }

    // Gap against ED on 4x2.
    {
        let geom = LatticeGeometry::unit(4, 2)?;
        let terms = build_nn_heisenberg(&geom, 1.0, 1.0);
        let spec = oracle::exact_ground(&terms)?;
        let gap = energy_gap(&terms, &DmrgConfig::default().with_max_bond(32))?;
        let err = ((gap.e1 - gap.e0) - (spec.e1 - spec.e0)).abs();
        report(
            &mut outcomes,
            "gap-vs-ed-4x2",
            err < 1e-6,
            format!("gap err {err:.2e}"),
        );
    }

    // The 1/r⁶ model on 3x2 against ED.
    {
        let geom = LatticeGeometry::new(3, 2, 1.0, 0.9)?;
        let terms = build_d6_heisenberg(&geom);
        let spec = oracle::exact_ground(&terms)?;
        let config = DmrgConfig::default().with_max_bond(16);
        let mpo = MatrixProductOperator::from_terms(&terms, config.mpo_tol)?;
        let run = dmrg_ground(&mpo, &config, &neel_state(&geom))?;
        let err = (run.energy - spec.e0).abs() / spec.e0.abs();
        report(&mut outcomes, "d6-vs-ed-3x2", err < 1e-8, format!("E0 rel {err:.2e}"));
    }

    let failed: Vec<&CheckOutcome> = outcomes.iter().filter(|o| !o.passed).collect();
    println!(
        "oracle suite: {}/{} checks passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if !failed.is_empty() {
        bail!("oracle suite failed: {}", failed.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(", "));
    }
    Ok(())
}
