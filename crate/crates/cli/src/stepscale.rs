//! `run step-scale`: step-scaling curves from DMRG vacua over an anisotropy
//! sweep, for the nearest-neighbor and `1/r⁶` models.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dtheory::groundstate::{dmrg_ground, neel_state, DmrgConfig};
use dtheory::model::{build_d6_heisenberg, build_nn_heisenberg, LatticeGeometry, TermList};
use dtheory::observables::{
    correlation_matrix, renormalized_coupling, step_scaling, BarePoint, Picture, StepScalingPoint,
};
use dtheory::tensor::MatrixProductOperator;

use crate::common::{ensure_out_dir, fmt, fmt_opt, CsvOut, LatticePair, Sweep};
use crate::plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Nearest-neighbor Heisenberg; the sweep parameter is `Jx/Jy`.
    Nn,
    /// All-pairs `1/r⁶` staggered Heisenberg; the sweep parameter is `(ay/ax)⁶`.
    D6,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepScaleConfig {
    pub model: Model,
    pub pair: LatticePair,
    pub ly: usize,
    pub sweep: Sweep,
    pub max_bond: usize,
    pub trunc_tol: f64,
    pub mpo_tol: f64,
    pub energy_tol: f64,
    pub max_sweeps: usize,
    pub seed: u64,
    /// Output directory; not part of the experiment identity.
    #[serde(skip_serializing, default)]
    pub out: PathBuf,
}

pub const CSV_COLUMNS: &str = "s,lx,ly,anisotropy,z,z_err,f,f_err,source,seed,converged";

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub point: Option<StepScalingPoint>,
    pub anisotropy: f64,
    pub converged: bool,
    pub note: String,
}

fn model_terms(model: Model, geom_ly: (usize, usize), anisotropy: f64) -> Result<TermList> {
    let (lx, ly) = geom_ly;
    Ok(match model {
        Model::Nn => {
            let geom = LatticeGeometry::unit(lx, ly)?;
            build_nn_heisenberg(&geom, anisotropy, 1.0)
        }
        Model::D6 => {
            // (ay/ax)^6 = anisotropy with ax = 1.
            if !(anisotropy > 0.0) {
                bail!("anisotropy must be positive for the 1/r⁶ model");
            }
            let ay = anisotropy.powf(1.0 / 6.0);
            let geom = LatticeGeometry::new(lx, ly, 1.0, ay)?;
            build_d6_heisenberg(&geom)
        }
    })
}

fn coupling_for(
    model: Model,
    lx: usize,
    ly: usize,
    anisotropy: f64,
    dmrg: &DmrgConfig,
) -> Result<(dtheory::observables::CouplingResult, bool)> {
    let terms = model_terms(model, (lx, ly), anisotropy)?;
    let geom = *terms.geometry();
    let mpo = MatrixProductOperator::from_terms(&terms, dmrg.mpo_tol)?;
    let run = dmrg_ground(&mpo, dmrg, &neel_state(&geom))?;
    let g = correlation_matrix(&run.state, &geom, Picture::Spin)?;
    Ok((renormalized_coupling(&g)?, run.converged))
}

pub fn run(config: &StepScaleConfig, workers: usize) -> Result<Vec<SweepOutcome>> {
    ensure_out_dir(&config.out)?;
    let (s_num, s_den) = config.pair.step_factor()?;
    let dmrg = DmrgConfig {
        trunc_tol: config.trunc_tol,
        mpo_tol: config.mpo_tol,
        energy_tol: config.energy_tol,
        max_sweeps: config.max_sweeps,
        ..DmrgConfig::default()
    }
    .with_max_bond(config.max_bond);

    let values = config.sweep.values();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;
    let model = config.model;
    let (lx, slx, ly) = (config.pair.lx, config.pair.slx, config.ly);
    let mut outcomes: Vec<(usize, SweepOutcome)> = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(idx, &aniso)| {
                let outcome = (|| -> Result<SweepOutcome> {
                    let (small, conv_a) = coupling_for(model, lx, ly, aniso, &dmrg)?;
                    let (large, conv_b) = coupling_for(model, slx, ly, aniso, &dmrg)?;
                    let bare = BarePoint {
                        model: match model {
                            Model::Nn => "nn".into(),
                            Model::D6 => "d6".into(),
                        },
                        ly,
                        anisotropy: aniso,
                    };
                    let point = step_scaling(&small, &large, (s_num, s_den), &bare, &bare)?;
                    Ok(SweepOutcome {
                        point: Some(point),
                        anisotropy: aniso,
                        converged: conv_a && conv_b,
                        note: String::new(),
                    })
                })();
                let outcome = outcome.unwrap_or_else(|e| SweepOutcome {
                    point: None,
                    anisotropy: aniso,
                    converged: false,
                    note: e.to_string(),
                });
                (idx, outcome)
            })
            .collect()
    });
    // Deterministic merge by sweep index.
    outcomes.sort_by_key(|(idx, _)| *idx);
    let outcomes: Vec<SweepOutcome> = outcomes.into_iter().map(|(_, o)| o).collect();

    let mut csv = CsvOut::new(config.out.join("step_scale.csv"), config, config.seed, CSV_COLUMNS)?;
    for o in &outcomes {
        match &o.point {
            Some(p) => csv.row(&[
                fmt(p.s()),
                p.lx.to_string(),
                p.ly.to_string(),
                fmt(p.anisotropy),
                fmt(p.z),
                fmt_opt(p.z_err),
                fmt(p.f),
                fmt_opt(p.f_err),
                p.model.clone(),
                config.seed.to_string(),
                o.converged.to_string(),
            ]),
            None => csv.row(&[
                fmt(s_num as f64 / s_den as f64),
                lx.to_string(),
                ly.to_string(),
                fmt(o.anisotropy),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("failed: {}", o.note.replace(',', ";")),
                config.seed.to_string(),
                "false".to_string(),
            ]),
        }
    }
    let path = csv.finish()?;
    eprintln!("wrote {}", path.display());

    let plotted: Vec<&StepScalingPoint> = outcomes
        .iter()
        .filter(|o| o.converged)
        .filter_map(|o| o.point.as_ref())
        .collect();
    let s_val = s_num as f64 / s_den as f64;
    plot::step_scaling_svg(&config.out.join("step_scale.svg"), &plotted, s_val)?;
    for o in &outcomes {
        if !o.converged {
            eprintln!(
                "warning: sweep point anisotropy={} not converged{}; excluded from the plot",
                o.anisotropy,
                if o.note.is_empty() { String::new() } else { format!(" ({})", o.note) }
            );
        }
    }
    Ok(outcomes)
}
