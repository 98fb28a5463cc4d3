//! `run perturbative`: tabulate the built-in two-loop reference curve.

use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use dtheory::observables::{perturbative_step_scaling, Loops};

use crate::common::{ensure_out_dir, fmt, CsvOut, Sweep};
use crate::plot;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbativeConfig {
    pub z_sweep: Sweep,
    /// Step factor as a real number (e.g. 1.3333333333333333 for 4/3).
    pub s: f64,
    pub loops: u8,
    /// Output directory; not part of the experiment identity.
    #[serde(skip_serializing, default)]
    pub out: PathBuf,
}

pub fn run(config: &PerturbativeConfig) -> Result<Vec<(f64, f64, bool)>> {
    ensure_out_dir(&config.out)?;
    let loops = match config.loops {
        1 => Loops::One,
        2 => Loops::Two,
        other => anyhow::bail!("loops must be 1 or 2, got {other}"),
    };
    let mut rows = Vec::new();
    for z in config.z_sweep.values() {
        let r = perturbative_step_scaling(z, config.s, loops)?;
        rows.push((z, r.f, r.out_of_window));
    }
    let mut csv = CsvOut::new(
        config.out.join("perturbative.csv"),
        config,
        0,
        "z,f,out_of_window",
    )?;
    for (z, f, warn) in &rows {
        csv.row(&[fmt(*z), fmt(*f), warn.to_string()]);
    }
    csv.finish()?;
    let series: Vec<(f64, f64)> = rows.iter().map(|(z, f, _)| (*z, *f)).collect();
    plot::curve_svg(
        &config.out.join("perturbative.svg"),
        "two-loop reference",
        "z",
        "F_s(z)",
        &series,
    )?;
    eprintln!("wrote {}", config.out.join("perturbative.csv").display());
    Ok(rows)
}
