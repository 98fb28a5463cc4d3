//! Shared CLI plumbing: sweep parsing, deterministic CSV emission with
//! embedded configs, and output-directory handling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Inclusive linear sweep `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Sweep {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.n <= 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64)
            .collect()
    }
}

impl std::str::FromStr for Sweep {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            bail!("sweep must be lo:hi:n, got `{s}`");
        }
        let lo: f64 = parts[0].parse().context("bad sweep lower bound")?;
        let hi: f64 = parts[1].parse().context("bad sweep upper bound")?;
        let n: usize = parts[2].parse().context("bad sweep count")?;
        if n == 0 {
            bail!("sweep needs at least one point");
        }
        Ok(Sweep { lo, hi, n })
    }
}

/// `lx:sLx` lattice pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct LatticePair {
    pub lx: usize,
    pub slx: usize,
}

impl LatticePair {
    /// Reduced step factor `(num, den)` with `slx/lx = num/den`.
    pub fn step_factor(&self) -> Result<(u32, u32)> {
        if self.lx < 2 || self.slx <= self.lx {
            bail!("lattice pair must satisfy 2 ≤ Lx < sLx, got {}:{}", self.lx, self.slx);
        }
        let g = gcd(self.slx, self.lx);
        Ok(((self.slx / g) as u32, (self.lx / g) as u32))
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl std::str::FromStr for LatticePair {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(':').context("pair must be Lx:sLx")?;
        Ok(LatticePair { lx: a.parse().context("bad Lx")?, slx: b.parse().context("bad sLx")? })
    }
}

/// `LXxLY` geometry spec, e.g. `6x6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GeomSpec {
    pub lx: usize,
    pub ly: usize,
}

impl std::str::FromStr for GeomSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(['x', 'X']).context("geometry must be LXxLY, e.g. 6x6")?;
        Ok(GeomSpec { lx: a.parse().context("bad Lx")?, ly: b.parse().context("bad Ly")? })
    }
}

/// A CSV file whose header embeds the resolved config and seed, making
/// re-runs byte-comparable.
pub struct CsvOut {
    buf: String,
    path: PathBuf,
}

impl CsvOut {
    pub fn new<C: Serialize>(path: PathBuf, config: &C, seed: u64, columns: &str) -> Result<Self> {
        let mut buf = String::new();
        let config_json = serde_json::to_string(config)?;
        writeln!(buf, "# config: {config_json}")?;
        writeln!(buf, "# seed: {seed}")?;
        writeln!(buf, "{columns}")?;
        Ok(Self { buf, path })
    }

    pub fn row(&mut self, fields: &[String]) {
        self.buf.push_str(&fields.join(","));
        self.buf.push('\n');
    }

    pub fn finish(self) -> Result<PathBuf> {
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&self.path, self.buf.as_bytes())
            .with_context(|| format!("writing {}", self.path.display()))?;
        Ok(self.path)
    }
}

/// Shortest round-trip decimal formatting (deterministic across runs).
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(())
}

/// Checkpoint/cache directory, from `DTHEORY_CACHE` when set.
pub fn cache_dir() -> Option<PathBuf> {
    std::env::var_os("DTHEORY_CACHE").map(PathBuf::from)
}
