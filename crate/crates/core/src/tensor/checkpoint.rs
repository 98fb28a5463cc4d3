//! Self-describing binary container for MPS checkpoints.
//!
//! Byte layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MPSC"
//! 4       4     format version (u32) = 1
//! 8       1     scalar kind: 0 = f64, 1 = complex f64
//! 9       4     lattice Lx (u32)
//! 13      4     lattice Ly (u32)
//! 17      8     lattice ax (f64)
//! 25      8     lattice ay (f64)
//! 33      4     number of sites (u32)
//! 37      4     orthogonality center (u32)
//! 41      4     truncation-log length n (u32)
//! 45      8n    truncation-log entries (f64 each)
//! ...     12/site  per-site dims: dl, d, dr (u32 each)
//! ...     —     tensor payload, site by site, C order (dl, d, dr),
//!               8 bytes per value (16 for complex: re then im)
//! ```

use std::io::{Read, Write};

use ndarray::Array3;

use super::mps::MatrixProductState;
use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::model::LatticeGeometry;

const MAGIC: &[u8; 4] = b"MPSC";
const VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(
    mut out: W,
    state: &MatrixProductState<T>,
    geom: &LatticeGeometry,
) -> Result<()> {
    if geom.n_sites() != state.n_sites() {
        return Err(Error::Shape("geometry and state site counts differ".into()));
    }
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[T::IS_COMPLEX as u8])?;
    out.write_all(&(geom.lx() as u32).to_le_bytes())?;
    out.write_all(&(geom.ly() as u32).to_le_bytes())?;
    out.write_all(&geom.ax().to_le_bytes())?;
    out.write_all(&geom.ay().to_le_bytes())?;
    out.write_all(&(state.n_sites() as u32).to_le_bytes())?;
    out.write_all(&(state.center() as u32).to_le_bytes())?;
    out.write_all(&1u32.to_le_bytes())?;
    out.write_all(&state.truncation_error().to_le_bytes())?;
    for i in 0..state.n_sites() {
        let (dl, d, dr) = state.tensor(i).dim();
        for v in [dl, d, dr] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
    }
    for i in 0..state.n_sites() {
        let t = state.tensor(i);
        for v in t.iter() {
            out.write_all(&v.re().to_le_bytes())?;
            if T::IS_COMPLEX {
                out.write_all(&v.im().to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(
    mut input: R,
) -> Result<(MatrixProductState<T>, LatticeGeometry)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Config("not an MPS checkpoint (bad magic)".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Config(format!("unsupported checkpoint version {version}")));
    }
    let mut kind = [0u8; 1];
    input.read_exact(&mut kind)?;
    if (kind[0] != 0) != T::IS_COMPLEX {
        return Err(Error::Config("checkpoint scalar kind does not match request".into()));
    }
    let lx = read_u32(&mut input)? as usize;
    let ly = read_u32(&mut input)? as usize;
    let ax = read_f64(&mut input)?;
    let ay = read_f64(&mut input)?;
    let geom = LatticeGeometry::new(lx, ly, ax, ay)?;
    let n_sites = read_u32(&mut input)? as usize;
    if n_sites != geom.n_sites() {
        return Err(Error::Config("checkpoint site count disagrees with geometry".into()));
    }
    let center = read_u32(&mut input)? as usize;
    let n_log = read_u32(&mut input)? as usize;
    let mut trunc = 0.0;
    for _ in 0..n_log {
        trunc = 1.0 - (1.0 - trunc) * (1.0 - read_f64(&mut input)?);
    }
    let mut dims = Vec::with_capacity(n_sites);
    for _ in 0..n_sites {
        let dl = read_u32(&mut input)? as usize;
        let d = read_u32(&mut input)? as usize;
        let dr = read_u32(&mut input)? as usize;
        if d != 2 {
            return Err(Error::Config(format!("unsupported physical dimension {d}")));
        }
        dims.push((dl, d, dr));
    }
    let mut tensors = Vec::with_capacity(n_sites);
    for &(dl, d, dr) in &dims {
        let mut data = Vec::with_capacity(dl * d * dr);
        for _ in 0..dl * d * dr {
            let re = read_f64(&mut input)?;
            let im = if T::IS_COMPLEX { read_f64(&mut input)? } else { 0.0 };
            data.push(T::from_parts(re, im));
        }
        tensors.push(
            Array3::from_shape_vec((dl, d, dr), data)
                .map_err(|e| Error::Config(format!("corrupt tensor payload: {e}")))?,
        );
    }
    if center >= n_sites {
        return Err(Error::Config("orthogonality center out of range".into()));
    }
    let mut state = MatrixProductState::assemble(tensors, center, trunc)?;
    // Trust but verify: canonical-form metadata must match the payload.
    if state.isometry_residual() > 1e-8 {
        return Err(Error::Config("checkpoint payload is not in canonical form".into()));
    }
    state.normalize();
    Ok((state, geom))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
