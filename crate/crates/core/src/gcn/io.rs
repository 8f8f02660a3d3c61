//! `GCNP` parameter file: `"GCNP"`, u32 version, u32 C, u32 H, u32 F, then
//! W0 (C x H) and W1 (H x F) row-major as little-endian f32.

use std::io::{self, Read, Write};

use ndarray::Array2;

use super::{GcnError, GcnParams};
use crate::binio::{read_f32s, read_u32, to_u32, write_f32s, write_u32};

pub const GCNP_MAGIC: &[u8; 4] = b"GCNP";
pub const GCNP_VERSION: u32 = 1;

pub fn write_gcnp<W: Write>(p: &GcnParams, sink: &mut W) -> Result<(), GcnError> {
    sink.write_all(GCNP_MAGIC)?;
    write_u32(sink, GCNP_VERSION)?;
    write_u32(sink, to_u32(p.input_dim())?)?;
    write_u32(sink, to_u32(p.hidden_dim())?)?;
    write_u32(sink, to_u32(p.output_dim())?)?;
    write_f32s(sink, p.w0.iter().map(|&v| v as f32))?;
    write_f32s(sink, p.w1.iter().map(|&v| v as f32))?;
    Ok(())
}

pub fn read_gcnp<R: Read>(source: &mut R) -> Result<GcnParams, GcnError> {
    read_inner(source).map_err(|e| match e {
        GcnError::Io(io) if io.kind() == io::ErrorKind::UnexpectedEof => GcnError::TruncatedFile,
        other => other,
    })
}

fn read_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Array2<f64>, GcnError> {
    let data: Vec<f64> = read_f32s(r, rows * cols)?.into_iter().map(f64::from).collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| GcnError::ShapeMismatch(e.to_string()))
}

fn read_inner<R: Read>(r: &mut R) -> Result<GcnParams, GcnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != GCNP_MAGIC {
        return Err(GcnError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != GCNP_VERSION {
        return Err(GcnError::BadVersion(version));
    }
    let c = read_u32(r)? as usize;
    let h = read_u32(r)? as usize;
    let f = read_u32(r)? as usize;
    let w0 = read_matrix(r, c, h)?;
    let w1 = read_matrix(r, h, f)?;
    GcnParams::new(w0, w1)
}
