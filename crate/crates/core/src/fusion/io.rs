//! `FUSE` model file: `"FUSE"`, u32 version, u32 F_g, u32 ctx_dim, u32 T,
//! then W_out ((F_g + ctx_dim) x T) and b (T) as little-endian f32,
//! followed by a `GCNP` block when F_g > 0.
//!
//! The mode is implied by the widths. A GCNP block whose output width is
//! zero holds a first-layer tap; its hidden width is then F_g.

use std::io::{self, Read, Write};

use ndarray::{Array1, Array2};

use super::{FusionError, JointModel, JointParams, Mode};
use crate::binio::{at_eof, read_f32s, read_u32, to_u32, write_f32s, write_u32};
use crate::gcn::{read_gcnp, write_gcnp, GcnError, GcnTap};

pub const FUSE_MAGIC: &[u8; 4] = b"FUSE";
pub const FUSE_VERSION: u32 = 1;

pub fn write_fuse<W: Write>(m: &JointModel, sink: &mut W) -> Result<(), FusionError> {
    sink.write_all(FUSE_MAGIC)?;
    write_u32(sink, FUSE_VERSION)?;
    write_u32(sink, to_u32(m.global_dim())?)?;
    write_u32(sink, to_u32(m.ctx_dim())?)?;
    write_u32(sink, to_u32(m.classes())?)?;
    write_f32s(sink, m.head.w_out.iter().map(|&v| v as f32))?;
    write_f32s(sink, m.head.b.iter().map(|&v| v as f32))?;
    if let Some(gcn) = m.gcn() {
        write_gcnp(gcn, sink)?;
    }
    Ok(())
}

pub fn read_fuse<R: Read>(source: &mut R) -> Result<JointModel, FusionError> {
    read_inner(source).map_err(|e| match e {
        FusionError::Io(io) if io.kind() == io::ErrorKind::UnexpectedEof => FusionError::TruncatedFile,
        FusionError::Gcn(GcnError::TruncatedFile) => FusionError::TruncatedFile,
        other => other,
    })
}

fn read_inner<R: Read>(r: &mut R) -> Result<JointModel, FusionError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FUSE_MAGIC {
        return Err(FusionError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != FUSE_VERSION {
        return Err(FusionError::BadVersion(version));
    }
    let global_dim = read_u32(r)? as usize;
    let ctx_dim = read_u32(r)? as usize;
    let classes = read_u32(r)? as usize;
    let mode = match (global_dim, ctx_dim) {
        (0, 0) => return Err(FusionError::ShapeMismatch("model has no input features".into())),
        (0, _) => Mode::ContextualOnly,
        (_, 0) => Mode::GlobalOnly,
        _ => Mode::Joint,
    };
    let k = global_dim + ctx_dim;
    let w: Vec<f64> = read_f32s(r, k * classes)?.into_iter().map(f64::from).collect();
    let w_out = Array2::from_shape_vec((k, classes), w).map_err(|e| FusionError::ShapeMismatch(e.to_string()))?;
    let b = Array1::from(read_f32s(r, classes)?.into_iter().map(f64::from).collect::<Vec<_>>());
    let head = JointParams::new(w_out, b)?;

    let (gcn, tap) = if global_dim > 0 {
        let gcn = read_gcnp(r)?;
        let tap = if gcn.output_dim() == 0 {
            GcnTap::Layer1
        } else {
            GcnTap::Layer2
        };
        if gcn.feature_dim(tap) != global_dim {
            return Err(FusionError::ShapeMismatch(format!(
                "header says {global_dim} global features, GCN block gives {}",
                gcn.feature_dim(tap)
            )));
        }
        (Some(gcn), tap)
    } else {
        (None, GcnTap::Layer2)
    };
    if !at_eof(r)? {
        return Err(FusionError::ShapeMismatch("unexpected bytes after the model".into()));
    }
    JointModel::new(mode, tap, gcn, head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn round_trip(m: &JointModel) -> (Vec<u8>, JointModel) {
        let mut bytes = Vec::new();
        write_fuse(m, &mut bytes).unwrap();
        let back = read_fuse(&mut bytes.as_slice()).unwrap();
        (bytes, back)
    }

    #[test]
    fn every_mode_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for mode in Mode::ALL {
            for tap in [GcnTap::Layer1, GcnTap::Layer2] {
                let m = JointModel::init(mode, tap, 5, 4, 3, 6, 9, &mut rng).unwrap();
                let (bytes, back) = round_trip(&m);
                assert_eq!(back.mode(), mode);
                assert_eq!(back.global_dim(), m.global_dim());
                assert_eq!(back.ctx_dim(), m.ctx_dim());
                if mode.uses_global() {
                    assert_eq!(back.tap(), tap);
                }
                for (a, b) in back.head.w_out.iter().zip(&m.head.w_out) {
                    assert_eq!(*a, *b as f32 as f64);
                }
                let (again, _) = round_trip(&back);
                assert_eq!(again, bytes);
            }
        }
    }

    #[test]
    fn header_layout() {
        let m = JointModel::new(Mode::ContextualOnly, GcnTap::Layer2, None, JointParams::zeros(4, 9)).unwrap();
        let (bytes, _) = round_trip(&m);
        assert_eq!(&bytes[..4], b"FUSE");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 0);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 9);
        assert_eq!(bytes.len(), 20 + 4 * (36 + 9));
    }

    #[test]
    fn rejects_damage() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = JointModel::init(Mode::Joint, GcnTap::Layer2, 3, 2, 2, 2, 3, &mut rng).unwrap();
        let (bytes, _) = round_trip(&m);
        let mut bad = bytes.clone();
        bad[1] = b'x';
        assert!(matches!(read_fuse(&mut bad.as_slice()), Err(FusionError::BadMagic)));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            read_fuse(&mut bad.as_slice()),
            Err(FusionError::BadVersion(2))
        ));
        for cut in [3, 10, 30, bytes.len() - 1] {
            assert!(
                matches!(read_fuse(&mut &bytes[..cut]), Err(FusionError::TruncatedFile)),
                "cut {cut}"
            );
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(read_fuse(&mut long.as_slice()).is_err());
    }
}
