use ndarray::{concatenate, Array2, Axis};

use super::FusionError;
use crate::embedio::AlignmentMask;

/// Place word-level rows at the subword positions whose mask bit is 1,
/// in order; every other row is zero.
pub fn align_global(gcn_feats: &Array2<f64>, mask: &AlignmentMask) -> Result<Array2<f64>, FusionError> {
    let words = mask.word_count();
    if gcn_feats.nrows() != words {
        return Err(FusionError::MaskSumMismatch {
            rows: gcn_feats.nrows(),
            mask_sum: words,
        });
    }
    let mut out = Array2::zeros((mask.len(), gcn_feats.ncols()));
    for (word, pos) in mask.word_positions().enumerate() {
        out.row_mut(pos).assign(&gcn_feats.row(word));
    }
    Ok(out)
}

/// Inverse of [`align_global`]: gather the masked rows back to word order.
/// Used to route gradients from subword positions to GCN nodes.
pub fn gather_words(aligned: &Array2<f64>, mask: &AlignmentMask) -> Array2<f64> {
    let mut out = Array2::zeros((mask.word_count(), aligned.ncols()));
    for (word, pos) in mask.word_positions().enumerate() {
        out.row_mut(word).assign(&aligned.row(pos));
    }
    out
}

/// Row-wise concatenation, global block first.
pub fn fuse(global_aligned: &Array2<f64>, contextual: &Array2<f64>) -> Result<Array2<f64>, FusionError> {
    if global_aligned.nrows() != contextual.nrows() {
        return Err(FusionError::ShapeMismatch(format!(
            "global block has {} rows, contextual block has {}",
            global_aligned.nrows(),
            contextual.nrows()
        )));
    }
    concatenate(Axis(1), &[global_aligned.view(), contextual.view()])
        .map_err(|e| FusionError::ShapeMismatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn mask(bits: &[u8]) -> AlignmentMask {
        AlignmentMask::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn places_rows_at_word_starts() {
        let out = align_global(&array![[1.0, 2.0], [3.0, 4.0]], &mask(&[1, 0, 1])).unwrap();
        assert_eq!(out, array![[1.0, 2.0], [0.0, 0.0], [3.0, 4.0]]);
        assert_eq!(gather_words(&out, &mask(&[1, 0, 1])), array![[1.0, 2.0], [3.0, 4.0]]);
    }

    #[test]
    fn all_ones_mask_is_identity() {
        let feats = array![[1.0], [2.0], [3.0]];
        assert_eq!(align_global(&feats, &AlignmentMask::all_ones(3)).unwrap(), feats);
    }

    #[test]
    fn row_count_must_match_mask_sum() {
        let feats = Array2::zeros((3, 2));
        assert!(matches!(
            align_global(&feats, &mask(&[1, 0, 1])),
            Err(FusionError::MaskSumMismatch { rows: 3, mask_sum: 2 })
        ));
    }

    #[test]
    fn conservation() {
        let feats = array![[1.0, -1.0], [2.0, 5.0], [0.5, 0.5]];
        let m = mask(&[0, 1, 0, 0, 1, 1, 0]);
        let out = align_global(&feats, &m).unwrap();
        for (pos, &bit) in m.bits().iter().enumerate() {
            if bit == 0 {
                assert!(out.row(pos).iter().all(|&v| v == 0.0));
            }
        }
        assert_eq!(
            out.rows().into_iter().filter(|r| r.iter().any(|&v| v != 0.0)).count(),
            3
        );
    }

    #[test]
    fn fuse_concatenates_global_first() {
        let g = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let c = Array2::from_elem((3, 3), 9.0);
        let f = fuse(&g, &c).unwrap();
        assert_eq!(f.ncols(), 5);
        assert_eq!(f.row(1).to_vec(), vec![3.0, 4.0, 9.0, 9.0, 9.0]);

        let zero = fuse(&Array2::zeros((3, 2)), &c).unwrap();
        assert!(zero.slice(ndarray::s![.., ..2]).iter().all(|&v| v == 0.0));
        assert_eq!(zero.slice(ndarray::s![.., 2..]), c);

        assert!(matches!(
            fuse(&g, &Array2::zeros((2, 3))),
            Err(FusionError::ShapeMismatch(_))
        ));
        assert_eq!(
            fuse(&Array2::zeros((4, 128)), &Array2::zeros((4, 768)))
                .unwrap()
                .ncols(),
            896
        );
    }
}
