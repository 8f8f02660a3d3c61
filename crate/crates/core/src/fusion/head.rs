use ndarray::{Array1, Array2};
use rand::Rng;

use super::FusionError;
use crate::embedio::AlignmentMask;
use crate::nn::{glorot_uniform, softmax_rows, Dropout};

/// Linear-softmax tagging head over fused vectors: `W_out` is K x T,
/// `b` has T entries.
#[derive(Debug, Clone, PartialEq)]
pub struct JointParams {
    pub w_out: Array2<f64>,
    pub b: Array1<f64>,
}

impl JointParams {
    pub fn new(w_out: Array2<f64>, b: Array1<f64>) -> Result<Self, FusionError> {
        if w_out.ncols() != b.len() {
            return Err(FusionError::ShapeMismatch(format!(
                "W_out has {} columns, b has {} entries",
                w_out.ncols(),
                b.len()
            )));
        }
        Ok(JointParams { w_out, b })
    }

    pub fn zeros(input_dim: usize, classes: usize) -> Self {
        JointParams {
            w_out: Array2::zeros((input_dim, classes)),
            b: Array1::zeros(classes),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng>(input_dim: usize, classes: usize, rng: &mut R) -> Self {
        JointParams {
            w_out: glorot_uniform(input_dim, classes, rng),
            b: Array1::zeros(classes),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_out.nrows()
    }

    pub fn classes(&self) -> usize {
        self.w_out.ncols()
    }

    pub fn is_finite(&self) -> bool {
        crate::nn::all_finite(self.w_out.iter().chain(self.b.iter()))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HeadTrace {
    /// Head input after dropout.
    pub input: Array2<f64>,
    pub drop_mask: Option<Array2<f64>>,
    pub probs: Array2<f64>,
}

pub(crate) fn head_forward(
    fused: &Array2<f64>,
    p: &JointParams,
    dropout: Option<&mut Dropout>,
) -> Result<HeadTrace, FusionError> {
    if fused.ncols() != p.input_dim() {
        return Err(FusionError::ShapeMismatch(format!(
            "fused rows have width {}, head expects {}",
            fused.ncols(),
            p.input_dim()
        )));
    }
    let drop_mask = dropout.and_then(|d| d.mask(fused.nrows(), fused.ncols()));
    let input = match &drop_mask {
        Some(m) => fused * m,
        None => fused.clone(),
    };
    let logits = input.dot(&p.w_out) + &p.b;
    Ok(HeadTrace {
        probs: softmax_rows(&logits),
        input,
        drop_mask,
    })
}

/// `softmax(dropout(fused) W_out + b)`; pass `None` for evaluation.
pub fn classifier_forward(
    fused: &Array2<f64>,
    p: &JointParams,
    dropout: Option<&mut Dropout>,
) -> Result<Array2<f64>, FusionError> {
    Ok(head_forward(fused, p, dropout)?.probs)
}

/// Mean negative log-probability of the gold tags, taken over the
/// positions whose mask bit is 1. `gold` is in word order.
pub fn masked_cross_entropy(probs: &Array2<f64>, gold: &[usize], mask: &AlignmentMask) -> Result<f64, FusionError> {
    check_targets(probs, gold, mask)?;
    if gold.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = mask
        .word_positions()
        .zip(gold)
        .map(|(pos, &g)| -probs[[pos, g]].ln())
        .sum();
    Ok(total / gold.len() as f64)
}

pub(crate) fn check_targets(probs: &Array2<f64>, gold: &[usize], mask: &AlignmentMask) -> Result<(), FusionError> {
    if probs.nrows() != mask.len() {
        return Err(FusionError::ShapeMismatch(format!(
            "{} probability rows for a mask of length {}",
            probs.nrows(),
            mask.len()
        )));
    }
    if gold.len() != mask.word_count() {
        return Err(FusionError::ShapeMismatch(format!(
            "{} gold tags for a mask with {} word positions",
            gold.len(),
            mask.word_count()
        )));
    }
    if let Some(&g) = gold.iter().find(|&&g| g >= probs.ncols()) {
        return Err(FusionError::ShapeMismatch(format!("tag index {g} out of range")));
    }
    Ok(())
}

/// Sum of `-ln p(gold)` over masked positions and its gradient w.r.t. the
/// logits, both multiplied by `scale`.
pub(crate) fn cross_entropy_grad(
    probs: &Array2<f64>,
    gold: &[usize],
    mask: &AlignmentMask,
    scale: f64,
) -> (f64, Array2<f64>) {
    let mut d_logits = Array2::zeros(probs.raw_dim());
    let mut loss = 0.0;
    for (pos, &g) in mask.word_positions().zip(gold) {
        loss -= probs[[pos, g]].ln();
        let mut row = d_logits.row_mut(pos);
        row.assign(&probs.row(pos));
        row[g] -= 1.0;
        row *= scale;
    }
    (loss * scale, d_logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    #[test]
    fn zero_head_is_uniform() {
        let probs = classifier_forward(&Array2::ones((3, 4)), &JointParams::zeros(4, 9), None).unwrap();
        assert!(probs.iter().all(|&v| (v - 1.0 / 9.0).abs() < 1e-15));
    }

    #[test]
    fn rows_sum_to_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = JointParams::init(5, 4, &mut rng);
        let fused = glorot_uniform(6, 5, &mut rng) * 10.0;
        let mut d = Dropout::new(0.5, 1);
        for probs in [
            classifier_forward(&fused, &p, None).unwrap(),
            classifier_forward(&fused, &p, Some(&mut d)).unwrap(),
        ] {
            for row in probs.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn width_mismatch() {
        assert!(matches!(
            classifier_forward(&Array2::ones((2, 3)), &JointParams::zeros(4, 2), None),
            Err(FusionError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn perfect_predictions_have_zero_loss() {
        let probs = array![[0.0, 1.0], [1.0, 0.0], [0.3, 0.7]];
        let mask = AlignmentMask::new(vec![1, 1, 0]).unwrap();
        assert_eq!(masked_cross_entropy(&probs, &[1, 0], &mask).unwrap(), 0.0);
    }

    #[test]
    fn uniform_nine_way_loss_is_ln9() {
        let probs = Array2::from_elem((4, 9), 1.0 / 9.0);
        let mask = AlignmentMask::new(vec![1, 0, 1, 1]).unwrap();
        let loss = masked_cross_entropy(&probs, &[0, 4, 8], &mask).unwrap();
        assert!((loss - 9f64.ln()).abs() < 1e-12);
        assert!((loss - 2.1972).abs() < 1e-4);
    }

    #[test]
    fn gold_length_must_match_mask() {
        let probs = Array2::from_elem((2, 2), 0.5);
        let mask = AlignmentMask::new(vec![1, 0]).unwrap();
        assert!(matches!(
            masked_cross_entropy(&probs, &[0, 1], &mask),
            Err(FusionError::ShapeMismatch(_))
        ));
    }
}
