use ndarray::{Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GcnError, NormAdj};
use crate::nn::{glorot_uniform, softmax_rows, Dropout};

/// Which activation is handed to downstream consumers as the global
/// features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GcnTap {
    /// `dropout(ReLU(Â X W0))`, width H. The second layer is not used.
    Layer1,
    /// `dropout(Â H1 W1)`, width F.
    #[default]
    Layer2,
}

/// `W0`: C x H (input to hidden), `W1`: H x F (hidden to output).
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

impl GcnParams {
    pub fn new(w0: Array2<f64>, w1: Array2<f64>) -> Result<Self, GcnError> {
        if w0.ncols() != w1.nrows() {
            return Err(GcnError::ShapeMismatch(format!(
                "W0 is {}x{} but W1 is {}x{}",
                w0.nrows(),
                w0.ncols(),
                w1.nrows(),
                w1.ncols()
            )));
        }
        Ok(GcnParams { w0, w1 })
    }

    /// Glorot-uniform initialization of both layers.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let w0 = glorot_uniform(input_dim, hidden_dim, rng);
        let w1 = glorot_uniform(hidden_dim, output_dim, rng);
        GcnParams { w0, w1 }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        GcnParams {
            w0: Array2::zeros((input_dim, hidden_dim)),
            w1: Array2::zeros((hidden_dim, output_dim)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w1.ncols()
    }

    /// Width of the features exposed at `tap`.
    pub fn feature_dim(&self, tap: GcnTap) -> usize {
        match tap {
            GcnTap::Layer1 => self.hidden_dim(),
            GcnTap::Layer2 => self.output_dim(),
        }
    }

    pub fn is_finite(&self) -> bool {
        crate::nn::all_finite(self.w0.iter().chain(self.w1.iter()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnGrads {
    pub w0: Array2<f64>,
    pub w1: Array2<f64>,
}

impl GcnGrads {
    pub fn zeros_like(p: &GcnParams) -> Self {
        GcnGrads {
            w0: Array2::zeros(p.w0.raw_dim()),
            w1: Array2::zeros(p.w1.raw_dim()),
        }
    }

    pub fn add_assign(&mut self, other: &GcnGrads) {
        self.w0 += &other.w0;
        self.w1 += &other.w1;
    }
}

/// Intermediate activations of one forward pass, kept for the backward
/// pass. Dropout masks are stored already scaled.
#[derive(Debug, Clone)]
pub struct GcnTrace {
    pub tap: GcnTap,
    pre: Array2<f64>,
    mask1: Option<Array2<f64>>,
    ah1: Option<Array2<f64>>,
    mask2: Option<Array2<f64>>,
    /// Output at the tap.
    pub out: Array2<f64>,
}

fn check_shapes(x: &Array2<f64>, adj: &NormAdj, p: &GcnParams) -> Result<(), GcnError> {
    if x.nrows() != adj.n() {
        return Err(GcnError::ShapeMismatch(format!(
            "X has {} rows, adjacency has {} nodes",
            x.nrows(),
            adj.n()
        )));
    }
    if x.ncols() != p.input_dim() {
        return Err(GcnError::ShapeMismatch(format!(
            "X has {} columns, W0 expects {}",
            x.ncols(),
            p.input_dim()
        )));
    }
    Ok(())
}

fn apply_mask(a: &mut Array2<f64>, mask: &Option<Array2<f64>>) {
    if let Some(m) = mask {
        *a *= m;
    }
}

/// Forward pass up to `tap`, with dropout after each graph convolution
/// when `dropout` is given.
pub fn gcn_forward(
    x: &Array2<f64>,
    adj: &NormAdj,
    p: &GcnParams,
    tap: GcnTap,
    mut dropout: Option<&mut Dropout>,
) -> Result<GcnTrace, GcnError> {
    check_shapes(x, adj, p)?;
    let pre = adj.matmul(&x.dot(&p.w0));
    let mut h1 = pre.mapv(|v| v.max(0.0));
    let mask1 = dropout.as_deref_mut().and_then(|d| d.mask(h1.nrows(), h1.ncols()));
    apply_mask(&mut h1, &mask1);

    if tap == GcnTap::Layer1 {
        return Ok(GcnTrace {
            tap,
            pre,
            mask1,
            out: h1,
            ah1: None,
            mask2: None,
        });
    }
    let ah1 = adj.matmul(&h1);
    let mut out = ah1.dot(&p.w1);
    let mask2 = dropout.and_then(|d| d.mask(out.nrows(), out.ncols()));
    apply_mask(&mut out, &mask2);
    Ok(GcnTrace {
        tap,
        pre,
        mask1,
        ah1: Some(ah1),
        mask2,
        out,
    })
}

/// `Â · ReLU(Â X W0) · W1`: the global features before any classifier.
pub fn gcn_hidden(
    x: &Array2<f64>,
    adj: &NormAdj,
    p: &GcnParams,
    dropout: Option<&mut Dropout>,
) -> Result<Array2<f64>, GcnError> {
    Ok(gcn_forward(x, adj, p, GcnTap::Layer2, dropout)?.out)
}

/// Row-wise softmax over [`gcn_hidden`]: the standalone node classifier.
pub fn gcn_forward_full(
    x: &Array2<f64>,
    adj: &NormAdj,
    p: &GcnParams,
    dropout: Option<&mut Dropout>,
) -> Result<Array2<f64>, GcnError> {
    Ok(softmax_rows(&gcn_hidden(x, adj, p, dropout)?))
}

/// Backpropagate `d_out` (gradient w.r.t. `trace.out`) to both weight
/// matrices.
pub fn gcn_backprop(trace: &GcnTrace, x: &Array2<f64>, adj: &NormAdj, p: &GcnParams, d_out: &Array2<f64>) -> GcnGrads {
    let (d_h1, d_w1) = match trace.tap {
        GcnTap::Layer1 => (d_out.clone(), Array2::zeros(p.w1.raw_dim())),
        GcnTap::Layer2 => {
            let mut d_z = d_out.clone();
            apply_mask(&mut d_z, &trace.mask2);
            let ah1 = trace.ah1.as_ref().expect("layer-2 trace keeps Â H1");
            let d_w1 = ah1.t().dot(&d_z);
            // Â is symmetric, so Âᵀ = Â.
            let d_h1 = adj.matmul(&d_z.dot(&p.w1.t()));
            (d_h1, d_w1)
        }
    };
    let mut d_pre = d_h1;
    apply_mask(&mut d_pre, &trace.mask1);
    Zip::from(&mut d_pre).and(&trace.pre).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
    let d_w0 = x.t().dot(&adj.matmul(&d_pre));
    GcnGrads { w0: d_w0, w1: d_w1 }
}

/// Masked mean cross-entropy of the standalone classifier and its
/// gradients. Nodes with `loss_mask[i] == false` contribute nothing; an
/// all-false mask gives zero loss and zero gradients.
pub fn gcn_backward(
    x: &Array2<f64>,
    adj: &NormAdj,
    p: &GcnParams,
    gold: &[usize],
    loss_mask: &[bool],
    dropout: Option<&mut Dropout>,
) -> Result<(GcnGrads, f64), GcnError> {
    if gold.len() != adj.n() || loss_mask.len() != adj.n() {
        return Err(GcnError::ShapeMismatch(format!(
            "{} labels and {} mask entries for {} nodes",
            gold.len(),
            loss_mask.len(),
            adj.n()
        )));
    }
    if let Some(&bad) = gold.iter().find(|&&g| g >= p.output_dim()) {
        return Err(GcnError::ShapeMismatch(format!(
            "label {bad} out of range for {} outputs",
            p.output_dim()
        )));
    }
    let trace = gcn_forward(x, adj, p, GcnTap::Layer2, dropout)?;
    let probs = softmax_rows(&trace.out);
    let count = loss_mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Ok((GcnGrads::zeros_like(p), 0.0));
    }
    let scale = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut d_out = Array2::zeros(probs.raw_dim());
    for (i, (&g, &m)) in gold.iter().zip(loss_mask).enumerate() {
        if !m {
            continue;
        }
        loss -= probs[[i, g]].ln();
        for t in 0..probs.ncols() {
            d_out[[i, t]] = probs[[i, t]] * scale;
        }
        d_out[[i, g]] -= scale;
    }
    let grads = gcn_backprop(&trace, x, adj, p, &d_out);
    Ok((grads, loss * scale))
}
