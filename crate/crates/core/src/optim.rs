//! Parameter update rules.
//!
//! Parameters are addressed by slot number so one optimizer instance can
//! keep per-tensor state (Adam moments) across steps.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(Adam),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(lr)),
        }
    }

    /// Call once per step before the `update` calls of that step.
    pub fn begin_step(&mut self) {
        if let Optimizer::Adam(adam) = self {
            adam.t += 1;
        }
    }

    pub fn update(&mut self, slot: usize, param: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(param.len(), grad.len());
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in param.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam(adam) => adam.update(slot, param, grad),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            moments: Vec::new(),
        }
    }

    fn update(&mut self, slot: usize, param: &mut [f64], grad: &[f64]) {
        if self.moments.len() <= slot {
            self.moments.resize_with(slot + 1, Default::default);
        }
        let (m, v) = &mut self.moments[slot];
        if m.len() != param.len() {
            *m = vec![0.0; param.len()];
            *v = vec![0.0; param.len()];
        }
        let t = self.t.max(1);
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..param.len() {
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            param[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5);
        let mut p = [1.0, 2.0];
        opt.begin_step();
        opt.update(0, &mut p, &[2.0, -2.0]);
        assert_eq!(p, [0.0, 3.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1);
        let mut p = [0.0, 0.0];
        opt.begin_step();
        opt.update(0, &mut p, &[3.0, -0.001]);
        assert!((p[0] + 0.1).abs() < 1e-6);
        assert!((p[1] - 0.1).abs() < 1e-4);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05);
        let mut p = [4.0];
        for _ in 0..2000 {
            opt.begin_step();
            let g = [2.0 * (p[0] - 1.5)];
            opt.update(0, &mut p, &g);
        }
        assert!((p[0] - 1.5).abs() < 1e-3);
    }
}
