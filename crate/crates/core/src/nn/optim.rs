//! The three parameter-update rules used for training.
//!
//! - SGD:       `w <- w - lr * g`
//! - Momentum:  `v <- beta v + (1 - beta) g;  w <- w - lr * v`
//! - Adam:      `m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;`
//!              `w <- w - lr * m / (sqrt(v) + eps)`
//!
//! Adam runs without bias correction by default; `bias_correction` switches
//! on the `m/(1-b1^t)`, `v/(1-b2^t)` rescaling.

use super::{NnError, ParamStore};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Momentum { beta: f64 },
    Adam { beta1: f64, beta2: f64, epsilon: f64, bias_correction: bool },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8, bias_correction: false }
    }
}

enum Buffers {
    None,
    Velocity(Vec<Vec<f64>>),
    Moments { m: Vec<Vec<f64>>, v: Vec<Vec<f64>> },
}

pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    bufs: Buffers,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, store: &ParamStore) -> Self {
        assert!(lr > 0.0, "learning rate must be positive");
        let shapes: Vec<usize> = store.iter().map(|p| p.value.len()).collect();
        let zeros = || shapes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        let bufs = match kind {
            OptimizerKind::Sgd => Buffers::None,
            OptimizerKind::Momentum { .. } => Buffers::Velocity(zeros()),
            OptimizerKind::Adam { .. } => Buffers::Moments { m: zeros(), v: zeros() },
        };
        Self { kind, lr, bufs, t: 0 }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Applies one update using the gradients accumulated in the store.
    /// Parameters without a gradient slot are left untouched.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), NnError> {
        self.t += 1;
        for (pid, param) in store.iter_mut().enumerate() {
            let Some(grad) = param.value.grad() else { continue };
            let grad = grad.to_vec();
            if grad.len() != param.value.len() {
                return Err(NnError::ShapeMismatch(format!(
                    "gradient length {} vs parameter length {} at '{}'",
                    grad.len(),
                    param.value.len(),
                    param.name
                )));
            }
            let data = param.value.data_mut();
            match (&self.kind, &mut self.bufs) {
                (OptimizerKind::Sgd, _) => {
                    for (w, g) in data.iter_mut().zip(&grad) {
                        *w -= self.lr * g;
                    }
                }
                (OptimizerKind::Momentum { beta }, Buffers::Velocity(vel)) => {
                    let v = &mut vel[pid];
                    for i in 0..data.len() {
                        v[i] = beta * v[i] + (1.0 - beta) * grad[i];
                        data[i] -= self.lr * v[i];
                    }
                }
                (
                    OptimizerKind::Adam { beta1, beta2, epsilon, bias_correction },
                    Buffers::Moments { m, v },
                ) => {
                    let (m, v) = (&mut m[pid], &mut v[pid]);
                    let (c1, c2) = if *bias_correction {
                        (1.0 - beta1.powi(self.t as i32), 1.0 - beta2.powi(self.t as i32))
                    } else {
                        (1.0, 1.0)
                    };
                    for i in 0..data.len() {
                        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        data[i] -= self.lr * mh / (vh.sqrt() + epsilon);
                    }
                }
                _ => unreachable!("buffer kind matches optimizer kind by construction"),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn store_with(w: f64) -> ParamStore {
        let mut store = ParamStore::new();
        store.push("w", Tensor::new(vec![1], vec![w]));
        store
    }

    fn set_grad(store: &mut ParamStore, g: f64) {
        store.get_mut(0).value.zero_grad();
        store.get_mut(0).value.accumulate_grad(&[g]);
    }

    #[test]
    fn sgd_step() {
        let mut store = store_with(1.0);
        set_grad(&mut store, 0.5);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &store);
        opt.step(&mut store).unwrap();
        assert!((store.get(0).value.data()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn sgd_zero_gradient_leaves_weights_unchanged() {
        let mut store = store_with(1.25);
        set_grad(&mut store, 0.0);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &store);
        opt.step(&mut store).unwrap();
        assert_eq!(store.get(0).value.data()[0], 1.25);
    }

    #[test]
    fn momentum_first_step() {
        let mut store = store_with(1.0);
        set_grad(&mut store, 1.0);
        let mut opt = Optimizer::new(OptimizerKind::Momentum { beta: 0.9 }, 0.1, &store);
        opt.step(&mut store).unwrap();
        // v = 0.9*0 + 0.1*1 = 0.1; w -= 0.1 * 0.1 = 0.01.
        assert!((store.get(0).value.data()[0] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_without_bias_correction() {
        let mut store = store_with(1.0);
        set_grad(&mut store, 1.0);
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.001, &store);
        opt.step(&mut store).unwrap();
        // m = 0.1, v = 0.001, delta = -0.001 * 0.1 / (sqrt(0.001) + 1e-8).
        let expected = 1.0 - 0.001 * 0.1 / (0.001f64.sqrt() + 1e-8);
        assert!((store.get(0).value.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_bias_correction_first_step_is_full_size() {
        let mut store = store_with(1.0);
        set_grad(&mut store, 1.0);
        let kind =
            OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8, bias_correction: true };
        let mut opt = Optimizer::new(kind, 0.001, &store);
        opt.step(&mut store).unwrap();
        // With correction, m_hat = v_hat = g on the first step.
        let expected = 1.0 - 0.001 * 1.0 / (1.0f64.sqrt() + 1e-8);
        assert!((store.get(0).value.data()[0] - expected).abs() < 1e-12);
    }
}
