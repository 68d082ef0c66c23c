//! Named parameter storage shared by model architectures.

use super::Tensor;

/// One learnable tensor with a stable name (used by the checkpoint manifest).
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Ordered parameter collection. Order is construction order and defines the
/// checkpoint layout and the optimizer buffer layout.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.params.push(Param { name: name.into(), value });
        self.params.len() - 1
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Param {
        &self.params[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Param {
        &mut self.params[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.value.zero_grad();
        }
    }

    /// Clone of all parameter values without their gradient slots
    /// (checkpoint snapshots don't need to drag 2x the memory around).
    pub fn clone_detached(&self) -> Self {
        Self {
            params: self
                .params
                .iter()
                .map(|p| Param { name: p.name.clone(), value: p.value.detached() })
                .collect(),
        }
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Running statistics of one batch-norm layer (eval-mode normalizers).
#[derive(Debug, Clone, PartialEq)]
pub struct BnRunning {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BnRunning {
    pub fn new(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], var: vec![1.0; channels] }
    }
}
