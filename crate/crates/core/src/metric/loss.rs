//! Batch losses on raw embedding slices, with gradients.
//!
//! These wrap the tape ops so there is exactly one implementation of each
//! loss; the returned gradients are with respect to every embedding.

use crate::nn::{ParamStore, Tape, Tensor};

use super::MetricError;

/// Mean contrastive loss `(1-y) D^2 + y max(0, m-D)^2` over a batch of
/// embedding pairs. Returns the loss and the gradients for both sides,
/// each shaped like the input batch.
pub fn contrastive_loss(
    h1: &[Vec<f64>],
    h2: &[Vec<f64>],
    labels: &[u8],
    margin: f64,
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>), MetricError> {
    assert!(margin > 0.0, "margin must be positive");
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let (a, b) = (pack(&mut tape, h1)?, pack(&mut tape, h2)?);
    let loss = tape.contrastive_loss(a, b, labels, margin)?;
    let value = tape.val(loss).item();
    let grads = tape.backward(loss)?;
    let dim = h1[0].len();
    Ok((value, unpack(grads.get(a), h1.len(), dim), unpack(grads.get(b), h2.len(), dim)))
}

/// Mean triplet hinge `max(0, d(a,p) - d(a,n) + m)` over a batch. Returns
/// the loss and gradients for anchors, positives, and negatives.
#[allow(clippy::type_complexity)]
pub fn triplet_loss(
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    negatives: &[Vec<f64>],
    margin: f64,
) -> Result<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>), MetricError> {
    assert!(margin > 0.0, "margin must be positive");
    let store = ParamStore::new();
    let mut tape = Tape::new(&store);
    let a = pack(&mut tape, anchors)?;
    let p = pack(&mut tape, positives)?;
    let n = pack(&mut tape, negatives)?;
    let loss = tape.triplet_loss(a, p, n, margin)?;
    let value = tape.val(loss).item();
    let grads = tape.backward(loss)?;
    let dim = anchors[0].len();
    Ok((
        value,
        unpack(grads.get(a), anchors.len(), dim),
        unpack(grads.get(p), positives.len(), dim),
        unpack(grads.get(n), negatives.len(), dim),
    ))
}

fn pack(tape: &mut Tape, rows: &[Vec<f64>]) -> Result<crate::nn::VarId, MetricError> {
    if rows.is_empty() {
        return Err(MetricError::EmptyManifest);
    }
    let dim = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * dim);
    for r in rows {
        if r.len() != dim {
            return Err(MetricError::DimMismatch(dim, r.len()));
        }
        data.extend_from_slice(r);
    }
    Ok(tape.input(Tensor::new(vec![rows.len(), dim], data)))
}

fn unpack(g: Option<&Tensor>, batch: usize, dim: usize) -> Vec<Vec<f64>> {
    match g {
        Some(t) => t.data().chunks(dim).map(|c| c.to_vec()).collect(),
        None => vec![vec![0.0; dim]; batch],
    }
}
