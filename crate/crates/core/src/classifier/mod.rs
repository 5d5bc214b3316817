//! Linear softmax classifier over precomputed features.

mod adam;
pub mod checkpoint;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use train::{train, Metrics, RunOutcome, TrainConfig, TrainReport};

use rand::Rng;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Weight matrix (`features × classes`) and optional per-class bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub weights: DenseMatrix,
    pub bias: Option<Vec<f64>>,
}

impl ModelParams {
    pub fn zeros(features: usize, classes: usize, bias: bool) -> Self {
        Self {
            weights: DenseMatrix::zeros(features, classes),
            bias: bias.then(|| vec![0.0; classes]),
        }
    }

    /// Uniform in `±√(6 / (features + classes))`; bias starts at zero.
    pub fn glorot<R: Rng>(features: usize, classes: usize, bias: bool, rng: &mut R) -> Self {
        let limit = (6.0 / (features + classes).max(1) as f64).sqrt();
        let data = (0..features * classes)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            weights: DenseMatrix::from_raw(features, classes, data),
            bias: bias.then(|| vec![0.0; classes]),
        }
    }

    pub fn features(&self) -> usize {
        self.weights.rows()
    }

    pub fn classes(&self) -> usize {
        self.weights.cols()
    }

    /// Number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.weights.data().len() + self.bias.as_ref().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub weights: DenseMatrix,
    pub bias: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Forward {
    pub logits: DenseMatrix,
    pub probabilities: DenseMatrix,
}

fn logits(features: &DenseMatrix, params: &ModelParams) -> Result<DenseMatrix> {
    if features.cols() != params.features() {
        return Err(Error::input(format!(
            "features have {} columns but the weight matrix expects {}",
            features.cols(),
            params.features()
        )));
    }
    let mut z = features.matmul_dense(&params.weights)?;
    if let Some(b) = &params.bias {
        for i in 0..z.rows() {
            for (v, bv) in z.row_mut(i).iter_mut().zip(b) {
                *v += bv;
            }
        }
    }
    Ok(z)
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    p
}

pub fn forward(features: &DenseMatrix, params: &ModelParams) -> Result<Forward> {
    let logits = logits(features, params)?;
    let probabilities = softmax_rows(&logits);
    Ok(Forward {
        logits,
        probabilities,
    })
}

/// Lowest index among the maxima.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

pub fn predict(features: &DenseMatrix, params: &ModelParams) -> Result<Vec<usize>> {
    let z = logits(features, params)?;
    Ok((0..z.rows()).map(|i| argmax(z.row(i))).collect())
}

fn check_labels(labels: &[u16], classes: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::input(format!(
            "label {bad} is out of range for {classes} classes"
        )));
    }
    Ok(())
}

fn check_mask(mask: &[usize], rows: usize, labels: usize) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::input("mask selects no nodes"));
    }
    if let Some(&bad) = mask.iter().find(|&&i| i >= rows || i >= labels) {
        return Err(Error::input(format!(
            "mask index {bad} is out of range for {rows} nodes"
        )));
    }
    Ok(())
}

/// Cross-entropy and gradient for rows already gathered from the mask.
pub(crate) fn loss_grad_rows(
    rows: &DenseMatrix,
    labels: &[u16],
    params: &ModelParams,
    weight_decay: f64,
) -> Result<(f64, Gradient)> {
    check_labels(labels, params.classes())?;
    let count = rows.rows() as f64;
    let z = logits(rows, params)?;
    let mut delta = softmax_rows(&z);
    let mut nll = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let zr = z.row(i);
        let max = zr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + zr.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        nll += lse - zr[y as usize];
        delta.row_mut(i)[y as usize] -= 1.0;
    }
    let loss = nll / count + 0.5 * weight_decay * params.weights.frobenius_sq();

    let mut gw = rows.t_matmul(&delta)?;
    gw.scale(1.0 / count);
    gw.add_scaled(weight_decay, &params.weights)?;
    let gb = params.bias.as_ref().map(|_| {
        let mut g = vec![0.0; params.classes()];
        for i in 0..delta.rows() {
            for (a, b) in g.iter_mut().zip(delta.row(i)) {
                *a += b;
            }
        }
        g.iter_mut().for_each(|v| *v /= count);
        g
    });
    Ok((
        loss,
        Gradient {
            weights: gw,
            bias: gb,
        },
    ))
}

/// Mean cross-entropy over `mask` plus `weight_decay/2·‖W‖²`, and its gradient.
pub fn loss_and_grad(
    features: &DenseMatrix,
    params: &ModelParams,
    labels: &[u16],
    mask: &[usize],
    weight_decay: f64,
) -> Result<(f64, Gradient)> {
    check_mask(mask, features.rows(), labels.len())?;
    let rows = features.select_rows(mask);
    let y: Vec<u16> = mask.iter().map(|&i| labels[i]).collect();
    loss_grad_rows(&rows, &y, params, weight_decay)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub micro_f1: f64,
    /// Mean cross-entropy without the regularizer.
    pub loss: f64,
}

pub fn evaluate(
    features: &DenseMatrix,
    params: &ModelParams,
    labels: &[u16],
    mask: &[usize],
) -> Result<Evaluation> {
    check_mask(mask, features.rows(), labels.len())?;
    let rows = features.select_rows(mask);
    let y: Vec<u16> = mask.iter().map(|&i| labels[i]).collect();
    evaluate_rows(&rows, &y, params)
}

pub(crate) fn evaluate_rows(rows: &DenseMatrix, labels: &[u16], params: &ModelParams) -> Result<Evaluation> {
    check_labels(labels, params.classes())?;
    let z = logits(rows, params)?;
    let classes = params.classes();
    let (mut tp, mut fp, mut fneg) = (vec![0usize; classes], vec![0usize; classes], vec![0usize; classes]);
    let mut nll = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let zr = z.row(i);
        let pred = argmax(zr);
        let y = y as usize;
        if pred == y {
            tp[y] += 1;
        } else {
            fp[pred] += 1;
            fneg[y] += 1;
        }
        let max = zr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        nll += max + zr.iter().map(|v| (v - max).exp()).sum::<f64>().ln() - zr[y];
    }
    let count = labels.len() as f64;
    let tp_sum: usize = tp.iter().sum();
    let precision_den = tp_sum + fp.iter().sum::<usize>();
    let recall_den = tp_sum + fneg.iter().sum::<usize>();
    let precision = tp_sum as f64 / precision_den.max(1) as f64;
    let recall = tp_sum as f64 / recall_den.max(1) as f64;
    let micro_f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(Evaluation {
        accuracy: tp_sum as f64 / count,
        micro_f1,
        loss: nll / count,
    })
}
