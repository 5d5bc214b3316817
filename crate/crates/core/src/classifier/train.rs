use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{evaluate_rows, loss_grad_rows, AdamConfig, AdamState, ModelParams};
use crate::data::SplitIndices;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Optimizer and schedule for full-batch training.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 factor; the loss carries `weight_decay/2·‖W‖²`.
    pub weight_decay: f64,
    /// Inverted-dropout rate applied to training rows of `H̄`.
    pub dropout: f64,
    pub epochs: usize,
    pub seed: u64,
    pub runs: usize,
    pub bias: bool,
    /// Apply ReLU to `H̄` before the linear layer (ablation).
    pub relu_features: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            dropout: 0.0,
            epochs: 700,
            seed: 42,
            runs: 10,
            bias: false,
            relu_features: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::input("epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::input("dropout must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::input("weight decay must be non-negative"));
        }
        if self.runs == 0 {
            return Err(Error::input("runs must be at least 1"));
        }
        Ok(())
    }

    /// Seed of run `run`; runs are independent streams.
    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed.wrapping_add(run as u64)
    }
}

/// Result of one training run, measured at the selected checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub test_micro_f1: f64,
    /// Regularized training loss per epoch.
    pub loss_curve: Vec<f64>,
    pub val_accuracy_curve: Vec<f64>,
    /// Wall time of each epoch in seconds.
    pub epoch_seconds: Vec<f64>,
    /// 1-based epoch whose weights were kept (best validation accuracy, earliest on ties).
    pub selected_epoch: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub seed: u64,
    pub params: ModelParams,
    pub metrics: Metrics,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Ordered by run index.
    pub runs: Vec<RunOutcome>,
    pub test_mean: f64,
    pub test_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
}

impl TrainReport {
    pub fn mean_epoch_seconds(&self) -> f64 {
        let all: Vec<f64> = self
            .runs
            .iter()
            .flat_map(|r| r.metrics.epoch_seconds.iter().copied())
            .collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn apply_dropout<R: Rng>(rows: &DenseMatrix, rate: f64, rng: &mut R) -> DenseMatrix {
    let keep = 1.0 - rate;
    let mut out = rows.clone();
    for v in out.data_mut() {
        if rng.random::<f64>() < rate {
            *v = 0.0;
        } else {
            *v /= keep;
        }
    }
    out
}

/// Trains `cfg.runs` independently seeded models on precomputed features and
/// keeps, per run, the epoch with the best validation accuracy.
pub fn train(
    features: &DenseMatrix,
    labels: &[u16],
    classes: usize,
    split: &SplitIndices,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    split.validate(features.rows())?;
    if labels.len() != features.rows() {
        return Err(Error::input(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.rows()
        )));
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::input("training and test sets must be non-empty"));
    }
    let features = if cfg.relu_features {
        let mut h = features.clone();
        h.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        h
    } else {
        features.clone()
    };
    let gather = |idx: &[usize]| -> (DenseMatrix, Vec<u16>) {
        (
            features.select_rows(idx),
            idx.iter().map(|&i| labels[i]).collect(),
        )
    };
    let train_set = gather(&split.train);
    let val_set = gather(&split.val);
    let test_set = gather(&split.test);

    let runs = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            train_run(
                &train_set,
                &val_set,
                &test_set,
                classes,
                features.cols(),
                cfg,
                cfg.run_seed(run),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let test: Vec<f64> = runs.iter().map(|r| r.metrics.test_accuracy).collect();
    let val: Vec<f64> = runs.iter().map(|r| r.metrics.val_accuracy).collect();
    let (test_mean, test_std) = mean_std(&test);
    let (val_mean, val_std) = mean_std(&val);
    Ok(TrainReport {
        runs,
        test_mean,
        test_std,
        val_mean,
        val_std,
    })
}

type Rows = (DenseMatrix, Vec<u16>);

fn train_run(
    train: &Rows,
    val: &Rows,
    test: &Rows,
    classes: usize,
    dims: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<RunOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::glorot(dims, classes, cfg.bias, &mut rng);
    let adam = AdamConfig::new(cfg.learning_rate);
    let mut w_state = AdamState::new(params.weights.data().len());
    let mut b_state = AdamState::new(classes);

    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut val_curve = Vec::with_capacity(cfg.epochs);
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let (loss, grad) = if cfg.dropout > 0.0 {
            let dropped = apply_dropout(&train.0, cfg.dropout, &mut rng);
            loss_grad_rows(&dropped, &train.1, &params, cfg.weight_decay)?
        } else {
            loss_grad_rows(&train.0, &train.1, &params, cfg.weight_decay)?
        };
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "training loss became {loss} at epoch {epoch} (seed {seed})"
            )));
        }
        w_state.step(params.weights.data_mut(), grad.weights.data(), &adam);
        if let (Some(b), Some(gb)) = (params.bias.as_mut(), grad.bias.as_ref()) {
            b_state.step(b, gb, &adam);
        }

        let val_acc = if val.1.is_empty() {
            f64::NAN
        } else {
            evaluate_rows(&val.0, &val.1, &params)?.accuracy
        };
        // Without a validation set the last epoch wins.
        let improved = match &best {
            None => true,
            Some(_) if val.1.is_empty() => true,
            Some((acc, _, _)) => val_acc > *acc,
        };
        if improved {
            best = Some((val_acc, epoch, params.clone()));
        }
        loss_curve.push(loss);
        val_curve.push(val_acc);
        epoch_seconds.push(started.elapsed().as_secs_f64().max(f64::MIN_POSITIVE));
    }

    let (val_acc, selected_epoch, params) = best.expect("at least one epoch");
    let train_eval = evaluate_rows(&train.0, &train.1, &params)?;
    let test_eval = evaluate_rows(&test.0, &test.1, &params)?;
    Ok(RunOutcome {
        seed,
        params,
        metrics: Metrics {
            train_accuracy: train_eval.accuracy,
            val_accuracy: val_acc,
            test_accuracy: test_eval.accuracy,
            test_micro_f1: test_eval.micro_f1,
            loss_curve,
            val_accuracy_curve: val_curve,
            epoch_seconds,
            selected_epoch,
        },
    })
}

/// Per-epoch cost of training on `features`: one forward/backward pass on
/// the training rows, an Adam update and a validation pass. Returns the
/// wall time of each measured epoch after `warmup` unmeasured ones.
pub fn time_epochs(
    features: &DenseMatrix,
    labels: &[u16],
    classes: usize,
    split: &SplitIndices,
    cfg: &TrainConfig,
    warmup: usize,
    measured: usize,
) -> Result<Vec<f64>> {
    let mut timer = EpochTimer::new(features, labels, classes, split, cfg)?;
    for _ in 0..warmup {
        timer.epoch()?;
    }
    (0..measured).map(|_| timer.epoch()).collect()
}

/// Steps a single model one epoch at a time; used by benchmarks that
/// interleave several models.
pub struct EpochTimer {
    train: Rows,
    val: Rows,
    params: ModelParams,
    state: AdamState,
    adam: AdamConfig,
    cfg: TrainConfig,
    rng: ChaCha8Rng,
}

impl EpochTimer {
    pub fn new(
        features: &DenseMatrix,
        labels: &[u16],
        classes: usize,
        split: &SplitIndices,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        split.validate(features.rows())?;
        let gather = |idx: &[usize]| -> Rows {
            (
                features.select_rows(idx),
                idx.iter().map(|&i| labels[i]).collect(),
            )
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = ModelParams::glorot(features.cols(), classes, cfg.bias, &mut rng);
        Ok(Self {
            train: gather(&split.train),
            val: gather(&split.val),
            state: AdamState::new(params.weights.data().len()),
            params,
            adam: AdamConfig::new(cfg.learning_rate),
            cfg: cfg.clone(),
            rng,
        })
    }

    /// Runs one epoch and returns its wall time in seconds.
    pub fn epoch(&mut self) -> Result<f64> {
        let started = Instant::now();
        let (_, grad) = if self.cfg.dropout > 0.0 {
            let dropped = apply_dropout(&self.train.0, self.cfg.dropout, &mut self.rng);
            loss_grad_rows(&dropped, &self.train.1, &self.params, self.cfg.weight_decay)?
        } else {
            loss_grad_rows(&self.train.0, &self.train.1, &self.params, self.cfg.weight_decay)?
        };
        self.state
            .step(self.params.weights.data_mut(), grad.weights.data(), &self.adam);
        if !self.val.1.is_empty() {
            evaluate_rows(&self.val.0, &self.val.1, &self.params)?;
        }
        Ok(started.elapsed().as_secs_f64().max(f64::MIN_POSITIVE))
    }
}
