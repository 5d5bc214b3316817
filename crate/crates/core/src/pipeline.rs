//! Dataset → propagated features → trained classifier.

use std::time::Instant;

use crate::cache::FeatureCache;
use crate::classifier::{self, train::mean_std, TrainConfig, TrainReport};
use crate::data::{row_normalize_features, GraphDataset};
use crate::dense::DenseMatrix;
use crate::error::Result;
use crate::filter::{propagate, FilterConfig, PropagateOptions, PropagatedFeatures};

#[derive(Clone, Debug, Default)]
pub struct PrecomputeOptions {
    pub propagate: PropagateOptions,
    /// Row-normalize features before propagating.
    pub row_normalize: bool,
}

#[derive(Clone, Debug)]
pub struct Precomputed {
    pub features: PropagatedFeatures,
    pub cache_hit: bool,
    /// Propagation wall time; zero on a cache hit.
    pub seconds: f64,
}

/// Cache identity of the features fed to propagation.
pub fn dataset_id(ds: &GraphDataset, row_normalize: bool) -> String {
    let mut id = ds.content_id();
    if row_normalize {
        id.push_str("+rownorm");
    }
    id
}

pub fn input_features(ds: &GraphDataset, row_normalize: bool) -> DenseMatrix {
    if row_normalize {
        row_normalize_features(ds.features())
    } else {
        ds.features().clone()
    }
}

pub fn precompute(
    ds: &GraphDataset,
    config: &FilterConfig,
    opts: &PrecomputeOptions,
    cache: Option<&FeatureCache>,
) -> Result<Precomputed> {
    config.validate()?;
    let id = dataset_id(ds, opts.row_normalize);
    let fp = crate::cache::fingerprint(config, &id);
    if let Some(cache) = cache {
        if let Some(features) = cache.load(&fp)? {
            log::debug!("cache hit {fp}");
            return Ok(Precomputed {
                features,
                cache_hit: true,
                seconds: 0.0,
            });
        }
    }
    let started = Instant::now();
    let s = config.operator(&ds.edges(), ds.num_nodes())?;
    let x = input_features(ds, opts.row_normalize);
    let features = propagate(config, &s, &x, &id, &opts.propagate)?;
    let seconds = started.elapsed().as_secs_f64();
    if let Some(cache) = cache {
        cache.store(&features)?;
    }
    Ok(Precomputed {
        features,
        cache_hit: false,
        seconds,
    })
}

/// Runs of every requested split, pooled.
#[derive(Clone, Debug)]
pub struct PooledReport {
    pub splits: Vec<usize>,
    pub reports: Vec<TrainReport>,
    pub test_mean: f64,
    pub test_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
}

pub fn train_on_splits(
    ds: &GraphDataset,
    features: &DenseMatrix,
    splits: &[usize],
    cfg: &TrainConfig,
) -> Result<PooledReport> {
    let mut reports = Vec::with_capacity(splits.len());
    for &i in splits {
        let split = ds.split(i)?;
        reports.push(classifier::train(
            features,
            ds.labels(),
            ds.num_classes(),
            split,
            cfg,
        )?);
    }
    let pool = |f: fn(&classifier::Metrics) -> f64| -> Vec<f64> {
        reports
            .iter()
            .flat_map(|r| r.runs.iter().map(move |o| f(&o.metrics)))
            .collect()
    };
    let (test_mean, test_std) = mean_std(&pool(|m| m.test_accuracy));
    let (val_mean, val_std) = mean_std(&pool(|m| m.val_accuracy));
    Ok(PooledReport {
        splits: splits.to_vec(),
        reports,
        test_mean,
        test_std,
        val_mean,
        val_std,
    })
}
