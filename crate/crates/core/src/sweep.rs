//! Exhaustive hyperparameter grids.
//!
//! A grid is a JSON object whose keys list candidate values; omitted keys
//! take the published search space. Channel `c` reads `q{c}` and `d{c}`, so
//! a grid point with `m = 2` ignores `q3`/`d3` and duplicates collapse.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cache::FeatureCache;
use crate::classifier::TrainConfig;
use crate::data::GraphDataset;
use crate::error::{Error, Result};
use crate::filter::{Aggregation, FilterConfig, Sign};
use crate::pipeline::{precompute, train_on_splits, PrecomputeOptions};

/// Grids above this many points need an explicit opt-in.
pub const DEFAULT_MAX_POINTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lr: Vec<f64>,
    pub dropout: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub epochs: Vec<usize>,
    pub k: Vec<usize>,
    pub m: Vec<usize>,
    pub q0: Vec<usize>,
    pub q1: Vec<usize>,
    pub q2: Vec<usize>,
    pub q3: Vec<usize>,
    pub d1: Vec<usize>,
    pub d2: Vec<usize>,
    pub d3: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: Vec<i8>,
    pub agg: Vec<String>,
    pub self_loops: Vec<bool>,
    pub runs: usize,
    pub seed: u64,
    pub splits: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lr: vec![0.0003, 0.01, 0.05, 0.1],
            dropout: vec![0.0, 0.1, 0.3, 0.8, 0.95],
            weight_decay: vec![1e-10, 1e-7, 7e-6, 5e-5, 6e-5, 1e-4, 2e-4, 5e-4, 6e-3],
            epochs: vec![700, 800, 1000, 1200, 2000, 2200, 5000, 7000, 50000],
            k: vec![2, 3, 4, 5, 7, 8, 9, 13],
            m: vec![2, 3],
            q0: vec![1],
            q1: vec![2, 4, 5],
            q2: vec![2, 5, 6],
            q3: vec![6],
            d1: vec![0],
            d2: vec![1, 3],
            d3: vec![6, 9],
            alpha: vec![1.0],
            beta: vec![1],
            agg: ["max", "min", "avg", "sum"].map(String::from).to_vec(),
            self_loops: vec![true],
            runs: 10,
            seed: 42,
            splits: vec![0],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub filter: FilterConfig,
    pub train: TrainConfig,
}

impl GridPoint {
    fn key(&self) -> String {
        let t = &self.train;
        format!(
            "{}|lr={:016x}|dropout={:016x}|wd={:016x}|epochs={}",
            self.filter.canonical(),
            t.learning_rate.to_bits(),
            t.dropout.to_bits(),
            t.weight_decay.to_bits(),
            t.epochs
        )
    }
}

fn unique<T: Clone + PartialEq>(values: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(values.len());
    for v in values {
        if !out.contains(v) {
            out.push(v.clone());
        }
    }
    out
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::input(format!("grid key '{name}' has no values")));
    }
    Ok(())
}

impl GridSpec {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let spec: GridSpec = serde_json::from_slice(bytes)
            .map_err(|e| Error::input(format!("grid spec: {e}")))?;
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        nonempty("lr", &self.lr)?;
        nonempty("dropout", &self.dropout)?;
        nonempty("weight_decay", &self.weight_decay)?;
        nonempty("epochs", &self.epochs)?;
        nonempty("k", &self.k)?;
        nonempty("m", &self.m)?;
        nonempty("q0", &self.q0)?;
        nonempty("alpha", &self.alpha)?;
        nonempty("beta", &self.beta)?;
        nonempty("agg", &self.agg)?;
        nonempty("self_loops", &self.self_loops)?;
        nonempty("splits", &self.splits)?;
        if let Some(&m) = self.m.iter().find(|&&m| !(1..=3).contains(&m)) {
            return Err(Error::input(format!("m = {m}; grids support 1 to 3 channels")));
        }
        let max_m = self.m.iter().copied().max().unwrap_or(0);
        for (c, (q, d)) in [(&self.q1, &self.d1), (&self.q2, &self.d2), (&self.q3, &self.d3)]
            .into_iter()
            .enumerate()
            .take(max_m)
        {
            nonempty(&format!("q{}", c + 1), q)?;
            nonempty(&format!("d{}", c + 1), d)?;
        }
        Ok(())
    }

    /// Upper bound on the number of points before deduplication.
    pub fn raw_size(&self) -> usize {
        let train = [
            self.lr.len(),
            self.dropout.len(),
            self.weight_decay.len(),
            self.epochs.len(),
        ];
        let shared = [
            self.k.len(),
            self.q0.len(),
            self.alpha.len(),
            self.beta.len(),
            self.agg.len(),
            self.self_loops.len(),
        ];
        let channels: usize = unique(&self.m)
            .iter()
            .map(|&m| {
                [(&self.q1, &self.d1), (&self.q2, &self.d2), (&self.q3, &self.d3)][..m]
                    .iter()
                    .fold(1usize, |acc, (q, d)| acc.saturating_mul(q.len() * d.len()))
            })
            .fold(0usize, |a, b| a.saturating_add(b));
        train
            .iter()
            .chain(&shared)
            .fold(channels, |acc, &n| acc.saturating_mul(n))
    }

    fn filters(&self) -> Result<Vec<FilterConfig>> {
        let aggs = unique(&self.agg)
            .iter()
            .map(|a| a.parse::<Aggregation>())
            .collect::<Result<Vec<_>>>()?;
        let betas = unique(&self.beta)
            .iter()
            .map(|&b| Sign::from_value(b as f64))
            .collect::<Result<Vec<_>>>()?;
        let per_channel = [
            (unique(&self.q1), unique(&self.d1)),
            (unique(&self.q2), unique(&self.d2)),
            (unique(&self.q3), unique(&self.d3)),
        ];
        let mut out = Vec::new();
        for &m in &unique(&self.m) {
            // Cartesian product of (q_c, d_c) over the first m channels.
            let mut chans: Vec<(Vec<usize>, Vec<usize>)> = vec![(vec![], vec![])];
            for (qs, ds) in &per_channel[..m] {
                let mut next = Vec::new();
                for (q, d) in &chans {
                    for &qc in qs {
                        for &dc in ds {
                            let (mut q, mut d) = (q.clone(), d.clone());
                            q.push(qc);
                            d.push(dc);
                            next.push((q, d));
                        }
                    }
                }
                chans = next;
            }
            for &k in &unique(&self.k) {
                for &q0 in &unique(&self.q0) {
                    for (q, d) in &chans {
                        for &alpha in &unique(&self.alpha) {
                            for &beta in &betas {
                                for &aggregation in &aggs {
                                    for &self_loops in &unique(&self.self_loops) {
                                        let f = FilterConfig {
                                            terms: k,
                                            first_item: q0,
                                            ratios: q.clone(),
                                            offsets: d.clone(),
                                            alpha,
                                            beta,
                                            aggregation,
                                            self_loops,
                                        };
                                        f.validate()?;
                                        out.push(f);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// All distinct points in grid order. Fails when the grid exceeds
    /// `max_points` unless `allow_large` is set.
    pub fn expand(&self, max_points: usize, allow_large: bool) -> Result<Vec<GridPoint>> {
        self.check()?;
        let raw = self.raw_size();
        if raw > max_points && !allow_large {
            return Err(Error::input(format!(
                "grid has up to {raw} points (limit {max_points}); pass --allow-large to run it"
            )));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for filter in self.filters()? {
            for &learning_rate in &unique(&self.lr) {
                for &dropout in &unique(&self.dropout) {
                    for &weight_decay in &unique(&self.weight_decay) {
                        for &epochs in &unique(&self.epochs) {
                            let p = GridPoint {
                                filter: filter.clone(),
                                train: TrainConfig {
                                    learning_rate,
                                    dropout,
                                    weight_decay,
                                    epochs,
                                    seed: self.seed,
                                    runs: self.runs,
                                    ..TrainConfig::default()
                                },
                            };
                            p.train.validate()?;
                            if seen.insert(p.key()) {
                                out.push(p);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    #[serde(skip)]
    pub point: GridPoint,
    pub val_mean: f64,
    pub val_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub parameters: usize,
}

/// Best by mean validation accuracy, then fewer trainable parameters, then
/// smaller `k`, then earlier grid position.
pub fn select_best(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter().min_by(|a, b| {
        b.val_mean
            .total_cmp(&a.val_mean)
            .then(a.parameters.cmp(&b.parameters))
            .then(a.point.filter.terms.cmp(&b.point.filter.terms))
            .then(a.index.cmp(&b.index))
    })
}

/// Trains every point; propagation runs once per distinct filter.
pub fn run_sweep(
    ds: &GraphDataset,
    points: &[GridPoint],
    splits: &[usize],
    opts: &PrecomputeOptions,
    cache: Option<&FeatureCache>,
) -> Result<Vec<SweepRow>> {
    let mut features = HashMap::new();
    let mut rows = Vec::with_capacity(points.len());
    for (index, point) in points.iter().enumerate() {
        let key = point.filter.canonical();
        if !features.contains_key(&key) {
            let pre = precompute(ds, &point.filter, opts, cache)?;
            features.insert(key.clone(), pre.features.features);
        }
        let h = &features[&key];
        let pooled = train_on_splits(ds, h, splits, &point.train)?;
        let parameters = h.cols() * ds.num_classes()
            + if point.train.bias { ds.num_classes() } else { 0 };
        log::info!(
            "[{}/{}] {} val {:.4} test {:.4}",
            index + 1,
            points.len(),
            key,
            pooled.val_mean,
            pooled.test_mean
        );
        rows.push(SweepRow {
            index,
            point: point.clone(),
            val_mean: pooled.val_mean,
            val_std: pooled.val_std,
            test_mean: pooled.test_mean,
            test_std: pooled.test_std,
            parameters,
        });
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "index,m,k,q0,q,d,alpha,beta,agg,self_loops,lr,dropout,weight_decay,epochs,\
parameters,val_mean,val_std,test_mean,test_std";

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

pub fn write_results_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        let f = &r.point.filter;
        let t = &r.point.train;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            f.channels(),
            f.terms,
            f.first_item,
            join(&f.ratios),
            join(&f.offsets),
            f.alpha,
            f.beta,
            f.aggregation,
            f.self_loops,
            t.learning_rate,
            t.dropout,
            t.weight_decay,
            t.epochs,
            r.parameters,
            r.val_mean,
            r.val_std,
            r.test_mean,
            r.test_std
        )?;
    }
    Ok(())
}
