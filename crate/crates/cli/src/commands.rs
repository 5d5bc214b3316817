use std::fs;
use std::path::Path;

use serde::Serialize;

use gpnet::cache::FeatureCache;
use gpnet::classifier::checkpoint::{self, Checkpoint};
use gpnet::classifier::train::EpochTimer;
use gpnet::classifier::{Metrics, TrainConfig};
use gpnet::data::{load_bundle, require_known_statistics, GraphDataset, StatsCheck};
use gpnet::pipeline::{precompute, train_on_splits, PooledReport, PrecomputeOptions};
use gpnet::spectral::{emit_spectrum_csv, grid_report, spectrum_report_capped};
use gpnet::sweep::{run_sweep, select_best, write_results_csv, GridSpec};
use gpnet::{Error, FilterConfig, Sign};

use crate::args::*;
use crate::Failure;

type Outcome = Result<(), Failure>;

pub const SCHEMA_VERSION: u32 = 1;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Precompute(a) => cmd_precompute(a),
        Command::Train(a) => cmd_train(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ValidateBundle(a) => cmd_validate(a),
    }
}

fn cache_of(args: &CacheArgs) -> Option<FeatureCache> {
    args.dir().map(FeatureCache::new)
}

fn parse_split_list(spec: &str, ds: &GraphDataset) -> Result<Vec<usize>, Failure> {
    if spec.trim() == "all" {
        if ds.splits().is_empty() {
            return Err(Failure::Usage(format!("{} stores no splits", ds.name())));
        }
        return Ok((0..ds.splits().len()).collect());
    }
    let splits = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Failure::Usage(format!("--split expects an index or 'all', got '{s}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for &s in &splits {
        ds.split(s)?;
    }
    Ok(splits)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::Run(Error::Io { path: path.into(), source: e }))
}

fn cmd_precompute(a: PrecomputeArgs) -> Outcome {
    let config = a.filter.config().map_err(Failure::Usage)?;
    let ds = load_bundle(&a.dataset)?;
    let cache = cache_of(&a.cache);
    let pre = precompute(&ds, &config, &a.filter.precompute_options(), cache.as_ref())?;
    let f = &pre.features;
    if pre.cache_hit {
        println!("cache hit {} ({}x{})", f.fingerprint, f.rows(), f.cols());
    } else {
        println!(
            "propagated {}x{} in {:.3}s ({})",
            f.rows(),
            f.cols(),
            pre.seconds,
            config.canonical()
        );
    }
    if let Some(c) = &cache {
        println!("{}", c.path_for(&f.fingerprint).display());
    }
    Ok(())
}

#[derive(Serialize)]
struct FilterJson {
    canonical: String,
    m: usize,
    k: usize,
    q0: usize,
    q: Vec<usize>,
    d: Vec<usize>,
    alpha: f64,
    beta: f64,
    agg: &'static str,
    self_loops: bool,
}

impl From<&FilterConfig> for FilterJson {
    fn from(c: &FilterConfig) -> Self {
        Self {
            canonical: c.canonical(),
            m: c.channels(),
            k: c.terms,
            q0: c.first_item,
            q: c.ratios.clone(),
            d: c.offsets.clone(),
            alpha: c.alpha,
            beta: c.beta.value(),
            agg: c.aggregation.as_str(),
            self_loops: c.self_loops,
        }
    }
}

#[derive(Serialize)]
struct RunJson<'a> {
    split: usize,
    seed: u64,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    schema_version: u32,
    dataset: &'a str,
    filter: FilterJson,
    train: &'a TrainConfig,
    row_normalize: bool,
    splits: &'a [usize],
    test_mean: f64,
    test_std: f64,
    val_mean: f64,
    val_std: f64,
    propagation_seconds: f64,
    cache_hit: bool,
    runs: Vec<RunJson<'a>>,
}

fn runs_json(pooled: &PooledReport) -> Vec<RunJson<'_>> {
    pooled
        .splits
        .iter()
        .zip(&pooled.reports)
        .flat_map(|(&split, r)| {
            r.runs.iter().map(move |o| RunJson {
                split,
                seed: o.seed,
                metrics: &o.metrics,
            })
        })
        .collect()
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let config = a.filter.config().map_err(Failure::Usage)?;
    let train = a.train.config().map_err(Failure::Usage)?;
    let ds = load_bundle(&a.dataset)?;
    let splits = parse_split_list(&a.split, &ds)?;
    let opts = a.filter.precompute_options();
    let cache = cache_of(&a.cache);
    let pre = precompute(&ds, &config, &opts, cache.as_ref())?;
    let pooled = train_on_splits(&ds, &pre.features.features, &splits, &train)?;

    println!("dataset  {}", ds.name());
    println!("filter   {}", config.canonical());
    println!("split    run  seed        epoch  train   val     test");
    for (split, report) in pooled.splits.iter().zip(&pooled.reports) {
        for (i, o) in report.runs.iter().enumerate() {
            let m = &o.metrics;
            println!(
                "{split:<8} {i:<4} {:<11} {:<6} {:.4}  {:.4}  {:.4}",
                o.seed, m.selected_epoch, m.train_accuracy, m.val_accuracy, m.test_accuracy
            );
        }
    }
    println!(
        "test {:.2} ± {:.2}   val {:.2} ± {:.2}",
        100.0 * pooled.test_mean,
        100.0 * pooled.test_std,
        100.0 * pooled.val_mean,
        100.0 * pooled.val_std
    );

    if let Some(path) = &a.checkpoint {
        let best = pooled.reports[0]
            .runs
            .iter()
            .reduce(|best, o| {
                if o.metrics.val_accuracy > best.metrics.val_accuracy {
                    o
                } else {
                    best
                }
            })
            .expect("at least one run");
        checkpoint::save(
            &Checkpoint {
                params: best.params.clone(),
                selected_epoch: best.metrics.selected_epoch as u64,
                seed: best.seed,
            },
            path,
        )?;
    }
    if let Some(path) = &a.out {
        write_json(
            &MetricsFile {
                schema_version: SCHEMA_VERSION,
                dataset: ds.name(),
                filter: (&config).into(),
                train: &train,
                row_normalize: opts.row_normalize,
                splits: &pooled.splits,
                test_mean: pooled.test_mean,
                test_std: pooled.test_std,
                val_mean: pooled.val_mean,
                val_std: pooled.val_std,
                propagation_seconds: pre.seconds,
                cache_hit: pre.cache_hit,
                runs: runs_json(&pooled),
            },
            path,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BestJson<'a> {
    schema_version: u32,
    dataset: &'a str,
    index: usize,
    filter: FilterJson,
    train: &'a TrainConfig,
    val_mean: f64,
    val_std: f64,
    test_mean: f64,
    test_std: f64,
    parameters: usize,
}

fn cmd_sweep(a: SweepArgs) -> Outcome {
    let bytes = fs::read(&a.grid).map_err(|e| Failure::Usage(format!("{}: {e}", a.grid.display())))?;
    let grid = GridSpec::from_json(&bytes).map_err(|e| Failure::Usage(e.to_string()))?;
    let points = grid
        .expand(a.max_points, a.allow_large)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let ds = load_bundle(&a.dataset)?;
    let splits = match &a.split {
        Some(s) => parse_split_list(s, &ds)?,
        None => {
            for &s in &grid.splits {
                ds.split(s)?;
            }
            grid.splits.clone()
        }
    };
    let opts = PrecomputeOptions {
        row_normalize: a.row_normalize,
        ..PrecomputeOptions::default()
    };
    let cache = cache_of(&a.cache);
    let rows = run_sweep(&ds, &points, &splits, &opts, cache.as_ref())?;

    let mut csv = Vec::new();
    write_results_csv(&rows, &mut csv).expect("writing to memory");
    fs::write(&a.out, csv).map_err(|e| Failure::Run(Error::Io { path: a.out.clone(), source: e }))?;

    let best = select_best(&rows).expect("grid has at least one point");
    println!("{} configurations evaluated; results in {}", rows.len(), a.out.display());
    println!(
        "best #{}: {} lr={} dropout={} wd={} epochs={}  val {:.2}  test {:.2} ± {:.2}",
        best.index,
        best.point.filter.canonical(),
        best.point.train.learning_rate,
        best.point.train.dropout,
        best.point.train.weight_decay,
        best.point.train.epochs,
        100.0 * best.val_mean,
        100.0 * best.test_mean,
        100.0 * best.test_std
    );
    if let Some(path) = &a.best {
        write_json(
            &BestJson {
                schema_version: SCHEMA_VERSION,
                dataset: ds.name(),
                index: best.index,
                filter: (&best.point.filter).into(),
                train: &best.point.train,
                val_mean: best.val_mean,
                val_std: best.val_std,
                test_mean: best.test_mean,
                test_std: best.test_std,
                parameters: best.parameters,
            },
            path,
        )?;
    }
    Ok(())
}

fn cmd_spectrum(a: SpectrumArgs) -> Outcome {
    let config = a.filter.config().map_err(Failure::Usage)?;
    let report = match &a.dataset {
        Some(dir) => {
            let ds = load_bundle(dir)?;
            let s = config.operator(&ds.edges(), ds.num_nodes())?;
            spectrum_report_capped(&config, &s, a.max_nodes)?
        }
        None => grid_report(&config, a.step).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    emit_spectrum_csv(&report, &a.out)?;
    println!(
        "{} points, filter class {}{}",
        report.eigenvalues.len(),
        report.filter_class,
        if report.aggregation_is_spectral {
            ""
        } else {
            " (per channel; max/min aggregation has no joint response)"
        }
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    model: &'static str,
    filter: String,
    feature_dim: usize,
    median_seconds: f64,
    mean_seconds: f64,
    ratio_to_sgc: f64,
}

#[derive(Serialize)]
struct BenchFile<'a> {
    schema_version: u32,
    dataset: &'a str,
    warmup_epochs: usize,
    measured_epochs: u64,
    rows: Vec<BenchRow>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn cmd_bench(a: BenchArgs) -> Outcome {
    let gpnet_cfg = a.filter.config().map_err(Failure::Usage)?;
    let ds = load_bundle(&a.dataset)?;
    let split_index = parse_split_list(&a.split, &ds)?[0];
    let split = ds.split(split_index)?;
    let train = TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        dropout: a.dropout,
        seed: a.seed,
        runs: 1,
        ..TrainConfig::default()
    };
    train.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let models = [
        ("gpnet", gpnet_cfg),
        ("sgc", FilterConfig::sgc(a.sgc_hops)),
        ("mlp", FilterConfig::mlp(0.0, Sign::Plus)),
    ];
    let opts = a.filter.precompute_options();
    let cache = cache_of(&a.cache);
    let mut timers = Vec::new();
    let mut dims = Vec::new();
    for (_, cfg) in &models {
        let pre = precompute(&ds, cfg, &opts, cache.as_ref())?;
        let h = &pre.features.features;
        dims.push(h.cols());
        timers.push(EpochTimer::new(h, ds.labels(), ds.num_classes(), split, &train)?);
    }
    for _ in 0..a.warmup {
        for t in timers.iter_mut() {
            t.epoch()?;
        }
    }
    // Rotate the starting model each round so no model always runs first.
    let mut samples = vec![Vec::with_capacity(a.epochs as usize); timers.len()];
    for round in 0..a.epochs as usize {
        for j in 0..timers.len() {
            let i = (round + j) % timers.len();
            samples[i].push(timers[i].epoch()?);
        }
    }
    let medians: Vec<f64> = samples.iter().map(|s| median(s)).collect();
    let sgc = medians[1];
    let rows: Vec<BenchRow> = models
        .iter()
        .zip(&samples)
        .zip(&medians)
        .zip(&dims)
        .map(|((((name, cfg), s), &med), &dim)| BenchRow {
            model: name,
            filter: cfg.canonical(),
            feature_dim: dim,
            median_seconds: med,
            mean_seconds: s.iter().sum::<f64>() / s.len() as f64,
            ratio_to_sgc: med / sgc,
        })
        .collect();
    println!("model  dim     median ms  mean ms   vs sgc");
    for r in &rows {
        println!(
            "{:<6} {:<7} {:<10.4} {:<9.4} {:.3}",
            r.model,
            r.feature_dim,
            1e3 * r.median_seconds,
            1e3 * r.mean_seconds,
            r.ratio_to_sgc
        );
    }
    if let Some(path) = &a.out {
        write_json(
            &BenchFile {
                schema_version: SCHEMA_VERSION,
                dataset: ds.name(),
                warmup_epochs: a.warmup,
                measured_epochs: a.epochs,
                rows,
            },
            path,
        )?;
    }
    Ok(())
}

fn cmd_validate(a: ValidateArgs) -> Outcome {
    let ds = load_bundle(&a.dataset)?;
    let m = ds.meta();
    println!("name       {}", m.name);
    println!("nodes      {}", m.num_nodes);
    println!("edges      {} stored, {} undirected", m.num_edges, ds.edges().len());
    println!("features   {}{}", m.num_features, if m.features_row_normalized { " (row-normalized)" } else { "" });
    println!("classes    {}", m.num_classes);
    println!("splits     {}", ds.splits().len());
    for (i, s) in ds.splits().iter().enumerate() {
        println!("  {i}: train {} / val {} / test {}", s.train.len(), s.val.len(), s.test.len());
    }
    match require_known_statistics(&ds)? {
        StatsCheck::Match => println!("reference counts match"),
        StatsCheck::Unknown => println!("no reference counts for this name"),
        StatsCheck::Mismatch(_) => unreachable!("mismatches are errors"),
    }
    Ok(())
}
