use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gpnet::classifier::TrainConfig;
use gpnet::filter::PropagateOptions;
use gpnet::pipeline::PrecomputeOptions;
use gpnet::{Aggregation, FilterConfig, Sign};

#[derive(Debug, Parser)]
#[command(name = "gpnet", version, about = "Geometric graph filters with a linear classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate features and write them to the cache.
    Precompute(PrecomputeArgs),
    /// Train the classifier and report accuracy over runs.
    Train(TrainArgs),
    /// Run every point of a hyperparameter grid.
    Sweep(SweepArgs),
    /// Export the filter's frequency response as CSV.
    Spectrum(SpectrumArgs),
    /// Compare per-epoch training time against the SGC and MLP reductions.
    Bench(BenchArgs),
    /// Load a bundle, validate it and print its statistics.
    ValidateBundle(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Agg {
    Max,
    Min,
    Avg,
    Sum,
}

impl From<Agg> for Aggregation {
    fn from(a: Agg) -> Self {
        match a {
            Agg::Max => Aggregation::Max,
            Agg::Min => Aggregation::Min,
            Agg::Avg => Aggregation::Avg,
            Agg::Sum => Aggregation::Sum,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Debug, Args)]
pub struct FilterArgs {
    /// Number of channels; must match the lengths of --q and --d.
    #[arg(long)]
    pub m: Option<usize>,
    /// Terms per channel.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub q0: usize,
    /// Common ratio per channel, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub q: Vec<usize>,
    /// Neighbourhood coefficient per channel, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub d: Vec<usize>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Sign factor, 1 or -1.
    #[arg(long, default_value = "1", allow_negative_numbers = true)]
    pub beta: String,
    #[arg(long, value_enum, default_value_t = Agg::Sum)]
    pub agg: Agg,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub self_loops: Switch,
    /// Row-normalize node features before propagation.
    #[arg(long)]
    pub row_normalize: bool,
    /// Node count up to which Max/Min channel matrices are built densely.
    #[arg(long, default_value_t = 10_000)]
    pub dense_node_cap: usize,
    /// Rows per block when streaming Max/Min above the dense cap.
    #[arg(long, default_value_t = 512)]
    pub block_rows: usize,
    /// Fail instead of streaming row blocks above the dense cap.
    #[arg(long)]
    pub no_streaming: bool,
}

impl FilterArgs {
    pub fn config(&self) -> Result<FilterConfig, String> {
        let beta: Sign = self.beta.parse().map_err(|e: gpnet::Error| e.to_string())?;
        if let Some(m) = self.m {
            if m != self.q.len() || m != self.d.len() {
                return Err(format!(
                    "--m {m} needs {m} values in --q and --d (got {} and {})",
                    self.q.len(),
                    self.d.len()
                ));
            }
        }
        let cfg = FilterConfig {
            terms: self.k,
            first_item: self.q0,
            ratios: self.q.clone(),
            offsets: self.d.clone(),
            alpha: self.alpha,
            beta,
            aggregation: self.agg.into(),
            self_loops: self.self_loops == Switch::On,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn precompute_options(&self) -> PrecomputeOptions {
        PrecomputeOptions {
            propagate: PropagateOptions {
                dense_node_cap: self.dense_node_cap,
                block_rows: self.block_rows,
                allow_streaming: !self.no_streaming,
                ..PropagateOptions::default()
            },
            row_normalize: self.row_normalize,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct TrainFlags {
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 700)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Add a per-class bias to the linear layer.
    #[arg(long)]
    pub bias: bool,
    /// Apply ReLU to the propagated features (ablation).
    #[arg(long)]
    pub relu: bool,
}

impl TrainFlags {
    pub fn config(&self) -> Result<TrainConfig, String> {
        let cfg = TrainConfig {
            learning_rate: self.lr,
            weight_decay: self.weight_decay,
            dropout: self.dropout,
            epochs: self.epochs,
            seed: self.seed,
            runs: self.runs,
            bias: self.bias,
            relu_features: self.relu,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Args)]
pub struct CacheArgs {
    /// Cache directory; GPNET_CACHE_DIR takes precedence when set.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Skip the on-disk cache entirely.
    #[arg(long)]
    pub no_cache: bool,
}

impl CacheArgs {
    pub fn dir(&self) -> Option<PathBuf> {
        if self.no_cache {
            return None;
        }
        match std::env::var_os("GPNET_CACHE_DIR") {
            Some(v) if !v.is_empty() => Some(PathBuf::from(v)),
            _ => Some(
                self.cache_dir
                    .clone()
                    .unwrap_or_else(|| PathBuf::from(".gpnet-cache")),
            ),
        }
    }
}

#[derive(Debug, Args)]
pub struct PrecomputeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Split index, or `all` to pool every stored split.
    #[arg(long, default_value = "0")]
    pub split: String,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Metrics JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the weights of the best-validation run here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// JSON grid; omitted keys use the default search space.
    #[arg(long)]
    pub grid: PathBuf,
    /// Overrides the grid's split list (`all` for every stored split).
    #[arg(long)]
    pub split: Option<String>,
    /// Results CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Best configuration as JSON.
    #[arg(long)]
    pub best: Option<PathBuf>,
    #[arg(long)]
    pub allow_large: bool,
    #[arg(long, default_value_t = gpnet::sweep::DEFAULT_MAX_POINTS)]
    pub max_points: usize,
    #[arg(long)]
    pub row_normalize: bool,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Evaluate at the graph's Laplacian eigenvalues; without it a uniform grid is used.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Grid spacing when no dataset is given.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Largest graph to diagonalize.
    #[arg(long, default_value_t = gpnet::dense::DEFAULT_EIGH_CAP)]
    pub max_nodes: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "0")]
    pub split: String,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Hops of the SGC reduction.
    #[arg(long, default_value_t = 2)]
    pub sgc_hops: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Measured epochs per model (at least 100).
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(100..))]
    pub epochs: u64,
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Timing JSON destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
}
