//! Frequency responses of the propagation operators.
//!
//! With `L̃ = I − S` and eigenvalues `λ̃ ∈ [0, 2]`, a channel's operator
//! `α·I + β·Σ_p S^p` acts on each eigencomponent as
//! `ĝ_c(λ̃) = α + β·Σ_p (1 − λ̃)^p`.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::dense::{dense_eigh_sym_capped, DenseMatrix, DEFAULT_EIGH_CAP};
use crate::error::{Error, Result};
use crate::filter::{exponent_set, Aggregation, FilterConfig};
use crate::sparse::SparseMatrix;

/// Per-channel responses, plus the aggregated one when it exists.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterResponse {
    /// `channels[c][i]` is `ĝ_c(lambdas[i])`.
    pub channels: Vec<Vec<f64>>,
    /// Present for Sum/Avg only; element-wise Max/Min has no single spectral response.
    pub aggregated: Option<Vec<f64>>,
}

pub fn filter_response(config: &FilterConfig, lambdas: &[f64]) -> Result<FilterResponse> {
    config.validate()?;
    let mut channels = Vec::with_capacity(config.channels());
    for c in 0..config.channels() {
        let set = exponent_set(config, c)?;
        let resp: Vec<f64> = lambdas
            .iter()
            .map(|&l| {
                let base = 1.0 - l;
                let s: f64 = set.exponents.iter().map(|&p| base.powi(p as i32)).sum();
                config.alpha + config.beta.value() * s
            })
            .collect();
        channels.push(resp);
    }
    let aggregated = match config.aggregation {
        Aggregation::Sum | Aggregation::Avg => {
            let m = channels.len() as f64;
            Some(
                (0..lambdas.len())
                    .map(|i| {
                        let s: f64 = channels.iter().map(|ch| ch[i]).sum();
                        if config.aggregation == Aggregation::Avg {
                            s / m
                        } else {
                            s
                        }
                    })
                    .collect(),
            )
        }
        Aggregation::Max | Aggregation::Min => None,
    };
    Ok(FilterResponse {
        channels,
        aggregated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterClass {
    LowPass,
    HighPass,
    AllPass,
    Mixed,
}

impl fmt::Display for FilterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterClass::LowPass => "low-pass",
            FilterClass::HighPass => "high-pass",
            FilterClass::AllPass => "all-pass",
            FilterClass::Mixed => "mixed",
        })
    }
}

/// Evenly spaced `λ̃` samples covering `[0, 2]` with spacing at most `step`.
pub fn lambda_grid(step: f64) -> Vec<f64> {
    let count = (2.0 / step).ceil().max(1.0) as usize;
    (0..=count).map(|i| 2.0 * i as f64 / count as f64).collect()
}

/// Classifies a sampled response.
///
/// * all-pass: the response varies by less than `1e-9` over the whole grid;
/// * low-pass: the signed response is non-increasing over `λ̃ ∈ [0, 1]`;
/// * high-pass: non-decreasing over `λ̃ ∈ [0, 1]`;
/// * mixed: anything else.
///
/// The trend is read on `[0, 1]` because even powers of `1 − λ̃` are mirror
/// images about `λ̃ = 1`, so a comparison across the full `[0, 2]` range
/// cannot tell `(1 − λ̃)²` from a band-stop shape.
pub fn classify_filter(lambdas: &[f64], responses: &[f64]) -> FilterClass {
    if lambdas.is_empty() || lambdas.len() != responses.len() {
        return FilterClass::Mixed;
    }
    let (lo, hi) = responses
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1e-9 {
        return FilterClass::AllPass;
    }
    let mut band: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(responses)
        .filter(|(l, _)| (0.0..=1.0).contains(*l))
        .map(|(&l, &r)| (l, r))
        .collect();
    band.sort_by(|a, b| a.0.total_cmp(&b.0));
    if band.len() < 2 {
        return FilterClass::Mixed;
    }
    let tol = 1e-12 * (hi - lo).max(1.0);
    let falling = band.windows(2).all(|w| w[1].1 <= w[0].1 + tol);
    let rising = band.windows(2).all(|w| w[1].1 >= w[0].1 - tol);
    let drop = band[0].1 - band[band.len() - 1].1;
    match (falling, rising) {
        (true, false) => FilterClass::LowPass,
        (false, true) => FilterClass::HighPass,
        (true, true) if drop > tol => FilterClass::LowPass,
        (true, true) if drop < -tol => FilterClass::HighPass,
        _ => FilterClass::Mixed,
    }
}

/// Spectrum of a graph's Laplacian and the filter's response on it.
#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// Ascending eigenvalues of `I − S`.
    pub eigenvalues: Vec<f64>,
    pub response: FilterResponse,
    pub filter_class: FilterClass,
    /// False for Max/Min, whose report carries per-channel curves only.
    pub aggregation_is_spectral: bool,
}

/// Eigenvalues and eigenvectors of `I − S` for a normalized operator.
pub fn laplacian_eigen(s: &SparseMatrix, cap: usize) -> Result<crate::dense::SymmetricEigen> {
    let mut l = s.to_dense().scaled(-1.0);
    for i in 0..l.rows() {
        l.set(i, i, l.get(i, i) + 1.0);
    }
    dense_eigh_sym_capped(&l, cap)
}

/// Classification of the configuration itself, independent of any graph.
pub fn config_class(config: &FilterConfig) -> Result<FilterClass> {
    let grid = lambda_grid(0.01);
    let resp = filter_response(config, &grid)?;
    Ok(match &resp.aggregated {
        Some(agg) => classify_filter(&grid, agg),
        None => {
            let classes: Vec<_> = resp
                .channels
                .iter()
                .map(|ch| classify_filter(&grid, ch))
                .collect();
            if classes.windows(2).all(|w| w[0] == w[1]) {
                classes[0]
            } else {
                FilterClass::Mixed
            }
        }
    })
}

pub fn spectrum_report(config: &FilterConfig, s: &SparseMatrix) -> Result<SpectrumReport> {
    spectrum_report_capped(config, s, DEFAULT_EIGH_CAP)
}

/// Graphs above `cap` nodes are refused rather than approximated.
pub fn spectrum_report_capped(
    config: &FilterConfig,
    s: &SparseMatrix,
    cap: usize,
) -> Result<SpectrumReport> {
    let eig = laplacian_eigen(s, cap)?;
    if let Some(bad) = eig
        .eigenvalues
        .iter()
        .find(|&&l| !(-1e-8..=2.0 + 1e-8).contains(&l))
    {
        return Err(Error::Numeric(format!(
            "Laplacian eigenvalue {bad} lies outside [0, 2]; is the operator normalized?"
        )));
    }
    let response = filter_response(config, &eig.eigenvalues)?;
    Ok(SpectrumReport {
        eigenvalues: eig.eigenvalues,
        aggregation_is_spectral: response.aggregated.is_some(),
        response,
        filter_class: config_class(config)?,
    })
}

/// Response sampled on a uniform grid over `[0, 2]` instead of a graph's spectrum.
pub fn grid_report(config: &FilterConfig, step: f64) -> Result<SpectrumReport> {
    if !(step > 0.0 && step <= 0.01) {
        return Err(Error::Input(format!("grid step {step} must lie in (0, 0.01]")));
    }
    let grid = lambda_grid(step);
    let response = filter_response(config, &grid)?;
    Ok(SpectrumReport {
        eigenvalues: grid,
        aggregation_is_spectral: response.aggregated.is_some(),
        response,
        filter_class: config_class(config)?,
    })
}

/// CSV with header `lambda,channel,response`, sorted by lambda then channel.
/// Channels are numbered from 1; the aggregated curve (Sum/Avg) uses `all`
/// and follows the numbered channels at each lambda.
pub fn write_spectrum_csv<W: Write>(report: &SpectrumReport, mut w: W) -> std::io::Result<()> {
    writeln!(w, "lambda,channel,response")?;
    for (i, l) in report.eigenvalues.iter().enumerate() {
        for (c, ch) in report.response.channels.iter().enumerate() {
            writeln!(w, "{l},{},{}", c + 1, ch[i])?;
        }
        if let Some(agg) = &report.response.aggregated {
            writeln!(w, "{l},all,{}", agg[i])?;
        }
    }
    Ok(())
}

pub fn emit_spectrum_csv(report: &SpectrumReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_spectrum_csv(report, &mut buf).map_err(|e| Error::io(path, e))?;
    buf.flush().map_err(|e| Error::io(path, e))
}

/// What [`stationary_limit`] does with a disconnected graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Disconnected {
    /// Each component converges to its own limit; cross-component entries are 0.
    PerComponent,
    Reject,
}

/// Limit of `S^K` as `K → ∞` for a self-looped adjacency `adj`:
/// entry `(i, j)` is `√(d̃_i·d̃_j) / vol`, where `vol` is the degree total of
/// the component containing both nodes (`2e + n` for a connected graph).
pub fn stationary_limit(adj: &SparseMatrix, policy: Disconnected) -> Result<DenseMatrix> {
    let n = adj.n();
    if (0..n).any(|i| adj.get(i, i) == 0.0) {
        return Err(Error::input(
            "stationary limit needs an adjacency with self-loops on every node",
        ));
    }
    let comp = components(adj);
    let count = comp.iter().copied().max().map_or(0, |c| c + 1);
    if count > 1 && policy == Disconnected::Reject {
        return Err(Error::input(format!(
            "graph has {count} connected components; the limit is only defined per component"
        )));
    }
    let deg = adj.degrees().0;
    let mut vol = vec![0.0; count];
    for i in 0..n {
        vol[comp[i]] += deg[i];
    }
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if comp[i] == comp[j] {
                out.set(i, j, (deg[i] * deg[j]).sqrt() / vol[comp[i]]);
            }
        }
    }
    Ok(out)
}

/// Connected-component label per node, numbered in order of first appearance.
pub fn components(adj: &SparseMatrix) -> Vec<usize> {
    let n = adj.n();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in adj.row(u).0 {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}
