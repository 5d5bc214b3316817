//! Multi-channel geometric-polynomial propagation.
//!
//! Each channel `c` sums powers of the normalized adjacency whose exponents
//! form the progression `i·q_c + d_c + q0` for `i = 0..k`. The channel matrix
//! is `g_c = α·I + β·Σ_p S^p`, and the channels are combined element-wise by
//! one of four parameter-free aggregators. The propagated features are
//! `H̄ = aggregate(g_1, …, g_m) · X`.
//!
//! Sum and Avg commute with right-multiplication by `X`, so they are
//! evaluated entirely in feature space. Max and Min do not, and need the
//! channel matrices themselves; those are built in row blocks so that at most
//! one `block × n` slab per channel is alive at a time.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::{build_adjacency, spmm, sym_normalize, SparseMatrix};

/// Element-wise channel aggregator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregation {
    Max,
    Min,
    Avg,
    Sum,
}

impl Aggregation {
    pub const ALL: [Aggregation; 4] = [
        Aggregation::Max,
        Aggregation::Min,
        Aggregation::Avg,
        Aggregation::Sum,
    ];

    /// Sum and Avg are linear, so they can be pushed through `· X`.
    pub fn is_linear(self) -> bool {
        matches!(self, Aggregation::Avg | Aggregation::Sum)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Max => "max",
            Aggregation::Min => "min",
            Aggregation::Avg => "avg",
            Aggregation::Sum => "sum",
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" | "max-fp" => Ok(Aggregation::Max),
            "min" | "min-fp" => Ok(Aggregation::Min),
            "avg" | "avg-fp" | "mean" => Ok(Aggregation::Avg),
            "sum" | "sum-fp" => Ok(Aggregation::Sum),
            other => Err(Error::input(format!(
                "unknown aggregation '{other}' (expected max, min, avg or sum)"
            ))),
        }
    }
}

/// Sign applied to the neighbour terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_value(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Sign::Plus)
        } else if v == -1.0 {
            Ok(Sign::Minus)
        } else {
            Err(Error::input(format!("sign factor must be +1 or -1, got {v}")))
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Plus => f.write_str("1"),
            Sign::Minus => f.write_str("-1"),
        }
    }
}

impl FromStr for Sign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "+1" | "+" | "1.0" => Ok(Sign::Plus),
            "-1" | "-" | "-1.0" => Ok(Sign::Minus),
            other => Err(Error::input(format!(
                "sign factor must be +1 or -1, got '{other}'"
            ))),
        }
    }
}

/// Highest adjacency power a configuration may ask for.
pub const MAX_EXPONENT: usize = 100_000;

/// All hyperparameters of the geometric propagation.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterConfig {
    /// Terms per channel (`k`).
    pub terms: usize,
    /// First-item coefficient (`q0`), shared by every channel.
    pub first_item: usize,
    /// Common ratio per channel (`q_c ≥ 1`).
    pub ratios: Vec<usize>,
    /// Neighbourhood coefficient per channel (`d_c`).
    pub offsets: Vec<usize>,
    /// Self-attention score on the identity term.
    pub alpha: f64,
    pub beta: Sign,
    pub aggregation: Aggregation,
    pub self_loops: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            terms: 2,
            first_item: 1,
            ratios: vec![2],
            offsets: vec![0],
            alpha: 1.0,
            beta: Sign::Plus,
            aggregation: Aggregation::Sum,
            self_loops: true,
        }
    }
}

impl FilterConfig {
    /// The single-term configuration equivalent to SGC with `hops` powers.
    pub fn sgc(hops: usize) -> Self {
        Self {
            terms: 1,
            first_item: 0,
            ratios: vec![1],
            offsets: vec![hops],
            alpha: 0.0,
            beta: Sign::Plus,
            aggregation: Aggregation::Sum,
            self_loops: true,
        }
    }

    /// The configuration whose operator is `(α + β)·I`.
    pub fn mlp(alpha: f64, beta: Sign) -> Self {
        Self {
            terms: 1,
            first_item: 0,
            ratios: vec![1],
            offsets: vec![0],
            alpha,
            beta,
            aggregation: Aggregation::Sum,
            self_loops: true,
        }
    }

    pub fn channels(&self) -> usize {
        self.ratios.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(Error::input("at least one channel is required (m ≥ 1)"));
        }
        if self.terms == 0 {
            return Err(Error::input("terms per channel must be at least 1 (k ≥ 1)"));
        }
        if self.offsets.len() != self.ratios.len() {
            return Err(Error::input(format!(
                "{} common ratios but {} neighbourhood coefficients; both need one value per channel",
                self.ratios.len(),
                self.offsets.len()
            )));
        }
        if let Some(c) = self.ratios.iter().position(|&q| q == 0) {
            return Err(Error::input(format!(
                "common ratio of channel {} is 0; q_m ≥ 1 is required",
                c + 1
            )));
        }
        if !self.alpha.is_finite() {
            return Err(Error::input("alpha must be finite"));
        }
        for (c, (&q, &d)) in self.ratios.iter().zip(&self.offsets).enumerate() {
            let top = (self.terms - 1)
                .checked_mul(q)
                .and_then(|v| v.checked_add(d))
                .and_then(|v| v.checked_add(self.first_item));
            if !top.is_some_and(|p| p <= MAX_EXPONENT) {
                return Err(Error::input(format!(
                    "channel {} needs powers above {MAX_EXPONENT}",
                    c + 1
                )));
            }
        }
        Ok(())
    }

    /// Largest power of the adjacency any channel needs. Only meaningful
    /// for a configuration that passed [`validate`](Self::validate).
    pub fn max_exponent(&self) -> usize {
        (0..self.channels())
            .map(|c| (self.terms - 1) * self.ratios[c] + self.offsets[c] + self.first_item)
            .max()
            .unwrap_or(0)
    }

    /// Stable textual form used for fingerprints and result tables.
    pub fn canonical(&self) -> String {
        let join = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "m={};k={};q0={};q={};d={};alpha={:016x};beta={};agg={};self_loops={}",
            self.channels(),
            self.terms,
            self.first_item,
            join(&self.ratios),
            join(&self.offsets),
            self.alpha.to_bits(),
            self.beta,
            self.aggregation,
            u8::from(self.self_loops)
        )
    }

    /// Builds the normalized operator this configuration propagates with.
    pub fn operator(&self, edges: &[(usize, usize)], n: usize) -> Result<SparseMatrix> {
        Ok(sym_normalize(&build_adjacency(edges, n, self.self_loops)?))
    }
}

/// Exponents of one channel's geometric polynomial, ascending and distinct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExponentSet {
    pub channel: usize,
    pub exponents: Vec<usize>,
}

impl ExponentSet {
    pub fn max(&self) -> usize {
        self.exponents.last().copied().unwrap_or(0)
    }

    pub fn contains(&self, p: usize) -> bool {
        self.exponents.binary_search(&p).is_ok()
    }
}

/// `{d_c + q0, q_c + d_c + q0, …, (k−1)·q_c + d_c + q0}` for channel `channel`
/// (zero-based). The identity term is not part of the set.
pub fn exponent_set(config: &FilterConfig, channel: usize) -> Result<ExponentSet> {
    config.validate()?;
    if channel >= config.channels() {
        return Err(Error::input(format!(
            "channel {channel} out of range for {} channels",
            config.channels()
        )));
    }
    let (q, d) = (config.ratios[channel], config.offsets[channel]);
    let mut exponents: Vec<usize> = (0..config.terms)
        .map(|i| i * q + d + config.first_item)
        .collect();
    exponents.dedup();
    Ok(ExponentSet { channel, exponents })
}

/// `Σ_{p ∈ exponents} S^p · X`, by iterated sparse products. Performs exactly
/// `exponents.max()` calls to [`spmm`].
pub fn channel_sum_features(
    s: &SparseMatrix,
    exponents: &ExponentSet,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    if s.n() != x.rows() {
        return Err(Error::input(format!(
            "operator has {} nodes but features have {} rows",
            s.n(),
            x.rows()
        )));
    }
    let mut acc = DenseMatrix::zeros(x.rows(), x.cols());
    if exponents.contains(0) {
        acc.add_assign(x)?;
    }
    let mut power = x.clone();
    for p in 1..=exponents.max() {
        power = spmm(s, &power)?;
        if exponents.contains(p) {
            acc.add_assign(&power)?;
        }
    }
    Ok(acc)
}

/// Rows `rows` of `Σ_p S^p`, given `st = Sᵀ`. Returned as a `rows.len() × n` slab.
fn channel_sum_rows(
    st: &SparseMatrix,
    exponents: &ExponentSet,
    rows: Range<usize>,
) -> Result<DenseMatrix> {
    let n = st.n();
    let b = rows.len();
    // Columns of the selector are unit vectors e_r; (Sᵀ)^p e_r is row r of S^p.
    let mut selector = DenseMatrix::zeros(n, b);
    for (col, r) in rows.enumerate() {
        selector.set(r, col, 1.0);
    }
    let acc = channel_sum_features(st, exponents, &selector)?;
    Ok(acc.transpose())
}

/// Memory and layout knobs for the matrix path.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagateOptions {
    /// Up to this many nodes the channel matrices are built in one block.
    pub dense_node_cap: usize,
    /// Rows per slab once the graph exceeds `dense_node_cap`.
    pub block_rows: usize,
    /// Permit row-block streaming above the cap; otherwise fail with a resource error.
    pub allow_streaming: bool,
    pub path: PropagationPath,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            dense_node_cap: 10_000,
            block_rows: 512,
            allow_streaming: true,
            path: PropagationPath::Auto,
        }
    }
}

/// Which evaluation route [`propagate`] takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagationPath {
    /// Feature space for Sum/Avg, channel matrices for Max/Min.
    Auto,
    /// Always through the channel matrices (any aggregation).
    Matrix,
}

impl PropagateOptions {
    fn block_size(&self, n: usize) -> Result<usize> {
        if n <= self.dense_node_cap {
            Ok(n.max(1))
        } else if self.allow_streaming {
            Ok(self.block_rows.max(1))
        } else {
            Err(Error::Resource(format!(
                "the channel matrices for {n} nodes exceed the dense cap of {} nodes; \
                 Max-FP/Min-FP cannot be evaluated in feature space, so enable streaming \
                 (row blocks of {} rows) or raise the dense cap",
                self.dense_node_cap, self.block_rows
            )))
        }
    }
}

/// Dense `Σ_p S^p`, built from unit-vector blocks.
pub fn channel_sum_matrix(
    s: &SparseMatrix,
    exponents: &ExponentSet,
    opts: &PropagateOptions,
) -> Result<DenseMatrix> {
    let n = s.n();
    let block = opts.block_size(n)?;
    let st = s.transpose();
    let mut out = DenseMatrix::zeros(n, n);
    for start in (0..n).step_by(block) {
        let rows = start..(start + block).min(n);
        let slab = channel_sum_rows(&st, exponents, rows.clone())?;
        for (i, r) in rows.enumerate() {
            out.row_mut(r).copy_from_slice(slab.row(i));
        }
    }
    Ok(out)
}

/// `α·I + β·M` for a square `M`.
pub fn apply_alpha_beta(channel_sum: &DenseMatrix, alpha: f64, beta: Sign) -> Result<DenseMatrix> {
    if channel_sum.rows() != channel_sum.cols() {
        return Err(Error::input(format!(
            "channel matrix must be square, got {}x{}",
            channel_sum.rows(),
            channel_sum.cols()
        )));
    }
    let mut g = channel_sum.scaled(beta.value());
    for i in 0..g.rows() {
        let v = g.get(i, i) + alpha;
        g.set(i, i, v);
    }
    Ok(g)
}

/// Correctly rounded sum (Shewchuk's partials with a half-way fix-up).
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        let mut x = v;
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    let Some(mut n) = partials.len().checked_sub(1) else {
        return 0.0;
    };
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Element-wise aggregation of equally shaped channels.
///
/// Sum and Avg round each element's exact channel total once, so the result
/// is bit-identical under any reordering of `channels` and exactly negated
/// when every channel is negated.
pub fn aggregate(channels: &[DenseMatrix], mode: Aggregation) -> Result<DenseMatrix> {
    let first = channels
        .first()
        .ok_or_else(|| Error::input("aggregate needs at least one channel"))?;
    if let Some(bad) = channels.iter().find(|c| c.shape() != first.shape()) {
        return Err(Error::input(format!(
            "channel shapes differ: {:?} vs {:?}",
            first.shape(),
            bad.shape()
        )));
    }
    if channels.len() == 1 {
        return Ok(first.clone());
    }
    let m = channels.len();
    let mut out = first.clone();
    match mode {
        Aggregation::Max => {
            for c in &channels[1..] {
                for (o, &v) in out.data_mut().iter_mut().zip(c.data()) {
                    *o = o.max(v);
                }
            }
        }
        Aggregation::Min => {
            for c in &channels[1..] {
                for (o, &v) in out.data_mut().iter_mut().zip(c.data()) {
                    *o = o.min(v);
                }
            }
        }
        Aggregation::Sum | Aggregation::Avg => {
            let mut buf = vec![0.0; m];
            for (idx, o) in out.data_mut().iter_mut().enumerate() {
                for (b, c) in buf.iter_mut().zip(channels) {
                    *b = c.data()[idx];
                }
                let s = exact_sum(&buf);
                *o = if mode == Aggregation::Avg { s / m as f64 } else { s };
            }
        }
    }
    Ok(out)
}

/// Precomputed `H̄` together with the fingerprint of what produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagatedFeatures {
    pub features: DenseMatrix,
    /// 32 lowercase hex digits; see [`crate::cache::fingerprint`].
    pub fingerprint: String,
}

impl PropagatedFeatures {
    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    pub fn cols(&self) -> usize {
        self.features.cols()
    }
}

fn warn_zero_exponent(config: &FilterConfig) {
    for c in 0..config.channels() {
        if config.offsets[c] + config.first_item == 0 {
            log::warn!(
                "channel {}: d + q0 = 0 puts S^0 inside the channel sum, \
                 so the identity is counted beyond the alpha term",
                c + 1
            );
        }
    }
}

/// Computes `H̄ = Ŝ_adj · X` for an already normalized operator `s`.
pub fn propagate_features(
    config: &FilterConfig,
    s: &SparseMatrix,
    x: &DenseMatrix,
    opts: &PropagateOptions,
) -> Result<DenseMatrix> {
    config.validate()?;
    if s.n() != x.rows() {
        return Err(Error::input(format!(
            "operator has {} nodes but features have {} rows",
            s.n(),
            x.rows()
        )));
    }
    warn_zero_exponent(config);
    let sets = (0..config.channels())
        .map(|c| exponent_set(config, c))
        .collect::<Result<Vec<_>>>()?;

    if config.aggregation.is_linear() && opts.path == PropagationPath::Auto {
        let mut channels = Vec::with_capacity(sets.len());
        for set in &sets {
            let mut g = channel_sum_features(s, set, x)?.scaled(config.beta.value());
            g.add_scaled(config.alpha, x)?;
            channels.push(g);
        }
        return aggregate(&channels, config.aggregation);
    }

    let n = s.n();
    let block = opts.block_size(n)?;
    let st = s.transpose();
    let mut out = DenseMatrix::zeros(n, x.cols());
    for start in (0..n).step_by(block) {
        let rows = start..(start + block).min(n);
        let slab = geometric_rows(config, &st, &sets, rows.clone())?;
        let part = slab.matmul(x)?;
        for (i, r) in rows.enumerate() {
            out.row_mut(r).copy_from_slice(part.row(i));
        }
    }
    Ok(out)
}

/// Rows `rows` of `Ŝ_adj`, with `st = Sᵀ`.
fn geometric_rows(
    config: &FilterConfig,
    st: &SparseMatrix,
    sets: &[ExponentSet],
    rows: Range<usize>,
) -> Result<DenseMatrix> {
    let start = rows.start;
    let channel = |set: &ExponentSet| -> Result<DenseMatrix> {
        let mut g = channel_sum_rows(st, set, rows.clone())?;
        g.scale(config.beta.value());
        for i in 0..g.rows() {
            let v = g.get(i, start + i) + config.alpha;
            g.set(i, start + i, v);
        }
        Ok(g)
    };
    match config.aggregation {
        // Running extrema keep one accumulator and one channel slab alive.
        Aggregation::Max | Aggregation::Min => {
            let mut acc = channel(&sets[0])?;
            for set in &sets[1..] {
                let g = channel(set)?;
                acc = aggregate(&[acc, g], config.aggregation)?;
            }
            Ok(acc)
        }
        Aggregation::Sum | Aggregation::Avg => {
            let slabs = sets.iter().map(channel).collect::<Result<Vec<_>>>()?;
            aggregate(&slabs, config.aggregation)
        }
    }
}

/// Dense `Ŝ_adj` for small graphs.
pub fn geometric_adjacency(
    config: &FilterConfig,
    s: &SparseMatrix,
    opts: &PropagateOptions,
) -> Result<DenseMatrix> {
    config.validate()?;
    let mut channels = Vec::with_capacity(config.channels());
    for c in 0..config.channels() {
        let set = exponent_set(config, c)?;
        channels.push(apply_alpha_beta(
            &channel_sum_matrix(s, &set, opts)?,
            config.alpha,
            config.beta,
        )?);
    }
    aggregate(&channels, config.aggregation)
}

/// Propagates and tags the result with the fingerprint of `(config, dataset_id)`.
pub fn propagate(
    config: &FilterConfig,
    s: &SparseMatrix,
    x: &DenseMatrix,
    dataset_id: &str,
    opts: &PropagateOptions,
) -> Result<PropagatedFeatures> {
    let features = propagate_features(config, s, x, opts)?;
    if !features.is_finite() {
        return Err(Error::Numeric(
            "propagated features contain non-finite values".into(),
        ));
    }
    Ok(PropagatedFeatures {
        features,
        fingerprint: crate::cache::fingerprint(config, dataset_id),
    })
}

/// `S^hops · X`, the SGC feature precompute.
pub fn sgc_features(s: &SparseMatrix, x: &DenseMatrix, hops: usize) -> Result<DenseMatrix> {
    let mut h = x.clone();
    for _ in 0..hops {
        h = spmm(s, &h)?;
    }
    Ok(h)
}
