//! Graph bundles: a directory holding
//!
//! - `meta.json`: name and counts, plus whether features were row-normalized;
//! - `edges.bin`: `u32` LE pairs, one per stored edge, no header;
//! - `features.bin`: `f32` LE, row-major `n × d`;
//! - `labels.bin`: `u16` LE, one per node;
//! - `splits.json`: `[{"train": [..], "val": [..], "test": [..]}, ..]`.
//!
//! Edges are kept exactly as stored so a bundle round-trips byte for byte;
//! [`GraphDataset::edges`] gives the symmetrized, deduplicated view.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dense::DenseMatrix;
use crate::error::{DataError, Error, Result};

pub const META_FILE: &str = "meta.json";
pub const EDGES_FILE: &str = "edges.bin";
pub const FEATURES_FILE: &str = "features.bin";
pub const LABELS_FILE: &str = "labels.bin";
pub const SPLITS_FILE: &str = "splits.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleMeta {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub features_row_normalized: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    /// Checks bounds and pairwise disjointness for `n` nodes.
    pub fn validate(&self, n: usize) -> Result<()> {
        self.validate_numbered(0, n)
    }

    fn validate_numbered(&self, split: usize, n: usize) -> Result<()> {
        let mut owner: Vec<Option<&'static str>> = vec![None; n];
        for (part, idx) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in idx {
                if i >= n {
                    return Err(DataError::IndexOutOfRange {
                        what: "split index",
                        index: i,
                        bound: n,
                    }
                    .into());
                }
                match owner[i] {
                    Some(first) => {
                        return Err(DataError::OverlappingSplit {
                            split,
                            node: i,
                            first,
                            second: part,
                        }
                        .into())
                    }
                    None => owner[i] = Some(part),
                }
            }
        }
        Ok(())
    }
}

/// Boolean node masks of one split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |m: &[bool]| m.iter().filter(|&&b| b).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }
}

/// A validated, immutable node-classification dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    meta: BundleMeta,
    stored_edges: Vec<(u32, u32)>,
    features: DenseMatrix,
    labels: Vec<u16>,
    splits: Vec<SplitIndices>,
}

impl GraphDataset {
    /// Validates the parts against each other. `meta.num_nodes`,
    /// `num_edges` and `num_features` must agree with the data.
    pub fn new(
        meta: BundleMeta,
        stored_edges: Vec<(u32, u32)>,
        features: DenseMatrix,
        labels: Vec<u16>,
        splits: Vec<SplitIndices>,
    ) -> Result<Self> {
        let n = meta.num_nodes;
        let count = |what, expected, found| -> Result<()> {
            if expected != found {
                return Err(DataError::CountMismatch {
                    what,
                    expected,
                    found,
                }
                .into());
            }
            Ok(())
        };
        count("feature rows vs num_nodes", n, features.rows())?;
        count("feature columns vs num_features", meta.num_features, features.cols())?;
        count("labels vs num_nodes", n, labels.len())?;
        count("edges vs num_edges", meta.num_edges, stored_edges.len())?;
        for &(u, v) in &stored_edges {
            let worst = u.max(v) as usize;
            if worst >= n {
                return Err(DataError::IndexOutOfRange {
                    what: "edge endpoint",
                    index: worst,
                    bound: n,
                }
                .into());
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= meta.num_classes) {
            return Err(DataError::IndexOutOfRange {
                what: "label",
                index: bad as usize,
                bound: meta.num_classes,
            }
            .into());
        }
        for (i, s) in splits.iter().enumerate() {
            s.validate_numbered(i, n)?;
        }
        Ok(Self {
            meta,
            stored_edges,
            features,
            labels,
            splits,
        })
    }

    pub fn meta(&self) -> &BundleMeta {
        &self.meta
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn num_nodes(&self) -> usize {
        self.meta.num_nodes
    }

    pub fn num_classes(&self) -> usize {
        self.meta.num_classes
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn splits(&self) -> &[SplitIndices] {
        &self.splits
    }

    /// Edge pairs exactly as stored in the bundle.
    pub fn stored_edges(&self) -> &[(u32, u32)] {
        &self.stored_edges
    }

    /// Undirected edges as `(low, high)`, sorted, without duplicates or loops.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .stored_edges
            .iter()
            .filter(|(u, v)| u != v)
            .map(|&(u, v)| (u.min(v) as usize, u.max(v) as usize))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn split(&self, index: usize) -> Result<&SplitIndices> {
        self.splits.get(index).ok_or_else(|| {
            DataError::IndexOutOfRange {
                what: "split",
                index,
                bound: self.splits.len(),
            }
            .into()
        })
    }

    /// Stable identity of the graph and features, used to key caches.
    pub fn content_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(encode_edges(&self.stored_edges));
        for v in self.features.data() {
            h.update(v.to_le_bytes());
        }
        format!("{}:{}", self.meta.name, crate::cache::to_hex(&h.finalize()[..8]))
    }
}

pub fn select_split(dataset: &GraphDataset, index: usize) -> Result<SplitMasks> {
    let s = dataset.split(index)?;
    let n = dataset.num_nodes();
    let mask = |idx: &[usize]| {
        let mut m = vec![false; n];
        idx.iter().for_each(|&i| m[i] = true);
        m
    };
    Ok(SplitMasks {
        train: mask(&s.train),
        val: mask(&s.val),
        test: mask(&s.test),
    })
}

/// Scales each row to unit sum; all-zero rows are left as they are.
pub fn row_normalize_features(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let total: f64 = row.iter().sum();
        if total != 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    out
}

fn malformed(file: &'static str, reason: impl Into<String>) -> Error {
    DataError::Malformed {
        file,
        reason: reason.into(),
    }
    .into()
}

pub fn encode_edges(edges: &[(u32, u32)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(edges.len() * 8);
    for &(u, v) in edges {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_edges(bytes: &[u8]) -> Result<Vec<(u32, u32)>> {
    if bytes.len() % 8 != 0 {
        return Err(malformed(
            EDGES_FILE,
            format!("{} bytes is not a whole number of u32 pairs", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| {
            (
                u32::from_le_bytes(c[..4].try_into().unwrap()),
                u32::from_le_bytes(c[4..].try_into().unwrap()),
            )
        })
        .collect())
}

/// Narrows to `f32`; values must survive the trip exactly.
pub fn encode_features(x: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(x.data().len() * 4);
    for &v in x.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_features(bytes: &[u8], rows: usize, cols: usize) -> Result<DenseMatrix> {
    if bytes.len() % 4 != 0 {
        return Err(malformed(
            FEATURES_FILE,
            format!("{} bytes is not a whole number of f32 values", bytes.len()),
        ));
    }
    let expected = rows
        .checked_mul(cols)
        .ok_or_else(|| malformed(FEATURES_FILE, "dimensions overflow"))?;
    if bytes.len() / 4 != expected {
        return Err(DataError::CountMismatch {
            what: "feature values vs num_nodes × num_features",
            expected,
            found: bytes.len() / 4,
        }
        .into());
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(malformed(
            FEATURES_FILE,
            format!("non-finite value at row {}, column {}", i / cols, i % cols),
        ));
    }
    DenseMatrix::new(rows, cols, data).map_err(|e| malformed(FEATURES_FILE, e.to_string()))
}

pub fn encode_labels(labels: &[u16]) -> Vec<u8> {
    labels.iter().flat_map(|l| l.to_le_bytes()).collect()
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u16>> {
    if bytes.len() % 2 != 0 {
        return Err(malformed(
            LABELS_FILE,
            format!("{} bytes is not a whole number of u16 values", bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect())
}

pub fn parse_meta(bytes: &[u8]) -> Result<BundleMeta> {
    serde_json::from_slice(bytes).map_err(|e| malformed(META_FILE, e.to_string()))
}

pub fn encode_meta(meta: &BundleMeta) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(meta).expect("meta serializes");
    s.push(b'\n');
    s
}

pub fn parse_splits(bytes: &[u8]) -> Result<Vec<SplitIndices>> {
    serde_json::from_slice(bytes).map_err(|e| malformed(SPLITS_FILE, e.to_string()))
}

pub fn encode_splits(splits: &[SplitIndices]) -> Vec<u8> {
    let mut out = b"[\n".to_vec();
    for (i, s) in splits.iter().enumerate() {
        out.extend_from_slice(b"  ");
        out.extend(serde_json::to_vec(s).expect("splits serialize"));
        if i + 1 < splits.len() {
            out.push(b',');
        }
        out.push(b'\n');
    }
    out.extend_from_slice(b"]\n");
    out
}

/// Raw contents of the five bundle files.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BundleBytes {
    pub meta: Vec<u8>,
    pub edges: Vec<u8>,
    pub features: Vec<u8>,
    pub labels: Vec<u8>,
    pub splits: Vec<u8>,
}

pub fn from_bundle_bytes(b: &BundleBytes) -> Result<GraphDataset> {
    let meta = parse_meta(&b.meta)?;
    let edges = decode_edges(&b.edges)?;
    let features = decode_features(&b.features, meta.num_nodes, meta.num_features)?;
    let labels = decode_labels(&b.labels)?;
    let splits = parse_splits(&b.splits)?;
    GraphDataset::new(meta, edges, features, labels, splits)
}

pub fn to_bundle_bytes(dataset: &GraphDataset) -> Result<BundleBytes> {
    if let Some(v) = dataset
        .features
        .data()
        .iter()
        .find(|&&v| (v as f32) as f64 != v)
    {
        return Err(Error::input(format!(
            "feature value {v} is not exactly representable as a 32-bit float"
        )));
    }
    Ok(BundleBytes {
        meta: encode_meta(&dataset.meta),
        edges: encode_edges(&dataset.stored_edges),
        features: encode_features(&dataset.features),
        labels: encode_labels(&dataset.labels),
        splits: encode_splits(&dataset.splits),
    })
}

fn read_part(dir: &Path, file: &str) -> Result<Vec<u8>> {
    let path = dir.join(file);
    fs::read(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::MissingFile { path }.into(),
        _ => Error::io(path, e),
    })
}

pub fn load_bundle(dir: &Path) -> Result<GraphDataset> {
    let bytes = BundleBytes {
        meta: read_part(dir, META_FILE)?,
        edges: read_part(dir, EDGES_FILE)?,
        features: read_part(dir, FEATURES_FILE)?,
        labels: read_part(dir, LABELS_FILE)?,
        splits: read_part(dir, SPLITS_FILE)?,
    };
    let ds = from_bundle_bytes(&bytes)?;
    if let StatsCheck::Mismatch(diffs) = check_known_statistics(&ds) {
        log::warn!("{}: counts differ from the reference table: {}", ds.name(), diffs.join("; "));
    }
    Ok(ds)
}

pub fn save_bundle(dataset: &GraphDataset, dir: &Path) -> Result<()> {
    let b = to_bundle_bytes(dataset)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (file, data) in [
        (META_FILE, &b.meta),
        (EDGES_FILE, &b.edges),
        (FEATURES_FILE, &b.features),
        (LABELS_FILE, &b.labels),
        (SPLITS_FILE, &b.splits),
    ] {
        let path = dir.join(file);
        fs::write(&path, data).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reference statistics of a published benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KnownStats {
    pub name: &'static str,
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub edges: usize,
    /// Edge count is only given in thousands.
    pub edges_in_thousands: bool,
}

pub const KNOWN_DATASETS: [KnownStats; 8] = [
    KnownStats { name: "cora", nodes: 2708, features: 1433, classes: 7, edges: 5429, edges_in_thousands: false },
    KnownStats { name: "citeseer", nodes: 3327, features: 3703, classes: 6, edges: 4732, edges_in_thousands: false },
    KnownStats { name: "pubmed", nodes: 19717, features: 500, classes: 3, edges: 44338, edges_in_thousands: false },
    KnownStats { name: "cornell", nodes: 183, features: 1703, classes: 5, edges: 295, edges_in_thousands: false },
    KnownStats { name: "texas", nodes: 183, features: 1703, classes: 5, edges: 309, edges_in_thousands: false },
    KnownStats { name: "wisconsin", nodes: 251, features: 1703, classes: 5, edges: 499, edges_in_thousands: false },
    KnownStats { name: "chameleon", nodes: 2277, features: 2325, classes: 5, edges: 36101, edges_in_thousands: false },
    KnownStats { name: "squirrel", nodes: 5201, features: 2089, classes: 5, edges: 198, edges_in_thousands: true },
];

/// Looks a bundle name up in [`KNOWN_DATASETS`]; a `_full` suffix marks the
/// fully supervised variant of the same graph.
pub fn known_stats(name: &str) -> Option<&'static KnownStats> {
    let lower = name.to_ascii_lowercase();
    let base = lower.strip_suffix("_full").unwrap_or(&lower);
    KNOWN_DATASETS.iter().find(|k| k.name == base)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StatsCheck {
    Unknown,
    Match,
    Mismatch(Vec<String>),
}

fn stat_diffs(ds: &GraphDataset, k: &KnownStats) -> Vec<(&'static str, usize, usize)> {
    let m = ds.meta();
    let edges = if k.edges_in_thousands {
        (m.num_edges + 500) / 1000
    } else {
        m.num_edges
    };
    [
        ("nodes", k.nodes, m.num_nodes),
        ("features", k.features, m.num_features),
        ("classes", k.classes, m.num_classes),
        ("edges", k.edges, edges),
    ]
    .into_iter()
    .filter(|(_, expected, found)| expected != found)
    .collect()
}

pub fn check_known_statistics(ds: &GraphDataset) -> StatsCheck {
    let Some(k) = known_stats(ds.name()) else {
        return StatsCheck::Unknown;
    };
    let diffs: Vec<String> = stat_diffs(ds, k)
        .into_iter()
        .map(|(what, expected, found)| format!("{what}: expected {expected}, found {found}"))
        .collect();
    if diffs.is_empty() {
        StatsCheck::Match
    } else {
        StatsCheck::Mismatch(diffs)
    }
}

/// Like [`check_known_statistics`] but a mismatch is an error.
pub fn require_known_statistics(ds: &GraphDataset) -> Result<StatsCheck> {
    let Some(k) = known_stats(ds.name()) else {
        return Ok(StatsCheck::Unknown);
    };
    match stat_diffs(ds, k).first() {
        None => Ok(StatsCheck::Match),
        Some(&(what, expected, found)) => Err(DataError::CountMismatch {
            what: match what {
                "nodes" => "nodes vs reference table",
                "features" => "features vs reference table",
                "classes" => "classes vs reference table",
                _ => "edges vs reference table",
            },
            expected,
            found,
        }
        .into()),
    }
}
