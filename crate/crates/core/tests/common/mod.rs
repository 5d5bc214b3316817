#![allow(dead_code)]

pub mod props;

use gpnet::classifier::{forward, ModelParams};
use gpnet::data::{BundleMeta, GraphDataset, SplitIndices};
use gpnet::filter::{propagate_features, FilterConfig, PropagateOptions};
use gpnet::sparse::{build_adjacency, sym_normalize};
use gpnet::{DenseMatrix, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_edges<R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let mut e = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                e.push((i, j));
            }
        }
    }
    e
}

/// Random spanning tree plus Erdős–Rényi extras.
pub fn connected_edges<R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let mut e: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    e.extend(random_edges(n, p, rng));
    e
}

pub fn random_dense<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

pub fn operator(edges: &[(usize, usize)], n: usize, loops: bool) -> SparseMatrix {
    sym_normalize(&build_adjacency(edges, n, loops).unwrap())
}

/// Triple loop, no tricks.
pub fn naive_matmul(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(a.cols(), b.rows());
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

pub fn dense_power(m: &DenseMatrix, p: usize) -> DenseMatrix {
    let mut out = DenseMatrix::identity(m.rows());
    for _ in 0..p {
        out = naive_matmul(&out, m);
    }
    out
}

/// `m^p` by repeated squaring.
pub fn fast_power(m: &DenseMatrix, mut p: usize) -> DenseMatrix {
    let mut base = m.clone();
    let mut out = DenseMatrix::identity(m.rows());
    while p > 0 {
        if p & 1 == 1 {
            out = out.matmul(&base).unwrap();
        }
        base = base.matmul(&base).unwrap();
        p >>= 1;
    }
    out
}

pub fn logits(h: &DenseMatrix, w: &DenseMatrix) -> DenseMatrix {
    let params = ModelParams {
        weights: w.clone(),
        bias: None,
    };
    forward(h, &params).unwrap().logits
}

pub fn propagate_default(config: &FilterConfig, s: &SparseMatrix, x: &DenseMatrix) -> DenseMatrix {
    propagate_features(config, s, x, &PropagateOptions::default()).unwrap()
}

pub fn bitwise_eq(a: &DenseMatrix, b: &DenseMatrix) -> bool {
    a.shape() == b.shape()
        && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Hand-built 4-node bundle with one split.
pub fn toy_dataset() -> GraphDataset {
    GraphDataset::new(
        BundleMeta {
            name: "toy".into(),
            num_nodes: 4,
            num_edges: 4,
            num_features: 3,
            num_classes: 2,
            features_row_normalized: false,
        },
        vec![(0, 1), (1, 2), (2, 3), (3, 0)],
        DenseMatrix::from_rows(&[
            [1.0, 0.0, 0.5],
            [0.0, 1.0, 0.25],
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 2.0],
        ])
        .unwrap(),
        vec![0, 1, 0, 1],
        vec![SplitIndices {
            train: vec![0, 1],
            val: vec![2],
            test: vec![3],
        }],
    )
    .unwrap()
}
