//! Planted-partition graphs with class-correlated bag-of-words features.
//!
//! Used to exercise the full pipeline at realistic sizes when no converted
//! benchmark bundle is at hand.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{BundleMeta, GraphDataset, SplitIndices};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub name: String,
    pub nodes: usize,
    pub classes: usize,
    pub features: usize,
    /// Stored edge pairs.
    pub edges: usize,
    /// Probability that an edge joins two nodes of the same class.
    pub homophily: f64,
    /// Active words per node.
    pub words_per_node: usize,
    /// Probability that a word is drawn from the node's class vocabulary.
    pub signal: f64,
    pub splits: SplitScheme,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SplitScheme {
    /// One split: `per_class` training nodes per class, then `val` and `test` nodes.
    Public { per_class: usize, val: usize, test: usize },
    /// `count` random splits with the given train and validation fractions.
    Random { count: usize, train: f64, val: f64 },
}

impl SyntheticSpec {
    /// Same counts as the Cora citation graph.
    pub fn cora_shaped(homophily: f64, seed: u64) -> Self {
        Self {
            name: "synthetic-cora".into(),
            nodes: 2708,
            classes: 7,
            features: 1433,
            edges: 5429,
            homophily,
            words_per_node: 18,
            signal: 0.3,
            splits: SplitScheme::Public { per_class: 20, val: 500, test: 1000 },
            seed,
        }
    }

    /// Same counts as the Pubmed citation graph.
    pub fn pubmed_shaped(homophily: f64, seed: u64) -> Self {
        Self {
            name: "synthetic-pubmed".into(),
            nodes: 19717,
            classes: 3,
            features: 500,
            edges: 44338,
            homophily,
            words_per_node: 50,
            signal: 0.3,
            splits: SplitScheme::Public { per_class: 20, val: 500, test: 1000 },
            seed,
        }
    }
}

pub fn generate(spec: &SyntheticSpec) -> Result<GraphDataset> {
    if spec.classes == 0 || spec.nodes < spec.classes || spec.features < spec.classes {
        return Err(Error::input("need at least one node and one feature per class"));
    }
    if !(0.0..=1.0).contains(&spec.homophily) || !(0.0..=1.0).contains(&spec.signal) {
        return Err(Error::input("homophily and signal must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes;
    let labels: Vec<u16> = (0..n).map(|i| (i % spec.classes) as u16).collect();
    let mut by_class: Vec<Vec<u32>> = vec![Vec::new(); spec.classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i as u32);
    }

    let mut edges = Vec::with_capacity(spec.edges);
    while edges.len() < spec.edges {
        let u = rng.random_range(0..n) as u32;
        let cu = labels[u as usize] as usize;
        let same = spec.classes == 1 || rng.random::<f64>() < spec.homophily;
        let pool = if same {
            &by_class[cu]
        } else {
            let mut c = rng.random_range(0..spec.classes - 1);
            if c >= cu {
                c += 1;
            }
            &by_class[c]
        };
        let v = pool[rng.random_range(0..pool.len())];
        if u != v {
            edges.push((u, v));
        }
    }

    let block = spec.features / spec.classes;
    let mut x = vec![0.0; n * spec.features];
    for i in 0..n {
        let c = labels[i] as usize;
        for _ in 0..spec.words_per_node {
            let w = if rng.random::<f64>() < spec.signal {
                c * block + rng.random_range(0..block)
            } else {
                rng.random_range(0..spec.features)
            };
            x[i * spec.features + w] = 1.0;
        }
    }
    let features = DenseMatrix::new(n, spec.features, x)?;

    let splits = match spec.splits {
        SplitScheme::Public { per_class, val, test } => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut taken = vec![0usize; spec.classes];
            let mut train = Vec::new();
            let mut rest = Vec::new();
            for i in order {
                let c = labels[i] as usize;
                if taken[c] < per_class {
                    taken[c] += 1;
                    train.push(i);
                } else {
                    rest.push(i);
                }
            }
            if rest.len() < val + test {
                return Err(Error::input("too few nodes for the requested split sizes"));
            }
            train.sort_unstable();
            let mut v = rest[..val].to_vec();
            let mut t = rest[val..val + test].to_vec();
            v.sort_unstable();
            t.sort_unstable();
            vec![SplitIndices { train, val: v, test: t }]
        }
        SplitScheme::Random { count, train, val } => (0..count)
            .map(|_| {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let a = ((n as f64) * train).round() as usize;
                let b = (a + ((n as f64) * val).round() as usize).min(n);
                let mut parts = [order[..a].to_vec(), order[a..b].to_vec(), order[b..].to_vec()];
                parts.iter_mut().for_each(|p| p.sort_unstable());
                let [train, val, test] = parts;
                SplitIndices { train, val, test }
            })
            .collect(),
    };

    GraphDataset::new(
        BundleMeta {
            name: spec.name.clone(),
            num_nodes: n,
            num_edges: edges.len(),
            num_features: spec.features,
            num_classes: spec.classes,
            features_row_normalized: false,
        },
        edges,
        features,
        labels,
        splits,
    )
}
