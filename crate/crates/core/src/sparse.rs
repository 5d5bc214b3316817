//! Compressed-sparse-row operators built from undirected edge lists.

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Square CSR matrix. Column indices are strictly increasing within a row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

/// Per-node row sums of an adjacency matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeVector(pub Vec<f64>);

impl DegreeVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// `d^{-1/2}` with zero-degree entries mapped to zero.
    pub fn inv_sqrt(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect()
    }
}

impl SparseMatrix {
    /// Validates and wraps raw CSR arrays.
    pub fn from_csr(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n + 1 {
            return Err(Error::input(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets[n] != col_indices.len() {
            return Err(Error::input("row_offsets must start at 0 and end at nnz"));
        }
        if col_indices.len() != values.len() {
            return Err(Error::input("col_indices and values differ in length"));
        }
        for i in 0..n {
            let (a, b) = (row_offsets[i], row_offsets[i + 1]);
            if a > b {
                return Err(Error::input(format!("row_offsets decrease at row {i}")));
            }
            let cols = &col_indices[a..b];
            if cols.iter().any(|&c| c >= n) {
                return Err(Error::input(format!("column index out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::input(format!(
                    "column indices not strictly increasing in row {i}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite sparse value"));
        }
        Ok(Self {
            n,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Converts a dense square matrix, keeping exact nonzeros.
    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::input("sparse operators must be square"));
        }
        let n = m.rows();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..n {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self::from_csr(n, row_offsets, col_indices, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn degrees(&self) -> DegreeVector {
        DegreeVector((0..self.n).map(|i| self.row(i).1.iter().sum()).collect())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in order, so each output row receives ascending columns.
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = next[j];
                col_indices[p] = i;
                values[p] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            n: self.n,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Entry `(i, j)` stored iff `(j, i)` stored.
    pub fn is_structurally_symmetric(&self) -> bool {
        let t = self.transpose();
        t.row_offsets == self.row_offsets && t.col_indices == self.col_indices
    }

    /// Every stored edge `(i, j)` with `i < j`.
    pub fn upper_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for &j in self.row(i).0 {
                if j > i {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Binary undirected adjacency. Duplicate edges collapse, raw self-loops are
/// dropped, and the diagonal is set to one iff `add_self_loops`.
pub fn build_adjacency(
    edges: &[(usize, usize)],
    n: usize,
    add_self_loops: bool,
) -> Result<SparseMatrix> {
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(edges.len() * 2 + n);
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(Error::input(format!(
                "edge ({u}, {v}) references a node outside 0..{n}"
            )));
        }
        if u != v {
            pairs.push((u, v));
            pairs.push((v, u));
        }
    }
    if add_self_loops {
        pairs.extend((0..n).map(|i| (i, i)));
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut row_offsets = vec![0usize; n + 1];
    for &(r, _) in &pairs {
        row_offsets[r + 1] += 1;
    }
    for i in 0..n {
        row_offsets[i + 1] += row_offsets[i];
    }
    let col_indices = pairs.iter().map(|&(_, c)| c).collect();
    Ok(SparseMatrix {
        n,
        row_offsets,
        col_indices,
        values: vec![1.0; pairs.len()],
    })
}

/// `D^{-1/2} A D^{-1/2}` using the row sums of `adj` as degrees.
/// Zero-degree nodes get zero rows and columns.
pub fn sym_normalize(adj: &SparseMatrix) -> SparseMatrix {
    let deg = adj.degrees().0;
    let mut values = Vec::with_capacity(adj.nnz());
    for i in 0..adj.n {
        let (cols, vals) = adj.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            // One rounding in the square root keeps regular graphs exact.
            let dd = deg[i] * deg[j];
            values.push(if dd > 0.0 { v / dd.sqrt() } else { 0.0 });
        }
    }
    SparseMatrix {
        n: adj.n,
        row_offsets: adj.row_offsets.clone(),
        col_indices: adj.col_indices.clone(),
        values,
    }
}

/// Sparse × dense product. Each output row accumulates its terms in column
/// order, so the result is independent of how rows are scheduled.
pub fn spmm(s: &SparseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if s.n != x.rows() {
        return Err(Error::input(format!(
            "spmm shape mismatch: {}x{} · {}x{}",
            s.n,
            s.n,
            x.rows(),
            x.cols()
        )));
    }
    let d = x.cols();
    let mut out = vec![0.0; s.n * d];
    if d > 0 {
        out.par_chunks_mut(d).enumerate().for_each(|(i, orow)| {
            let (cols, vals) = s.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, &xv) in orow.iter_mut().zip(x.row(j)) {
                    *o += v * xv;
                }
            }
        });
    }
    Ok(DenseMatrix::from_raw(s.n, d, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn adjacency_single_edge() {
        let a = build_adjacency(&[(0, 1)], 2, true).unwrap();
        assert_eq!(a.to_dense(), dense(&[&[1.0, 1.0], &[1.0, 1.0]]));
        let a = build_adjacency(&[(0, 1)], 2, false).unwrap();
        assert_eq!(a.to_dense(), dense(&[&[0.0, 1.0], &[1.0, 0.0]]));
    }

    #[test]
    fn adjacency_dedups_and_drops_raw_loops() {
        let a = build_adjacency(&[(0, 1), (1, 0), (0, 0)], 2, false).unwrap();
        assert_eq!(a.to_dense(), dense(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert!(a.is_structurally_symmetric());
    }

    #[test]
    fn adjacency_rejects_out_of_range() {
        assert!(matches!(
            build_adjacency(&[(0, 2)], 2, false),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn normalize_two_nodes() {
        let a = build_adjacency(&[(0, 1)], 2, true).unwrap();
        let s = sym_normalize(&a);
        assert_eq!(s.to_dense(), dense(&[&[0.5, 0.5], &[0.5, 0.5]]));
    }

    #[test]
    fn normalize_path_with_loops() {
        // d̃ = (2, 3, 2); S(0,1) = 1/√(2·3).
        let a = build_adjacency(&[(0, 1), (1, 2)], 3, true).unwrap();
        assert_eq!(a.degrees().0, vec![2.0, 3.0, 2.0]);
        let s = sym_normalize(&a);
        assert!((s.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((s.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_isolated_node_is_zero_row() {
        let a = build_adjacency(&[(0, 1)], 3, false).unwrap();
        let s = sym_normalize(&a).to_dense();
        assert_eq!(s.row(2), &[0.0, 0.0, 0.0]);
        assert_eq!(s.get(0, 2), 0.0);
    }

    #[test]
    fn spmm_identity_and_average() {
        let x = dense(&[&[1.0, -2.0], &[3.0, 4.0]]);
        assert_eq!(spmm(&SparseMatrix::identity(2), &x).unwrap(), x);
        let s = SparseMatrix::from_dense(&dense(&[&[0.5, 0.5], &[0.5, 0.5]])).unwrap();
        let y = spmm(&s, &dense(&[&[1.0], &[3.0]])).unwrap();
        assert_eq!(y.data(), &[2.0, 2.0]);
        assert!(spmm(&s, &dense(&[&[1.0]])).is_err());
    }

    #[test]
    fn from_csr_validates() {
        assert!(SparseMatrix::from_csr(2, vec![0, 1, 2], vec![1, 0], vec![1.0, 1.0]).is_ok());
        assert!(SparseMatrix::from_csr(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(2, vec![0, 1, 2], vec![1, 2], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::from_csr(2, vec![1, 1, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn transpose_round_trips() {
        let m = dense(&[&[0.0, 2.0, 0.0], &[1.0, 0.0, 3.0], &[0.0, 0.0, 4.0]]);
        let s = SparseMatrix::from_dense(&m).unwrap();
        assert_eq!(s.transpose().to_dense(), m.transpose());
        assert_eq!(s.transpose().transpose(), s);
    }
}
