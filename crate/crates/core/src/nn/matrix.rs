use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn shape_error(op: &'static str, expected: String, found: String) -> Error {
    Error::ShapeMismatch {
        op,
        expected,
        found,
    }
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_error(
                "from_vec",
                format!("{} values", rows * cols),
                format!("{}", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(shape_error(
                "from_rows",
                format!("{cols} columns"),
                format!("{}", bad.len()),
            ));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(shape_error(
                "matmul",
                format!("{} rows on the right", self.cols),
                format!("{}", other.rows),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(shape_error(
                "t_matmul",
                format!("{} rows on the right", self.rows),
                format!("{}", other.rows),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(shape_error(
                "matmul_t",
                format!("{} columns on the right", self.cols),
                format!("{}", other.cols),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.data[i * other.rows + j] = self
                    .row(i)
                    .iter()
                    .zip(other.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    pub fn add_row_vector(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.cols {
            return Err(shape_error(
                "add_row_vector",
                format!("{}", self.cols),
                format!("{}", v.len()),
            ));
        }
        for row in self.data.chunks_mut(self.cols.max(1)) {
            for (x, b) in row.iter_mut().zip(v) {
                *x += b;
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(shape_error(
                "add_assign",
                format!("{:?}", self.shape()),
                format!("{:?}", other.shape()),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols.max(1)) {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= rows || j >= cols) {
            return Err(shape_error(
                "from_triplets",
                format!("indices within {rows}x{cols}"),
                format!("({i}, {j})"),
            ));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            last = Some((i, j));
            indices.push(j);
            values.push(v);
            indptr[i + 1] += 1;
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    /// `self · x`.
    pub fn matmul(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != x.rows() {
            return Err(shape_error(
                "sparse matmul",
                format!("{} rows on the right", self.cols),
                format!("{}", x.rows()),
            ));
        }
        let width = x.cols();
        let mut out = DenseMatrix::zeros(self.rows, width);
        for i in 0..self.rows {
            let dst = &mut out.data_mut()[i * width..(i + 1) * width];
            for (k, a) in self.row(i) {
                for (d, &b) in dst.iter_mut().zip(x.row(k)) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x`.
    pub fn t_matmul(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != x.rows() {
            return Err(shape_error(
                "sparse t_matmul",
                format!("{} rows on the right", self.rows),
                format!("{}", x.rows()),
            ));
        }
        let width = x.cols();
        let mut out = DenseMatrix::zeros(self.cols, width);
        for i in 0..self.rows {
            let src = x.row(i);
            for (j, a) in self.row(i) {
                let dst = &mut out.data_mut()[j * width..(j + 1) * width];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }
}

fn renormalized(
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    add_self_loops: bool,
) -> Result<Vec<(usize, usize, f64)>> {
    if let Some(&(i, j, w)) = entries.iter().find(|e| !(e.2 >= 0.0) || !e.2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "adjacency weight {w} at ({i}, {j}) must be finite and non-negative"
        )));
    }
    let mut entries = entries;
    if add_self_loops {
        entries.extend((0..n).map(|i| (i, i, 1.0)));
    }
    let mut degree = vec![0.0; n];
    for &(i, _, w) in &entries {
        degree[i] += w;
    }
    let scale: Vec<f64> = degree
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    Ok(entries
        .into_iter()
        .map(|(i, j, w)| (i, j, scale[i] * w * scale[j]))
        .collect())
}

/// `D̃^(-1/2) (A + I) D̃^(-1/2)` with `D̃` the row sums of `A + I`.
///
/// Rows of `A` are receivers: `a[i][j]` is the weight of the message from
/// `j` to `i`. Without self-loops, zero-degree rows stay zero.
pub fn normalize_adjacency(a: &DenseMatrix, add_self_loops: bool) -> Result<DenseMatrix> {
    if a.rows() != a.cols() {
        return Err(shape_error(
            "normalize_adjacency",
            "square matrix".into(),
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    let n = a.rows();
    let entries = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter_map(|(i, j)| {
            let w = a.get(i, j);
            (w != 0.0).then_some((i, j, w))
        })
        .collect();
    Ok(SparseMatrix::from_triplets(n, n, renormalized(n, entries, add_self_loops)?)?.to_dense())
}

/// Sparse counterpart of [`normalize_adjacency`] for `(receiver, sender,
/// weight)` entries over `n` nodes.
pub fn normalize_sparse(
    n: usize,
    entries: impl IntoIterator<Item = (usize, usize, f64)>,
    add_self_loops: bool,
) -> Result<SparseMatrix> {
    let entries: Vec<_> = entries.into_iter().collect();
    // merge duplicates before computing degrees
    let merged = SparseMatrix::from_triplets(n, n, entries)?;
    let entries = (0..n)
        .flat_map(|i| merged.row(i).map(move |(j, w)| (i, j, w)))
        .collect();
    SparseMatrix::from_triplets(n, n, renormalized(n, entries, add_self_loops)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.0, -1.0, 3.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![2.0, 0.0], vec![-1.0, 4.0]]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.data(), &[5.0, 0.5, -5.0, 12.0]);
        assert_eq!(a.transpose().t_matmul(&b).unwrap(), ab);
        assert_eq!(a.matmul_t(&b.transpose()).unwrap(), ab);
        let s = SparseMatrix::from_dense(&a);
        assert_eq!(s.nnz(), 4);
        assert_eq!(s.matmul(&b).unwrap(), ab);
        assert_eq!(
            s.t_matmul(&DenseMatrix::identity(2)).unwrap(),
            a.transpose()
        );
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let s = SparseMatrix::from_triplets(2, 2, [(1, 0, 1.0), (0, 1, 2.0), (1, 0, 0.5)]).unwrap();
        assert_eq!(s.to_dense().data(), &[0.0, 2.0, 1.5, 0.0]);
        assert!(SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn single_edge_normalization() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let n = normalize_adjacency(&a, true).unwrap();
        for x in n.data() {
            assert!((x - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_graph_normalizes_to_identity() {
        let n = normalize_adjacency(&DenseMatrix::zeros(3, 3), true).unwrap();
        assert_eq!(n, DenseMatrix::identity(3));
        let n = normalize_adjacency(&DenseMatrix::zeros(3, 3), false).unwrap();
        assert_eq!(n, DenseMatrix::zeros(3, 3));
    }

    #[test]
    fn directed_support_is_preserved() {
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![1.0, 3.0, 0.0],
        ])
        .unwrap();
        let n = normalize_adjacency(&a, true).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let structural = a.get(i, j) != 0.0 || i == j;
                assert_eq!(n.get(i, j) != 0.0, structural, "({i}, {j})");
            }
        }
        let sparse = normalize_sparse(3, [(0, 1, 2.0), (2, 0, 1.0), (2, 1, 3.0)], true).unwrap();
        assert_eq!(sparse.to_dense(), n);
    }

    #[test]
    fn negative_weights_rejected() {
        let a = DenseMatrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(normalize_adjacency(&a, true).is_err());
        assert!(normalize_adjacency(&DenseMatrix::zeros(2, 3), true).is_err());
    }
}
