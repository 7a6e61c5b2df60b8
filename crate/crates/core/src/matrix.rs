//! Dense input matrices and coordinate-form sketches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Wraps row-major `data`. Only the length is checked here; see [`Matrix::validate`].
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

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

    pub fn from_diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(m * n);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::InvalidParameter("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: m, cols: n, data })
    }

    /// Checks `m, n >= 1` and that every entry is finite.
    pub fn validate(self) -> Result<Self> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::EmptyMatrix {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if let Some(k) = self.data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: k / self.cols,
                col: k % self.cols,
            });
        }
        Ok(self)
    }

    pub(crate) fn check_valid(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::EmptyMatrix {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if let Some(k) = self.data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: k / self.cols,
                col: k % self.cols,
            });
        }
        Ok(())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0.0).count()
    }

    /// Iterates `(i, j, A_ij)` over nonzero entries in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.cols;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(k, &v)| (k / n, k % n, v))
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let l = other.cols;
        let mut out = Matrix::zeros(self.rows, l);
        for i in 0..self.rows {
            let orow = &mut out.data[i * l..(i + 1) * l];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * other`.
    pub fn tmatmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "tmatmul shape mismatch");
        let l = other.cols;
        let mut out = Matrix::zeros(self.cols, l);
        for i in 0..self.rows {
            let brow = other.row(i);
            for (j, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let orow = &mut out.data[j * l..(j + 1) * l];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "sub shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "add shape mismatch");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Columns `0..k` as a new matrix.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        assert!(k <= self.cols);
        Matrix::from_fn(self.rows, k, |i, j| self.get(i, j))
    }
}

/// One stream element or sketch entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Triple {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Self { row, col, value }
    }
}

/// Coordinate-form sketch with at most one entry per `(i, j)`, sorted row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSketch {
    rows: usize,
    cols: usize,
    entries: Vec<Triple>,
    samples: usize,
}

impl SparseSketch {
    /// Sums per-draw contributions into one entry per position. The merge
    /// sorts first, so the result does not depend on the input order.
    pub fn from_contributions(
        rows: usize,
        cols: usize,
        samples: usize,
        mut contributions: Vec<Triple>,
    ) -> Result<Self> {
        for t in &contributions {
            check_index(t, rows, cols)?;
        }
        contributions.sort_by(|a, b| {
            (a.row, a.col)
                .cmp(&(b.row, b.col))
                .then(a.value.total_cmp(&b.value))
        });
        let mut entries: Vec<Triple> = Vec::with_capacity(contributions.len());
        for t in contributions {
            match entries.last_mut() {
                Some(last) if last.row == t.row && last.col == t.col => last.value += t.value,
                _ => entries.push(t),
            }
        }
        let sketch = Self {
            rows,
            cols,
            entries,
            samples,
        };
        sketch.check_budget()?;
        Ok(sketch)
    }

    /// Builds from already accumulated triples; duplicate positions are rejected.
    pub fn from_triples(
        rows: usize,
        cols: usize,
        samples: usize,
        mut entries: Vec<Triple>,
    ) -> Result<Self> {
        for t in &entries {
            check_index(t, rows, cols)?;
            if !t.value.is_finite() {
                return Err(Error::NonFinite {
                    row: t.row,
                    col: t.col,
                });
            }
        }
        entries.sort_by_key(|t| (t.row, t.col));
        if let Some(w) = entries
            .windows(2)
            .find(|w| w[0].row == w[1].row && w[0].col == w[1].col)
        {
            return Err(Error::InvalidParameter(format!(
                "duplicate entry ({}, {})",
                w[0].row, w[0].col
            )));
        }
        let sketch = Self {
            rows,
            cols,
            entries,
            samples,
        };
        sketch.check_budget()?;
        Ok(sketch)
    }

    /// Exact copy of the nonzeros of `a`, with `samples = nnz(a)`.
    pub fn from_dense(a: &Matrix) -> Self {
        let entries: Vec<Triple> = a.nonzeros().map(|(i, j, v)| Triple::new(i, j, v)).collect();
        let samples = entries.len().max(1);
        Self {
            rows: a.rows(),
            cols: a.cols(),
            entries,
            samples,
        }
    }

    fn check_budget(&self) -> Result<()> {
        if self.entries.len() > self.samples {
            return Err(Error::InvalidParameter(format!(
                "{} distinct entries exceed the sample count {}",
                self.entries.len(),
                self.samples
            )));
        }
        Ok(())
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

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn entries(&self) -> &[Triple] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|t| t.value.abs()).sum()
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.entries.iter().map(|t| t.value * t.value).sum()
    }

    pub fn densify(&self) -> Matrix {
        densify(self)
    }
}

fn check_index(t: &Triple, rows: usize, cols: usize) -> Result<()> {
    if t.row >= rows || t.col >= cols {
        return Err(Error::IndexOutOfBounds {
            row: t.row,
            col: t.col,
            rows,
            cols,
        });
    }
    Ok(())
}

/// Returns `a` if it has at least one entry and all entries are finite.
pub fn validate_matrix(a: Matrix) -> Result<Matrix> {
    a.validate()
}

/// Dense form of a sketch: stored values at their positions, zero elsewhere.
pub fn densify(sketch: &SparseSketch) -> Matrix {
    let mut m = Matrix::zeros(sketch.rows, sketch.cols);
    for t in &sketch.entries {
        m.set(t.row, t.col, t.value);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validate_passes_good_matrix() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(a.clone().validate().unwrap(), a);
    }

    #[test]
    fn validate_rejects_nan() {
        let a = Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap();
        assert!(matches!(a.validate(), Err(Error::NonFinite { row: 0, col: 0 })));
    }

    #[test]
    fn validate_rejects_empty() {
        let a = Matrix::from_vec(0, 3, vec![]).unwrap();
        assert!(matches!(
            validate_matrix(a),
            Err(Error::EmptyMatrix { rows: 0, cols: 3 })
        ));
    }

    #[test]
    fn densify_single_triple() {
        let s = SparseSketch::from_triples(2, 2, 1, vec![Triple::new(0, 0, 3.0)]).unwrap();
        assert_eq!(
            densify(&s),
            Matrix::from_rows(&[[3.0, 0.0], [0.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn densify_empty_is_zero() {
        let s = SparseSketch::from_triples(2, 3, 1, vec![]).unwrap();
        assert_eq!(densify(&s), Matrix::zeros(2, 3));
    }

    #[test]
    fn densify_full_copy() {
        let a = Matrix::from_rows(&[[1.0, -2.0], [3.5, 4.0]]).unwrap();
        assert_eq!(densify(&SparseSketch::from_dense(&a)), a);
    }

    #[test]
    fn contributions_accumulate() {
        let c = vec![
            Triple::new(1, 0, 0.5),
            Triple::new(0, 1, 1.0),
            Triple::new(1, 0, 0.25),
        ];
        let s = SparseSketch::from_contributions(2, 2, 3, c).unwrap();
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.entries()[0], Triple::new(0, 1, 1.0));
        assert_eq!(s.entries()[1], Triple::new(1, 0, 0.75));
    }

    #[test]
    fn duplicate_triples_rejected() {
        let r = SparseSketch::from_triples(
            2,
            2,
            2,
            vec![Triple::new(0, 0, 1.0), Triple::new(0, 0, 2.0)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn out_of_bounds_rejected() {
        let r = SparseSketch::from_triples(2, 2, 1, vec![Triple::new(2, 0, 1.0)]);
        assert!(matches!(r, Err(Error::IndexOutOfBounds { .. })));
    }

    #[test]
    fn budget_enforced() {
        let r = SparseSketch::from_triples(
            2,
            2,
            1,
            vec![Triple::new(0, 0, 1.0), Triple::new(1, 1, 1.0)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn matmul_and_transpose_agree() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 0.0], [0.0, -1.0, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0]]).unwrap();
        let direct = a.tmatmul(&b);
        let via = a.transpose().matmul(&b);
        assert_eq!(direct, via);
        assert_eq!(direct.get(1, 0), 2.0 - 2.0);
        assert_eq!(direct.get(2, 1), 3.0);
    }

    proptest! {
        #[test]
        fn densify_round_trip_is_bitwise(
            vals in proptest::collection::vec(-1e6f64..1e6, 1..30),
            cols in 1usize..6,
        ) {
            let rows = vals.len().div_ceil(cols);
            let mut data = vals.clone();
            data.resize(rows * cols, 0.0);
            let a = Matrix::from_vec(rows, cols, data).unwrap();
            let s = SparseSketch::from_dense(&a);
            let d = densify(&s);
            for (x, y) in a.as_slice().iter().zip(d.as_slice()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
