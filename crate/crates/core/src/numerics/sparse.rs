use super::pairwise_sum_by;
use crate::error::{Error, Result};

/// Compressed sparse row storage for a data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowMatrix {
    rows: usize,
    cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRowMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != rows + 1 {
            return Err(Error::DimensionMismatch {
                expected: rows + 1,
                got: offsets.len(),
            });
        }
        if indices.len() != values.len() || offsets[rows] != indices.len() || offsets[0] != 0 {
            return Err(Error::InvalidConfig(
                "row offsets do not cover the index/value arrays".into(),
            ));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("row offsets must be nondecreasing".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= cols) {
            return Err(Error::InvalidConfig(format!(
                "column index {bad} outside [0, {cols})"
            )));
        }
        if !super::all_finite(&values) {
            return Err(Error::NonFinite("sparse values"));
        }
        Ok(SparseRowMatrix {
            rows,
            cols,
            offsets,
            indices,
            values,
        })
    }

    /// Keeps every entry of `rows`, including explicit zeros.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            for (j, &v) in r.iter().enumerate() {
                indices.push(j);
                values.push(v);
            }
            offsets.push(indices.len());
        }
        Self::new(rows.len(), cols, offsets, indices, values)
    }

    /// Same rows with a wider column space (extra columns are all zero).
    pub fn with_cols(mut self, cols: usize) -> Result<Self> {
        if cols < self.cols {
            return Err(Error::InvalidConfig(format!(
                "cannot shrink {} columns to {cols}",
                self.cols
            )));
        }
        self.cols = cols;
        Ok(self)
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

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        pairwise_sum_by(0..idx.len(), &|k| val[k] * x[idx[k]])
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        let (_, val) = self.row(i);
        pairwise_sum_by(0..val.len(), &|k| val[k] * val[k])
    }

    pub fn max_row_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row_norm_sq(i).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        let (idx, val) = self.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            out[j] += v;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row_dot(i, x)).collect()
    }
}
