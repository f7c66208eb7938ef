//! Compressed sparse row matrices and the kernels the encoder needs.
//!
//! The perception matrix maps electrode amplitudes to percept brightness and
//! is typically very sparse, so everything downstream (solver, baselines,
//! harness) works on this CSR representation. Matrices are immutable after
//! construction and all stored values are finite and non-negative.

use crate::error::{Error, Result};

/// One matrix entry in coordinate form, used during assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooTriplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl CooTriplet {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        CooTriplet { row, col, value }
    }
}

/// Immutable CSR matrix with non-negative finite values.
///
/// Invariants, enforced at construction:
/// - `indptr` is non-decreasing, `indptr[0] == 0`, `indptr[rows] == nnz`
/// - column indices strictly increase within each row and are `< cols`
/// - every stored value is finite and `>= 0`
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

/// Size report for a matrix; `bytes_estimate` uses the SPMX on-disk widths
/// (u64 indptr, u32 indices, f32 values, 32-byte header).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityStats {
    pub nnz: usize,
    pub density_percent: f64,
    pub bytes_estimate: usize,
}

impl CsrMatrix {
    /// Builds a canonical CSR matrix from raw parts, validating every invariant.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 {
            return Err(Error::DimensionMismatch {
                expected: rows + 1,
                got: indptr.len(),
                context: "indptr length",
            });
        }
        if indptr[0] != 0 {
            return Err(Error::InvalidValue("indptr[0] must be 0".into()));
        }
        let nnz = *indptr.last().unwrap();
        if indices.len() != nnz || values.len() != nnz {
            return Err(Error::DimensionMismatch {
                expected: nnz,
                got: indices.len().max(values.len()),
                context: "indices/values length vs indptr[rows]",
            });
        }
        for w in indptr.windows(2) {
            if w[1] < w[0] {
                return Err(Error::InvalidValue("indptr must be non-decreasing".into()));
            }
        }
        for r in 0..rows {
            let row = &indices[indptr[r]..indptr[r + 1]];
            for (k, &c) in row.iter().enumerate() {
                if c >= cols {
                    return Err(Error::TripletOutOfBounds { row: r, col: c, rows, cols });
                }
                if k > 0 && row[k - 1] >= c {
                    return Err(Error::InvalidValue(format!(
                        "indices not strictly increasing in row {r}"
                    )));
                }
            }
        }
        for &v in &values {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidValue(format!(
                    "stored values must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(CsrMatrix { rows, cols, indptr, indices, values })
    }

    /// Assembles a matrix from coordinate triplets. Duplicate `(row, col)`
    /// entries are summed; zero-valued results are dropped.
    pub fn from_triplets(triplets: &[CooTriplet], rows: usize, cols: usize) -> Result<Self> {
        for t in triplets {
            if t.row >= rows || t.col >= cols {
                return Err(Error::TripletOutOfBounds { row: t.row, col: t.col, rows, cols });
            }
            if !t.value.is_finite() {
                return Err(Error::InvalidValue(format!(
                    "triplet ({}, {}) has non-finite value {}",
                    t.row, t.col, t.value
                )));
            }
        }
        let mut sorted: Vec<CooTriplet> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.row, a.col).cmp(&(b.row, b.col)));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let (r, c) = (sorted[i].row, sorted[i].col);
            let mut v = sorted[i].value;
            i += 1;
            while i < sorted.len() && sorted[i].row == r && sorted[i].col == c {
                v += sorted[i].value;
                i += 1;
            }
            if v != 0.0 {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidValue(format!(
                        "entry ({r}, {c}) sums to {v}; stored values must be finite and >= 0"
                    )));
                }
                indices.push(c);
                values.push(v);
            }
            indptr[r + 1] = indices.len();
        }
        // rows with no entries inherit the running offset
        for r in 1..=rows {
            indptr[r] = indptr[r].max(indptr[r - 1]);
        }
        CsrMatrix::from_parts(rows, cols, indptr, indices, values)
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

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates the stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = CooTriplet> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1])
                .map(move |k| CooTriplet::new(r, self.indices[k], self.values[k]))
        })
    }

    /// Largest stored value, or 0 for an empty matrix.
    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `y = A s`, writing into a caller-provided buffer. Cost O(nnz).
    pub fn spmv_into(&self, s: &[f64], y: &mut [f64]) -> Result<()> {
        if s.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: s.len(),
                context: "spmv input length",
            });
        }
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: y.len(),
                context: "spmv output length",
            });
        }
        for r in 0..self.rows {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * s[self.indices[k]];
            }
            y[r] = acc;
        }
        Ok(())
    }

    /// `y = A s`.
    pub fn spmv(&self, s: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.rows];
        self.spmv_into(s, &mut y)?;
        Ok(y)
    }

    /// `g = A^T r` without materializing the transpose (row-order scatter).
    pub fn spmv_transpose_into(&self, r: &[f64], g: &mut [f64]) -> Result<()> {
        if r.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: r.len(),
                context: "spmv_transpose input length",
            });
        }
        if g.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: g.len(),
                context: "spmv_transpose output length",
            });
        }
        g.fill(0.0);
        for row in 0..self.rows {
            let ri = r[row];
            for k in self.indptr[row]..self.indptr[row + 1] {
                g[self.indices[k]] += self.values[k] * ri;
            }
        }
        Ok(())
    }

    /// `g = A^T r`.
    pub fn spmv_transpose(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.cols];
        self.spmv_transpose_into(r, &mut g)?;
        Ok(g)
    }

    /// Materializes `A^T` as CSR. Within each transposed row, entries appear in
    /// increasing original-row order, so summing them sequentially reproduces
    /// the scatter order of [`CsrMatrix::spmv_transpose`] bit for bit.
    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut pos = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for row in 0..self.rows {
            for k in self.indptr[row]..self.indptr[row + 1] {
                let c = self.indices[k];
                indices[pos[c]] = row;
                values[pos[c]] = self.values[k];
                pos[c] += 1;
            }
        }
        CsrMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// Drops entries with `value < tau * max(values)`. The comparison is
    /// strict, so `tau = 1` keeps an all-equal matrix intact, and `tau = 0`
    /// returns an equal matrix.
    pub fn truncate(&self, tau: f64) -> Result<CsrMatrix> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::InvalidArgument(format!(
                "truncation fraction must lie in [0, 1], got {tau}"
            )));
        }
        let threshold = tau * self.max_value();
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] >= threshold {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn sparsity_stats(&self) -> SparsityStats {
        let cells = self.rows * self.cols;
        let density_percent = if cells == 0 {
            0.0
        } else {
            100.0 * self.nnz() as f64 / cells as f64
        };
        SparsityStats {
            nnz: self.nnz(),
            density_percent,
            bytes_estimate: crate::spmx::encoded_size(self.rows, self.nnz()),
        }
    }

    /// Histogram of entry values normalized by `max(values)`, with each entry
    /// contributing its own value as mass. Bin `b` covers
    /// `[b/bins, (b+1)/bins)`; the last bin is closed so the maximum lands in it.
    pub fn mass_weighted_histogram(&self, bins: usize) -> Result<Vec<f64>> {
        if bins == 0 {
            return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
        }
        if self.nnz() == 0 {
            return Err(Error::EmptyMatrix);
        }
        let max = self.max_value();
        let mut hist = vec![0.0; bins];
        for &v in &self.values {
            let b = ((v / max * bins as f64) as usize).min(bins - 1);
            hist[b] += v;
        }
        Ok(hist)
    }

    /// Row-major dense copy; intended for desk-scale matrices only.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                dense[r * self.cols + self.indices[k]] = self.values[k];
            }
        }
        dense
    }
}
