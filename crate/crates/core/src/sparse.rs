//! Compressed sparse row storage and a coordinate-format builder.

use std::fmt::Write as _;

#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, capacity: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum duplicates and compress. Duplicates are summed in insertion order;
    /// exact zeros produced by cancellation are kept so the pattern depends
    /// only on which entries were pushed.
    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut b = TripletBuilder::new(rows.len(), ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.indptr[r]..self.indptr[r + 1];
        match self.indices[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                b.push(c, r, v);
            }
        }
        b.build()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `self − other` (same shape).
    pub fn sub(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                b.push(r, c, v);
            }
            for (c, v) in other.row(r) {
                b.push(r, c, -v);
            }
        }
        b.build()
    }

    /// `‖A − Aᵀ‖_∞ / ‖A‖_∞`
    pub fn asymmetry(&self) -> f64 {
        let norm = self.norm_inf();
        if norm == 0.0 {
            return 0.0;
        }
        self.sub(&self.transpose()).norm_inf() / norm
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Largest entrywise difference `max |a_ij − b_ij|`.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        self.sub(other).values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Debug export: one `row col value` line per stored entry.
    pub fn to_triplet_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let _ = writeln!(out, "{r} {c} {v:e}");
            }
        }
        out
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
