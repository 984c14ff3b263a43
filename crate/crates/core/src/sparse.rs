//! Minimal CSR matrix: assembly from triplets plus the handful of products
//! the solver needs. Factorizations go through faer; this type covers the
//! cheap matrix-vector work where controlling the exact operation order
//! keeps runs bit-reproducible.

use crate::dense::Dense;

#[derive(Debug, Clone)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..trips.len()).collect();
        order.sort_unstable_by_key(|&k| (trips[k].0, trips[k].1));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices: Vec<usize> = Vec::with_capacity(trips.len());
        let mut data: Vec<f64> = Vec::with_capacity(trips.len());
        let mut k = 0usize;
        for r in 0..nrows {
            let mut last_col = usize::MAX;
            while k < order.len() && trips[order[k]].0 == r {
                let (_, c, v) = trips[order[k]];
                debug_assert!(c < ncols);
                if c == last_col {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last_col = c;
                }
                k += 1;
            }
            indptr[r + 1] = indices.len();
        }
        assert_eq!(k, trips.len(), "triplet row index out of bounds");

        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut s = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                s += v * x[*c];
            }
            y[r] = s;
        }
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let xr = x[r];
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * xr;
            }
        }
        y
    }

    /// self * X for a dense X, column by column.
    pub fn matmul_dense(&self, x: &Dense) -> Dense {
        assert_eq!(x.nrows, self.ncols);
        let mut y = Dense::zeros(self.nrows, x.ncols);
        for j in 0..x.ncols {
            let xc = x.col(j);
            let yc = y.col_mut(j);
            for r in 0..self.nrows {
                let (cols, vals) = self.row(r);
                let mut s = 0.0;
                for (c, v) in cols.iter().zip(vals) {
                    s += v * xc[*c];
                }
                yc[r] = s;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                *d.at_mut(r, *c) += v;
            }
        }
        d
    }

    /// Weighted inner product x' * (self * y); self must be square.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(self.nrows, self.ncols);
        let mut s = 0.0;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut t = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                t += v * y[*c];
            }
            s += x[r] * t;
        }
        s
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        let s = self.inner(x, x);
        // max would swallow a NaN quadratic form; only clamp the tiny
        // negative values rounding can produce near zero.
        if s.is_nan() {
            f64::NAN
        } else {
            s.max(0.0).sqrt()
        }
    }

    /// Sum of all entries.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
