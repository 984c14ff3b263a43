//! Column-major dense matrix, the layout LAPACK expects.

#[derive(Debug, Clone)]
pub struct Dense {
    pub nrows: usize,
    pub ncols: usize,
    /// Column-major storage, length nrows * ncols.
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            a: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut d = Self::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                d.a[i + j * nrows] = f(i, j);
            }
        }
        d
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i + j * self.nrows]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i + j * self.nrows]
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.a[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.a[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        self.col_mut(j).copy_from_slice(v);
    }

    pub fn transpose(&self) -> Dense {
        Dense::from_fn(self.ncols, self.nrows, |i, j| self.at(j, i))
    }

    /// self <- (self + self') / 2; square only.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        for j in 0..n {
            for i in (j + 1)..n {
                let s = 0.5 * (self.a[i + j * n] + self.a[j + i * n]);
                self.a[i + j * n] = s;
                self.a[j + i * n] = s;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.a {
            *v *= alpha;
        }
    }

    /// self <- self + alpha * other.
    pub fn axpy(&mut self, alpha: f64, other: &Dense) {
        assert_eq!(self.a.len(), other.a.len());
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += alpha * y;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let c = self.col(j);
            for i in 0..self.nrows {
                y[i] += c[i] * xj;
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute asymmetry, max |A - A'|.
    pub fn symmetry_defect(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut d = 0.0f64;
        for j in 0..n {
            for i in (j + 1)..n {
                d = d.max((self.a[i + j * n] - self.a[j + i * n]).abs());
            }
        }
        d
    }
}
