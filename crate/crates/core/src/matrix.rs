use serde::Serialize;

/// Dense real symmetric matrix, stored in full row-major order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Builds the matrix from its upper triangle `f(i, j)`, `i <= j`.
    pub fn from_upper<F: FnMut(usize, usize) -> f64>(dim: usize, mut f: F) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    /// Leading `dim × dim` block.
    pub fn leading(&self, dim: usize) -> Self {
        assert!(dim <= self.dim, "leading block {dim} larger than {}", self.dim);
        Self::from_upper(dim, |i, j| self.get(i, j))
    }

    /// `self += a aᵀ` restricted to the leading `a.len()` indices.
    pub fn add_outer(&mut self, a: &[f64]) {
        let n = a.len().min(self.dim);
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            let row = i * self.dim;
            for j in 0..n {
                self.data[row + j] += a[i] * a[j];
            }
        }
    }

    pub fn add_assign(&mut self, other: &SymMatrix) {
        assert_eq!(self.dim, other.dim);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += y;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
