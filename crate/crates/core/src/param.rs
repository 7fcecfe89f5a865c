//! System hypotheses `θ = [A B]` and the flat parameter space they chase in.
//!
//! The chase runs over `R^{n·(n+m)}`. The flat view is the row-major
//! vectorization of `[A B]`: coordinate `i·(n+m)+j` holds row `i`, column `j`
//! of the stacked matrix. Every module uses this one layout.

use nalgebra::{DMatrix, DVector};

/// A system hypothesis `θ = [A B]`, stored as an `n×(n+m)` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    mat: DMatrix<f64>,
    n: usize,
    m: usize,
}

impl ParamPoint {
    /// Builds a hypothesis from separate `A` (n×n) and `B` (n×m) blocks.
    pub fn from_ab(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let n = a.nrows();
        let m = b.ncols();
        assert_eq!(a.ncols(), n, "A must be square");
        assert_eq!(b.nrows(), n, "B must have as many rows as A");
        let mut mat = DMatrix::zeros(n, n + m);
        mat.view_mut((0, 0), (n, n)).copy_from(&a);
        mat.view_mut((0, n), (n, m)).copy_from(&b);
        Self { mat, n, m }
    }

    /// Builds a hypothesis from a stacked `n×(n+m)` matrix.
    pub fn from_matrix(mat: DMatrix<f64>, n: usize, m: usize) -> Self {
        assert_eq!(mat.nrows(), n, "stacked matrix must have n rows");
        assert_eq!(mat.ncols(), n + m, "stacked matrix must have n+m columns");
        Self { mat, n, m }
    }

    /// Rebuilds a hypothesis from its row-major flat view.
    pub fn from_flat(flat: &DVector<f64>, n: usize, m: usize) -> Self {
        assert_eq!(flat.len(), n * (n + m), "flat vector has wrong dimension");
        let cols = n + m;
        let mut mat = DMatrix::zeros(n, cols);
        for i in 0..n {
            for j in 0..cols {
                mat[(i, j)] = flat[i * cols + j];
            }
        }
        Self { mat, n, m }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Dimension of the flat parameter space, `n·(n+m)`.
    pub fn flat_dim(&self) -> usize {
        self.n * (self.n + self.m)
    }

    /// The stacked `[A B]` matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// The `A` block.
    pub fn a(&self) -> DMatrix<f64> {
        self.mat.view((0, 0), (self.n, self.n)).into_owned()
    }

    /// The `B` block.
    pub fn b(&self) -> DMatrix<f64> {
        self.mat.view((0, self.n), (self.n, self.m)).into_owned()
    }

    /// Row-major flat view of `[A B]`.
    pub fn flat(&self) -> DVector<f64> {
        let cols = self.n + self.m;
        let mut out = DVector::zeros(self.n * cols);
        for i in 0..self.n {
            for j in 0..cols {
                out[i * cols + j] = self.mat[(i, j)];
            }
        }
        out
    }

    /// Frobenius distance to another hypothesis of the same shape.
    pub fn distance(&self, other: &ParamPoint) -> f64 {
        assert_eq!(self.n, other.n);
        assert_eq!(self.m, other.m);
        (&self.mat - &other.mat).norm()
    }

    /// Entrywise clamp into `[lo, hi]`.
    pub fn clamp_entrywise(&self, lo: f64, hi: f64) -> ParamPoint {
        let mat = self.mat.map(|v| v.clamp(lo, hi));
        Self {
            mat,
            n: self.n,
            m: self.m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_layout_is_row_major() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 1, &[5.0, 6.0]);
        let theta = ParamPoint::from_ab(a, b);
        let flat = theta.flat();
        assert_eq!(flat.as_slice(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let back = ParamPoint::from_flat(&flat, 2, 1);
        assert_eq!(back, theta);
    }

    #[test]
    fn blocks_round_trip() {
        let a = DMatrix::from_row_slice(2, 2, &[1.5, 1.0, 0.0, 0.5]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let theta = ParamPoint::from_ab(a.clone(), b.clone());
        assert_eq!(theta.a(), a);
        assert_eq!(theta.b(), b);
        assert_eq!(theta.flat_dim(), 6);
    }
}
