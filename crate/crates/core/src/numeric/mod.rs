//! Dense vectors and matrices, a seeded RNG, and a small symmetric
//! eigen-solver. Dimensions here are small (tens), so everything is plain
//! nested loops over row-major storage.

mod eigen;
mod rng;

pub use eigen::{sym2_eigenvalues, sym_eigenvalues, sym_min_eig};
pub use rng::RngStream;

use std::ops::{Deref, Index};

use crate::error::{Error, Result};

/// A non-empty vector of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("vector must have at least one entry"));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "vector entry {i} is not finite ({})",
                data[i]
            )));
        }
        Ok(Vector(data))
    }

    /// Wraps computed data without re-validating it.
    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len.max(1)])
    }

    pub fn ones(len: usize) -> Self {
        Vector(vec![1.0; len.max(1)])
    }

    pub fn basis(len: usize, i: usize) -> Self {
        let mut v = vec![0.0; len];
        v[i] = 1.0;
        Vector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::dims("Matrix::new", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::dims("Matrix::from_rows", c, bad.len()));
        }
        Matrix::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix column by column.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let mut m = Matrix::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length");
            for i in 0..rows {
                m.data[i * cols + j] = col[i];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
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

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    /// `M v`.
    pub fn mat_vec(&self, v: &[f64]) -> Result<Vector> {
        if v.len() != self.cols {
            return Err(Error::dims("mat_vec", self.cols, v.len()));
        }
        Ok(Vector(mat_vec_raw(&self.data, self.rows, self.cols, v)))
    }

    /// `Mᵀ u`.
    pub fn mat_t_vec(&self, u: &[f64]) -> Result<Vector> {
        if u.len() != self.rows {
            return Err(Error::dims("mat_t_vec", self.rows, u.len()));
        }
        Ok(Vector(mat_t_vec_raw(&self.data, self.rows, self.cols, u)))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dims("matmul", self.cols, other.rows));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// `MᵀM`.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                for j in 0..n {
                    g.data[i * n + j] += row[i] * row[j];
                }
            }
        }
        g
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetric_part(&self) -> Result<Matrix> {
        if !self.is_square() {
            return Err(Error::invalid(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut s = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                s.data[i * n + j] = 0.5 * (self.get(i, j) + self.get(j, i));
            }
        }
        Ok(s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::invalid(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(max_abs_diff(&self.data, &other.data))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

/// `Σ uᵢ vᵢ`.
pub fn dot(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::dims("dot", u.len(), v.len()));
    }
    Ok(dot_raw(u, v))
}

/// Elementwise product.
pub fn hadamard(u: &[f64], v: &[f64]) -> Result<Vector> {
    if u.len() != v.len() {
        return Err(Error::dims("hadamard", u.len(), v.len()));
    }
    Ok(Vector(u.iter().zip(v).map(|(a, b)| a * b).collect()))
}

/// Draws from `[lo, hi)`; see [`RngStream::uniform`].
pub fn uniform(rng: &mut RngStream, lo: f64, hi: f64) -> Result<f64> {
    rng.uniform(lo, hi)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn dot_raw(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn mat_vec_raw(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|i| dot_raw(&m[i * cols..(i + 1) * cols], v))
        .collect()
}

pub(crate) fn mat_t_vec_raw(m: &[f64], rows: usize, cols: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for i in 0..rows {
        let ui = u[i];
        for (o, a) in out.iter_mut().zip(&m[i * cols..(i + 1) * cols]) {
            *o += a * ui;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn mat_vec_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.mat_vec(&[1.0, 1.0]).unwrap().as_slice(), &[3.0, 7.0]);
        assert_eq!(
            Matrix::identity(2).mat_vec(&[5.0, -2.0]).unwrap().as_slice(),
            &[5.0, -2.0]
        );
        let d = m(&[&[1.0, 0.0], &[0.0, 2.0]]);
        assert_eq!(d.mat_vec(&[1.0, 1.0]).unwrap().as_slice(), &[1.0, 2.0]);
        assert!(matches!(
            a.mat_vec(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mat_t_vec_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.mat_t_vec(&[1.0, 1.0]).unwrap().as_slice(), &[4.0, 6.0]);
        assert_eq!(
            Matrix::identity(3).mat_t_vec(&[1.0, 2.0, 3.0]).unwrap().as_slice(),
            &[1.0, 2.0, 3.0]
        );
        let col = m(&[&[1.0], &[2.0]]);
        assert_eq!(col.mat_t_vec(&[1.0, 1.0]).unwrap().as_slice(), &[3.0]);
        assert!(col.mat_t_vec(&[1.0]).is_err());
    }

    #[test]
    fn dot_and_hadamard() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dot(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert!(dot(&[1.0], &[1.0, 2.0]).is_err());

        assert_eq!(hadamard(&[1.0, 2.0], &[3.0, 4.0]).unwrap().as_slice(), &[3.0, 8.0]);
        assert_eq!(hadamard(&[1.5, -2.0], &[1.0, 1.0]).unwrap().as_slice(), &[1.5, -2.0]);
        assert_eq!(hadamard(&[1.5, -2.0], &[0.0, 0.0]).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(hadamard(&[1.0], &[]).is_err());
    }

    #[test]
    fn construction_rejects_bad_values() {
        assert!(Vector::new(vec![]).is_err());
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    fn random_matrix(rng: &mut RngStream, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols)
            .map(|_| rng.uniform(-2.0, 2.0).unwrap())
            .collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    fn random_vec(rng: &mut RngStream, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.uniform(-2.0, 2.0).unwrap()).collect()
    }

    #[test]
    fn transpose_agrees_with_mat_t_vec() {
        let mut rng = RngStream::new(7);
        for _ in 0..200 {
            let r = 1 + (rng.next_u64() % 6) as usize;
            let c = 1 + (rng.next_u64() % 6) as usize;
            let a = random_matrix(&mut rng, r, c);
            let u = random_vec(&mut rng, r);
            let lhs = a.mat_t_vec(&u).unwrap();
            let rhs = a.transpose().mat_vec(&u).unwrap();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = RngStream::new(8);
        for _ in 0..200 {
            let r = 1 + (rng.next_u64() % 6) as usize;
            let c = 1 + (rng.next_u64() % 6) as usize;
            let a = random_matrix(&mut rng, r, c);
            let u = random_vec(&mut rng, r);
            let v = random_vec(&mut rng, c);
            let lhs = dot(&a.mat_vec(&v).unwrap(), &u).unwrap();
            let rhs = dot(&v, &a.mat_t_vec(&u).unwrap()).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn gram_matrices_are_psd() {
        let mut rng = RngStream::new(9);
        for _ in 0..100 {
            let r = 1 + (rng.next_u64() % 6) as usize;
            let c = 1 + (rng.next_u64() % 6) as usize;
            let a = random_matrix(&mut rng, r, c);
            assert!(sym_min_eig(&a.gram()).unwrap() >= -1e-10);
        }
    }

    proptest! {
        #[test]
        fn gram_is_transpose_times_self(
            data in proptest::collection::vec(-3.0f64..3.0, 6)
        ) {
            let a = Matrix::new(3, 2, data).unwrap();
            let g = a.transpose().matmul(&a).unwrap();
            prop_assert!(a.gram().max_abs_diff(&g).unwrap() < 1e-12);
        }
    }
}
