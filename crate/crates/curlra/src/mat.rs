//! Dense row-major matrix container plus index-set bookkeeping.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense matrix over a real or complex double-precision field.
///
/// Entries are stored row-major; `m, n >= 1` for every constructed matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> std::fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{} [{}]", self.rows, self.cols, T::field_name())?;
        let show_r = self.rows.min(8);
        let show_c = self.cols.min(8);
        for i in 0..show_r {
            let row: Vec<String> = (0..show_c)
                .map(|j| format!("{:>12}", self[(i, j)]))
                .collect();
            writeln!(
                f,
                "  [{}{}]",
                row.join(", "),
                if show_c < self.cols { ", ..." } else { "" }
            )?;
        }
        if show_r < self.rows {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Mat {
            rows,
            cols,
            data: vec![T::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty());
        let n = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == n), "ragged rows");
        let m = rows.len();
        Mat {
            rows: m,
            cols: n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        assert!(rows >= 1 && cols >= 1);
        Mat { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::from_re(values[i]);
        }
        m
    }

    /// Column vector (n x 1) from a slice.
    pub fn col_vec(values: &[T]) -> Self {
        Mat::from_vec(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    pub fn min_dim(&self) -> usize {
        self.rows.min(self.cols)
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_row(&mut self, i: usize, values: &[T]) {
        assert_eq!(values.len(), self.cols);
        self.row_mut(i).copy_from_slice(values);
    }

    pub fn set_col(&mut self, j: usize, values: &[T]) {
        assert_eq!(values.len(), self.rows);
        for i in 0..self.rows {
            self[(i, j)] = values[i];
        }
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Hermitian transpose; equals `transpose` over the reals.
    pub fn conj_transpose(&self) -> Self {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x.scale(s))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.shape(), other.shape());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Plain cache-friendly matrix product.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == T::ZERO {
                    continue;
                }
                let b_row = other.row(k);
                let o_row = out.row_mut(i);
                for j in 0..b_row.len() {
                    o_row[j] += aik * b_row[j];
                }
            }
        }
        out
    }

    /// y = A x.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// y = A^H x.
    pub fn conj_transpose_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![T::ZERO; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, &a) in self.row(i).iter().enumerate() {
                y[j] += a.conj() * xi;
            }
        }
        y
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        assert!(!rows.is_empty());
        let mut out = Mat::zeros(rows.len(), self.cols);
        for (i, &ri) in rows.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(ri));
        }
        out
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        assert!(!cols.is_empty());
        Mat::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        assert!(!rows.is_empty() && !cols.is_empty());
        Mat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// Leading `r` columns.
    pub fn leading_cols(&self, r: usize) -> Self {
        assert!(r >= 1 && r <= self.cols);
        Mat::from_fn(self.rows, r, |i, j| self[(i, j)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_sq()).sum::<f64>().sqrt()
    }

    pub fn chebyshev_norm(&self) -> f64 {
        self.data.iter().map(|x| x.modulus()).fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite_scalar())
    }

    pub fn random_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| T::sample_normal(rng)).collect();
        Mat { rows, cols, data }
    }

    /// Max |a_ij - b_ij| over all entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).modulus())
            .fold(0.0, f64::max)
    }
}

impl Mat<f64> {
    pub fn to_complex(&self) -> Mat<Complex64> {
        Mat::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }
}

impl<T: Scalar> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Norm selector. The surrounding literature overloads one symbol for the
/// spectral and Frobenius norms; every operation here takes the selector
/// explicitly instead of guessing from context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Spectral,
    Frobenius,
    Chebyshev,
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NormKind::Spectral => "spectral",
            NormKind::Frobenius => "frobenius",
            NormKind::Chebyshev => "chebyshev",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(NormKind::Spectral),
            "frobenius" => Ok(NormKind::Frobenius),
            "chebyshev" => Ok(NormKind::Chebyshev),
            other => Err(Error::invalid(format!("unknown norm kind: {other}"))),
        }
    }
}

/// Strictly increasing list of distinct zero-based indices below `bound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    indices: Vec<usize>,
    bound: usize,
}

impl IndexSet {
    /// Build from arbitrary distinct indices; sorts them.
    pub fn new(mut indices: Vec<usize>, bound: usize) -> Result<Self> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::invalid(format!("duplicate index {}", w[0])));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= bound {
                return Err(Error::invalid(format!("index {last} >= bound {bound}")));
            }
        }
        if indices.is_empty() {
            return Err(Error::invalid("empty index set"));
        }
        Ok(IndexSet { indices, bound })
    }

    pub fn full(bound: usize) -> Self {
        IndexSet {
            indices: (0..bound).collect(),
            bound,
        }
    }

    /// Uniform sample of `k` distinct indices below `bound`.
    pub fn sample_uniform<R: Rng + ?Sized>(bound: usize, k: usize, rng: &mut R) -> Self {
        assert!(k >= 1 && k <= bound);
        let mut indices = rand::seq::index::sample(rng, bound, k).into_vec();
        indices.sort_unstable();
        IndexSet { indices, bound }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
    pub fn bound(&self) -> usize {
        self.bound
    }
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }
}

/// A matrix over either supported field, with the field tag carried at
/// runtime. Used at I/O and CLI boundaries; numeric code is generic instead.
#[derive(Debug, Clone)]
pub enum AnyMat {
    Real(Mat<f64>),
    Complex(Mat<Complex64>),
}

impl AnyMat {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            AnyMat::Real(m) => m.shape(),
            AnyMat::Complex(m) => m.shape(),
        }
    }

    pub fn field_name(&self) -> &'static str {
        match self {
            AnyMat::Real(_) => "real",
            AnyMat::Complex(_) => "complex",
        }
    }

    pub fn expect_real(self) -> Result<Mat<f64>> {
        match self {
            AnyMat::Real(m) => Ok(m),
            AnyMat::Complex(_) => Err(Error::invalid("expected a real matrix, found complex")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a: Mat<f64> = Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let i = Mat::identity(2);
        assert_eq!(a.matmul(&i), a);
        assert_eq!(i.matmul(&a), a);
    }

    #[test]
    fn conj_transpose_of_real_is_transpose() {
        let a: Mat<f64> = Mat::from_rows(vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(a.transpose(), a.conj_transpose());
    }

    #[test]
    fn index_set_rejects_duplicates_and_overflow() {
        assert!(IndexSet::new(vec![0, 1, 1], 4).is_err());
        assert!(IndexSet::new(vec![0, 4], 4).is_err());
        let s = IndexSet::new(vec![3, 0, 2], 4).unwrap();
        assert_eq!(s.indices(), &[0, 2, 3]);
    }

    #[test]
    fn submatrix_selection() {
        let a: Mat<f64> = Mat::from_fn(4, 5, |i, j| (i * 5 + j) as f64);
        let s = a.submatrix(&[1, 3], &[0, 4]);
        assert_eq!(s[(0, 0)], 5.0);
        assert_eq!(s[(0, 1)], 9.0);
        assert_eq!(s[(1, 0)], 15.0);
        assert_eq!(s[(1, 1)], 19.0);
    }
}
