//! Small dense matrices over `f64` and `Complex64`.
//!
//! Storage is row-major. The kernels are written for the shapes that show up
//! in the detectors: a handful of users/antennas by a few hundred symbols, so
//! every product is expressed as row-wise axpy or row-row dot products.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field element usable in [`Mat`].
pub trait Scalar:
    Copy
    + Default
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn abs_sq(self) -> f64;
    fn is_finite(self) -> bool;
    fn scale(self, s: f64) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn one() -> Self {
        1.0
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        x
    }
    #[inline]
    fn conj(self) -> Self {
        self
    }
    #[inline]
    fn re(self) -> f64 {
        self
    }
    #[inline]
    fn abs_sq(self) -> f64 {
        self * self
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline]
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    #[inline]
    fn conj(self) -> Self {
        Complex64::new(self.re, -self.im)
    }
    #[inline]
    fn re(self) -> f64 {
        self.re
    }
    #[inline]
    fn abs_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    #[inline]
    fn scale(self, s: f64) -> Self {
        Complex64::new(self.re * s, self.im * s)
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

/// Complex matrix carrying received signals, channels and symbol blocks.
pub type ComplexMat = Mat<Complex64>;
/// Real matrix used by the real-valued unfolded network.
pub type RealMat = Mat<f64>;

impl<T: Scalar> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(r) {
                write!(f, "{v:?} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other, "zip_map")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn check_same_shape(&self, other: &Self, op: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{op}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for (c, &v) in self.row(r).iter().enumerate() {
                out.data[c * self.rows + r] = v.conj();
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v.scale(s))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        self.check_same_shape(other, "axpy")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    /// Adds `v` to every diagonal entry of a square matrix.
    pub fn add_diag(&mut self, v: T) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += v;
        }
    }

    pub fn trace(&self) -> T {
        let n = self.rows.min(self.cols);
        let mut t = T::zero();
        for i in 0..n {
            t += self.data[i * self.cols + i];
        }
        t
    }

    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.abs_sq()).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    /// `<self, other> = Re tr(self^H other)`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a.conj() * b).re())
            .sum()
    }

    /// Columns `start..end` as a new matrix.
    pub fn col_range(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.cols, "column range out of bounds");
        let width = end - start;
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Self {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    /// Horizontal concatenation `[self, other]`.
    pub fn hcat(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "hcat: {} rows vs {} rows",
                self.rows, other.rows
            )));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Vertical concatenation `[self; other]`.
    pub fn vcat(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "vcat: {} cols vs {} cols",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul: {}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                axpy_slice(out_row, a, other.row(k));
            }
        }
        Ok(out)
    }

    /// `self^H * other` without forming the adjoint.
    pub fn adj_mul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Shape(format!(
                "adj_mul: ({}x{})^H * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                let a = a.conj();
                if a == T::zero() {
                    continue;
                }
                axpy_slice(&mut out.data[i * other.cols..(i + 1) * other.cols], a, b_row);
            }
        }
        Ok(out)
    }

    /// `self * other^H` as row-by-row dot products.
    pub fn mul_adj(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "mul_adj: {}x{} * ({}x{})^H",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot_conj(a_row, other.row(j));
            }
        }
        Ok(out)
    }

    /// Hermitian Gram matrix `self * self^H`, computing only one triangle.
    pub fn gram_rows(&self) -> Self {
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot_conj(self.row(i), self.row(j));
                out.data[i * n + j] = v;
                out.data[j * n + i] = v.conj();
            }
        }
        out
    }

    /// Largest absolute entry difference; used by tests and diagnostics.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs_sq().sqrt())
            .fold(0.0, f64::max)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
fn axpy_slice<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// `sum_k a[k] * conj(b[k])`.
#[inline]
fn dot_conj<T: Scalar>(a: &[T], b: &[T]) -> T {
    // four independent sums keep the adds off a single dependency chain
    let n = a.len().min(b.len());
    let (a4, ar) = a[..n].split_at(n - n % 4);
    let (b4, br) = b[..n].split_at(n - n % 4);
    let mut acc = [T::zero(); 4];
    for (x, y) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        for j in 0..4 {
            acc[j] += x[j] * y[j].conj();
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ar.iter().zip(br) {
        tail += x * y.conj();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Cholesky factor `A = L L^H` of a Hermitian positive definite matrix.
#[derive(Clone)]
pub struct Cholesky<T> {
    l: Mat<T>,
}

impl<T: Scalar> fmt::Debug for Cholesky<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cholesky").field("l", &self.l).finish()
    }
}

impl<T: Scalar> Cholesky<T> {
    /// Factors `a`; only the lower triangle is read.
    pub fn new(a: &Mat<T>) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::Shape(format!("cholesky of {}x{}", a.rows, a.cols)));
        }
        let mut l = Mat::<T>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re();
            for k in 0..j {
                d -= l[(j, k)].abs_sq();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular(format!(
                    "non-positive pivot {d:e} at column {j} of {n}x{n} system"
                )));
            }
            let djj = d.sqrt();
            l[(j, j)] = T::from_real(djj);
            let inv = 1.0 / djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                let (li, lj) = (i * n, j * n);
                for k in 0..j {
                    s -= l.data[li + k] * l.data[lj + k].conj();
                }
                l[(i, j)] = s.scale(inv);
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Mat<T> {
        &self.l
    }

    /// Solves `A X = B` in place.
    pub fn solve_in_place(&self, b: &mut Mat<T>) -> Result<()> {
        let n = self.l.rows;
        if b.rows != n {
            return Err(Error::Shape(format!(
                "solve: {n}x{n} system with {}x{} right-hand side",
                b.rows, b.cols
            )));
        }
        let w = b.cols;
        // L Y = B
        for i in 0..n {
            let (done, rest) = b.data.split_at_mut(i * w);
            let row_i = &mut rest[..w];
            for k in 0..i {
                let lik = self.l.data[i * n + k];
                if lik != T::zero() {
                    axpy_slice(row_i, -lik, &done[k * w..(k + 1) * w]);
                }
            }
            let inv = 1.0 / self.l.data[i * n + i].re();
            for v in row_i.iter_mut() {
                *v = v.scale(inv);
            }
        }
        // L^H X = Y
        for i in (0..n).rev() {
            let (head, tail) = b.data.split_at_mut((i + 1) * w);
            let row_i = &mut head[i * w..];
            for k in i + 1..n {
                let lki = self.l.data[k * n + i].conj();
                if lki != T::zero() {
                    let off = (k - i - 1) * w;
                    axpy_slice(row_i, -lki, &tail[off..off + w]);
                }
            }
            let inv = 1.0 / self.l.data[i * n + i].re();
            for v in row_i.iter_mut() {
                *v = v.scale(inv);
            }
        }
        Ok(())
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &Mat<T>) -> Result<Mat<T>> {
        let mut x = b.clone();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Solves `X A = B`, i.e. returns `B A^{-1}` for Hermitian `A`.
    pub fn solve_right(&self, b: &Mat<T>) -> Result<Mat<T>> {
        let mut xt = b.adjoint();
        self.solve_in_place(&mut xt)?;
        Ok(xt.adjoint())
    }
}

/// Solves the Hermitian positive definite system `A X = B`.
pub fn solve_hpd<T: Scalar>(a: &Mat<T>, b: &Mat<T>) -> Result<Mat<T>> {
    Cholesky::new(a)?.solve(b)
}

/// Returns `B A^{-1}` for Hermitian positive definite `A`.
pub fn solve_right_hpd<T: Scalar>(b: &Mat<T>, a: &Mat<T>) -> Result<Mat<T>> {
    Cholesky::new(a)?.solve_right(b)
}
