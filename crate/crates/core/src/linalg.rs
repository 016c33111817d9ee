use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape("ragged rows".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
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
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot stack {} columns on {}",
                other.cols, self.cols
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

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }

    pub fn squared_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `out = a · bᵀ + bias` where `a` is n×p, `b` is q×p, `bias` has length q.
pub(crate) fn affine_nt<T: Real>(a: &Matrix<T>, b: &Matrix<T>, bias: &[T]) -> Matrix<T> {
    debug_assert_eq!(a.cols, b.cols);
    let mut out = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let ar = a.row(i);
        let or = out.row_mut(i);
        for (q, o) in or.iter_mut().enumerate() {
            let br = b.row(q);
            let mut s = bias[q];
            for (x, y) in ar.iter().zip(br) {
                s += *x * *y;
            }
            *o = s;
        }
    }
    out
}

/// `out = gᵀ · a` where `g` is n×q, `a` is n×p; result q×p.
pub(crate) fn matmul_tn<T: Real>(g: &Matrix<T>, a: &Matrix<T>) -> Matrix<T> {
    debug_assert_eq!(g.rows, a.rows);
    let mut out = Matrix::zeros(g.cols, a.cols);
    for i in 0..g.rows {
        let gr = g.row(i);
        let ar = a.row(i);
        for (q, &gv) in gr.iter().enumerate() {
            if gv == T::zero() {
                continue;
            }
            let or = out.row_mut(q);
            for (o, &x) in or.iter_mut().zip(ar) {
                *o += gv * x;
            }
        }
    }
    out
}

/// `out = g · b` where `g` is n×q, `b` is q×p; result n×p.
pub(crate) fn matmul_nn<T: Real>(g: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    debug_assert_eq!(g.cols, b.rows);
    let mut out = Matrix::zeros(g.rows, b.cols);
    for i in 0..g.rows {
        let gr = g.row(i);
        let or = out.row_mut(i);
        for (q, &gv) in gr.iter().enumerate() {
            if gv == T::zero() {
                continue;
            }
            for (o, &x) in or.iter_mut().zip(b.row(q)) {
                *o += gv * x;
            }
        }
    }
    out
}

pub(crate) fn column_sums<T: Real>(g: &Matrix<T>) -> Vec<T> {
    let mut out = vec![T::zero(); g.cols];
    for i in 0..g.rows {
        for (o, &v) in out.iter_mut().zip(g.row(i)) {
            *o += v;
        }
    }
    out
}
