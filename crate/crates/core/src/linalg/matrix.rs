use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex matrix stored row-major.
///
/// Serialized as `{"dim": n, "entries": [[re, im], ...]}` (row-major) when
/// square and `{"rows": r, "cols": c, "entries": ...}` otherwise.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    entries: Vec<[f64; 2]>,
}

impl From<CMatrix> for MatrixRepr {
    fn from(m: CMatrix) -> Self {
        let square = m.rows == m.cols;
        MatrixRepr {
            dim: square.then_some(m.rows),
            rows: (!square).then_some(m.rows),
            cols: (!square).then_some(m.cols),
            entries: m.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<MatrixRepr> for CMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let (rows, cols) = match (r.dim, r.rows, r.cols) {
            (Some(d), None, None) => (d, d),
            (None, Some(rows), Some(cols)) => (rows, cols),
            _ => return Err(Error::InvalidArgument("matrix needs either `dim` or both `rows` and `cols`".into())),
        };
        CMatrix::from_vec(rows, cols, r.entries.into_iter().map(|[re, im]| C64::new(re, im)).collect())
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from real row slices.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// Column vector `|v⟩⟨w|`.
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |i, j| v[i] * w[j].conj())
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<C64>]) -> Result<Self> {
        let c = columns.len();
        let r = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|col| col.len() != r) {
            return Err(Error::Dimension("columns of unequal length".into()));
        }
        Ok(Self::from_fn(r, c, |i, j| columns[j][i]))
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (i, x) in v.iter().enumerate() {
            self[(i, j)] = *x;
        }
    }

    /// First `k` columns.
    pub fn leading_columns(&self, k: usize) -> Self {
        Self::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare { rows: self.rows, cols: self.cols })
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, a: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * a).collect() }
    }

    pub fn scale_real(&self, a: f64) -> Self {
        self.scale(C64::new(a, 0.0))
    }

    pub fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "matmul: {}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols);
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Hilbert-Schmidt inner product `Tr(self† other)`.
    pub fn hs_inner(&self, other: &CMatrix) -> C64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm divided by `sqrt(rows)`, so that unitaries have norm one.
    pub fn normalized_frobenius_norm(&self) -> f64 {
        self.frobenius_norm() / (self.rows as f64).sqrt()
    }

    /// `‖M − M†‖_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `‖M†M − I‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint().matmul(self) - &CMatrix::identity(self.rows)).frobenius_norm()
    }

    pub fn require_unitary(&self, tol: f64) -> Result<()> {
        self.require_square()?;
        let deviation = self.unitarity_defect();
        if deviation > tol {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(())
    }

    /// Hermitian part `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;

    fn neg(self) -> CMatrix {
        self.scale_real(-1.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, " ")?;
            for z in self.row(i) {
                write!(f, " {:+.4}{:+.4}i", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Euclidean inner product `⟨a|b⟩`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Commonly used one-qubit matrices.
pub mod gates {
    use super::{CMatrix, C64};

    pub fn pauli_x() -> CMatrix {
        CMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn pauli_y() -> CMatrix {
        CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(0.0, -1.0),
            (1, 0) => C64::new(0.0, 1.0),
            _ => C64::new(0.0, 0.0),
        })
    }

    pub fn pauli_z() -> CMatrix {
        CMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    pub fn hadamard() -> CMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_real_rows(&[&[h, h], &[h, -h]])
    }

    pub fn t_gate() -> CMatrix {
        CMatrix::diag(&[C64::new(1.0, 0.0), C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)])
    }

    /// CNOT with the first (most significant) qubit as control.
    pub fn cnot() -> CMatrix {
        CMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ])
    }

    pub fn swap() -> CMatrix {
        CMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// `I, X, Y, Z` in that order.
    pub fn paulis() -> [CMatrix; 4] {
        [CMatrix::identity(2), pauli_x(), pauli_y(), pauli_z()]
    }
}
