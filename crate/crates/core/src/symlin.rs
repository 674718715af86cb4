//! Symmetric-matrix vectorization algebra.
//!
//! `svec` stacks the lower triangle column by column, scaling every
//! off-diagonal entry by `sqrt(2)`:
//!
//! ```text
//! svec(X) = (X11, √2·X21, …, √2·Xn1, X22, √2·X32, …, Xnn)
//! ```
//!
//! so that `<svec(X), svec(S)> = tr(XS)`. The basis matrix that maps
//! `vec(X)` to `svec(X)` is never formed; products with it are realized as
//! "symmetrize, then svec".

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim_err, Error, Result};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Length of `svec` for a matrix of order `n`.
#[inline]
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Inverse of [`svec_len`]; `None` if `len` is not a triangular number.
pub fn tri_order(len: usize) -> Option<usize> {
    let n = ((((8 * len + 1) as f64).sqrt() - 1.0) / 2.0).round() as usize;
    (svec_len(n) == len).then_some(n)
}

/// Position of entry `(i, j)`, `i >= j`, inside `svec` of an order-`n` matrix.
#[inline]
pub fn svec_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < n);
    j * n - j * j.saturating_sub(1) / 2 + (i - j)
}

/// Table mapping each svec coordinate back to its `(row, col)` with `row >= col`.
pub fn svec_coords(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            out.push((i, j));
        }
    }
    out
}

/// Writes `svec(½(M + Mᵀ))` into `out`. `M` may be nonsymmetric.
pub fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    debug_assert_eq!(m.ncols(), n);
    debug_assert_eq!(out.len(), svec_len(n));
    let mut k = 0;
    for j in 0..n {
        out[k] = m[(j, j)];
        k += 1;
        for i in j + 1..n {
            out[k] = (m[(i, j)] + m[(j, i)]) * (0.5 * SQRT2);
            k += 1;
        }
    }
}

/// Dense symmetric matrix from an svec slice of known order.
pub fn smat_from(v: &[f64], n: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(n));
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Dense real symmetric matrix. Symmetry is enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Symmetrizes `m` as `½(M + Mᵀ)`.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return dim_err(format!("matrix is {}x{}, not square", m.nrows(), m.ncols()));
        }
        Ok(Self::symmetrize(m))
    }

    pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for j in 0..n {
            for i in j + 1..n {
                let a = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = a;
                m[(j, i)] = a;
            }
        }
        SymMatrix(m)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return dim_err("ragged rows");
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, a: f64) -> Self {
        SymMatrix(&self.0 * a)
    }

    /// `self + a·other`.
    pub fn add_scaled(&self, a: f64, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 + &other.0 * a)
    }

    /// Trace inner product `tr(self·other)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// `B·self·Bᵀ`, symmetrized to remove round-off asymmetry.
    pub fn congruence(&self, b: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::symmetrize(b * &self.0 * b.transpose())
    }

    pub fn to_svec(&self) -> SVec {
        svec(self)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Symmetric vectorization of an order-`n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SVec {
    order: usize,
    data: Vec<f64>,
}

impl SVec {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        match tri_order(data.len()) {
            Some(order) => Ok(SVec { order, data }),
            None => dim_err(format!("length {} is not a triangular number", data.len())),
        }
    }

    pub fn zeros(n: usize) -> Self {
        SVec { order: n, data: vec![0.0; svec_len(n)] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn dot(&self, other: &SVec) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

pub fn svec(x: &SymMatrix) -> SVec {
    let n = x.order();
    let mut data = vec![0.0; svec_len(n)];
    svec_into(x.as_matrix(), &mut data);
    SVec { order: n, data }
}

pub fn smat(v: &SVec) -> SymMatrix {
    SymMatrix(smat_from(&v.data, v.order))
}

/// `(B ⊗ₛ A)·svec(X) = svec(½(A X Bᵀ + B X Aᵀ))` for `A, B` of shape `n×r`.
pub fn skron_apply(a: &DMatrix<f64>, b: &DMatrix<f64>, x: &SVec) -> Result<SVec> {
    if a.shape() != b.shape() {
        return dim_err(format!("skron factors {:?} and {:?} differ", a.shape(), b.shape()));
    }
    if a.ncols() != x.order() {
        return dim_err(format!("factor has {} columns, svec order is {}", a.ncols(), x.order()));
    }
    let xm = smat_from(&x.data, x.order);
    let axb = a * &xm * b.transpose();
    let n = a.nrows();
    let mut data = vec![0.0; svec_len(n)];
    svec_into(&axb, &mut data);
    Ok(SVec { order: n, data })
}

/// Orthonormal eigendecomposition with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

impl EigenDecomposition {
    pub fn order(&self) -> usize {
        self.values.len()
    }

    /// `V·diag(f(λ))·Vᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.order();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let s = f(self.values[j]);
            scaled.column_mut(j).scale_mut(s);
        }
        SymMatrix::symmetrize(scaled * self.vectors.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.spectral_map(|x| x)
    }

    pub fn min_value(&self) -> f64 {
        *self.values.last().expect("empty decomposition")
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }
}

pub fn eig_sym(x: &SymMatrix) -> Result<EigenDecomposition> {
    if !x.is_finite() {
        return Err(Error::NumericalFailure("non-finite entries in eigenvalue input".into()));
    }
    let n = x.order();
    let eig = SymmetricEigen::new(x.as_matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigenDecomposition { vectors, values })
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a·x`.
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
