//! Dense reference constructions shared by the integration tests.
//!
//! Everything here is written from the definitions, without calling the library's own
//! svec, Kronecker or decomposition code, so it can serve as an oracle.

#![allow(dead_code)]

use lrsdp::cones::{ConeLayout, NtScaling};
use lrsdp::krylov::LinearOperator;
use lrsdp::operator::SparseOperator;
use lrsdp::symlin::{eig_sym, SymMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| gauss(rng)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    diff_norm(got, want) / norm(want).max(f64::MIN_POSITIVE)
}

/// Lower triangle, column by column, off-diagonals times √2.
pub fn ref_svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in j..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    out
}

pub fn ref_smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

/// Dense matrix of `x ↦ svec(A smat(x) A)`.
pub fn ref_skron_square(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let big = n * (n + 1) / 2;
    let mut out = DMatrix::zeros(big, big);
    for k in 0..big {
        let mut e = vec![0.0; big];
        e[k] = 1.0;
        let col = ref_svec(&(a * ref_smat(&e, n) * a));
        out.column_mut(k).copy_from_slice(&col);
    }
    out
}

/// Dense `diag(w²) ⊕ (W ⊗ₛ W)` on stacked `[lp | svec]` vectors.
pub fn ref_scaling_operator(w_lp: &[f64], w: &DMatrix<f64>) -> DMatrix<f64> {
    let l = w_lp.len();
    let k = ref_skron_square(w);
    let dim = l + k.nrows();
    let mut out = DMatrix::zeros(dim, dim);
    for (i, wi) in w_lp.iter().enumerate() {
        out[(i, i)] = wi * wi;
    }
    out.view_mut((l, l), (k.nrows(), k.ncols())).copy_from(&k);
    out
}

/// `Q diag(values) Qᵀ` with a Haar-like random orthogonal `Q`.
pub fn with_spectrum(rng: &mut ChaCha8Rng, values: &[f64]) -> DMatrix<f64> {
    let n = values.len();
    let q = DMatrix::from_fn(n, n, |_, _| gauss(rng)).qr().q();
    &q * DMatrix::from_diagonal(&DVector::from_column_slice(values)) * q.transpose()
}

pub fn sym(m: DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_matrix((&m + m.transpose()) * 0.5).unwrap()
}

/// Scaling with a prescribed PSD matrix and LP entries.
pub fn scaling_of(w: DMatrix<f64>, w_lp: Vec<f64>) -> NtScaling {
    let w = sym(w);
    let eig = eig_sym(&w).unwrap();
    NtScaling { w_lp, w, eig }
}

/// Random SPD matrix `GGᵀ + shift·I`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gauss(rng));
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

/// Random sparse constraint map with `per_row` Gaussian entries in every row.
pub fn random_operator(rng: &mut ChaCha8Rng, lp: usize, n: usize, m: usize, per_row: usize) -> SparseOperator {
    let layout = ConeLayout::new(lp, n).unwrap();
    let dim = layout.dim();
    let mut t = Vec::new();
    for r in 0..m {
        for _ in 0..per_row {
            t.push((r, rng.random_range(0..dim), gauss(rng)));
        }
    }
    SparseOperator::from_triplets(layout, m, &t).unwrap()
}

/// Dense matrix of a linear operator, one unit vector at a time.
pub fn dense(a: &dyn LinearOperator) -> DMatrix<f64> {
    let n = a.dim();
    let mut out = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        out.column_mut(k).copy_from_slice(&a.apply(&e));
    }
    out
}

/// Dense `m × dim` matrix of a map given as a closure on unit vectors.
pub fn dense_map(rows: usize, cols: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    for k in 0..cols {
        let mut e = vec![0.0; cols];
        e[k] = 1.0;
        out.column_mut(k).copy_from_slice(&f(&e));
    }
    out
}

pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (a * DVector::from_column_slice(x)).as_slice().to_vec()
}
