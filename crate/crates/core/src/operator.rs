//! Linear constraint maps `𝒜 : (lp ⊕ svec) → Rᵐ`.

use nalgebra::DMatrix;

use crate::cones::ConeLayout;
use crate::error::{dim_err, Result};
use crate::symlin::{smat_from, svec_coords, svec_into, SQRT2};

/// A constraint map on stacked primal vectors `[lp | svec]`.
///
/// `forward_lowrank` and `adjoint_times` have dense fallbacks; sparse
/// implementations override them to get `O(nnz·k)` restricted products.
pub trait ConstraintOperator: Send + Sync {
    fn num_constraints(&self) -> usize;
    fn layout(&self) -> ConeLayout;
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    fn adjoint(&self, y: &[f64]) -> Vec<f64>;

    /// Nonzeros as `(row, primal column, value)`.
    fn triplets(&self) -> Vec<(usize, usize, f64)>;

    /// `𝒜([lp | svec(½(U Vᵀ + V Uᵀ))])` for thin `U`, `V` of equal shape.
    fn forward_lowrank(&self, lp: &[f64], u: &DMatrix<f64>, v: &DMatrix<f64>) -> Vec<f64> {
        let layout = self.layout();
        let mut x = vec![0.0; layout.dim()];
        x[..layout.lp_dim].copy_from_slice(lp);
        let m = u * v.transpose();
        svec_into(&m, &mut x[layout.lp_dim..]);
        self.forward(&x)
    }

    /// LP part of `𝒜ᵀy` and `Z·Q` where `Z` is the PSD part of `𝒜ᵀy`.
    fn adjoint_times(&self, y: &[f64], q: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let layout = self.layout();
        let z = self.adjoint(y);
        let zm = smat_from(&z[layout.lp_dim..], layout.psd_order);
        (z[..layout.lp_dim].to_vec(), zm * q)
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Lp(usize),
    Diag(usize),
    Off(usize, usize),
}

/// Row-compressed sparse constraint map.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    layout: ConeLayout,
    m: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    slots: Vec<Slot>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(layout: ConeLayout, m: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let dim = layout.dim();
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= m || c >= dim {
                return dim_err(format!("entry ({r}, {c}) outside {m}x{dim}"));
            }
            t.push((r, c, v));
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let coords = svec_coords(layout.psd_order);
        let mut row_ptr = vec![0; m + 1];
        let mut cols = Vec::with_capacity(merged.len());
        let mut vals = Vec::with_capacity(merged.len());
        let mut slots = Vec::with_capacity(merged.len());
        for &(r, c, v) in &merged {
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
            slots.push(if c < layout.lp_dim {
                Slot::Lp(c)
            } else {
                let (i, j) = coords[c - layout.lp_dim];
                if i == j {
                    Slot::Diag(i)
                } else {
                    Slot::Off(i, j)
                }
            });
        }
        for k in 0..m {
            row_ptr[k + 1] += row_ptr[k];
        }
        Ok(SparseOperator { layout, m, row_ptr, cols, vals, slots })
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Dense `m × dim` matrix; test and diagnostic use only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.m, self.layout.dim());
        for (r, c, v) in self.triplets() {
            a[(r, c)] += v;
        }
        a
    }

    fn row(&self, k: usize) -> std::ops::Range<usize> {
        self.row_ptr[k]..self.row_ptr[k + 1]
    }
}

impl ConstraintOperator for SparseOperator {
    fn num_constraints(&self) -> usize {
        self.m
    }

    fn layout(&self) -> ConeLayout {
        self.layout
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.layout.dim(), "forward: primal length mismatch");
        (0..self.m).map(|k| self.row(k).map(|p| self.vals[p] * x[self.cols[p]]).sum()).collect()
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.m, "adjoint: dual length mismatch");
        let mut out = vec![0.0; self.layout.dim()];
        for (k, yk) in y.iter().enumerate() {
            for p in self.row(k) {
                out[self.cols[p]] += self.vals[p] * yk;
            }
        }
        out
    }

    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for k in 0..self.m {
            for p in self.row(k) {
                out.push((k, self.cols[p], self.vals[p]));
            }
        }
        out
    }

    fn forward_lowrank(&self, lp: &[f64], u: &DMatrix<f64>, v: &DMatrix<f64>) -> Vec<f64> {
        let n = self.layout.psd_order;
        let kk = u.ncols();
        assert!(u.nrows() == n && v.nrows() == n && v.ncols() == kk, "forward_lowrank: factor shape mismatch");
        let (us, vs) = (u.as_slice(), v.as_slice());
        let entry = |i: usize, j: usize| -> f64 {
            let mut s = 0.0;
            for c in 0..kk {
                let o = c * n;
                s += us[o + i] * vs[o + j] + vs[o + i] * us[o + j];
            }
            0.5 * s
        };
        let mut out = vec![0.0; self.m];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row(k) {
                let a = self.vals[p];
                acc += match self.slots[p] {
                    Slot::Lp(i) => a * lp[i],
                    Slot::Diag(i) => a * entry(i, i),
                    Slot::Off(i, j) => a * SQRT2 * entry(i, j),
                };
            }
            *o = acc;
        }
        out
    }

    fn adjoint_times(&self, y: &[f64], q: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = self.layout.psd_order;
        let r = q.ncols();
        assert_eq!(q.nrows(), n, "adjoint_times: basis row mismatch");
        let mut lp = vec![0.0; self.layout.lp_dim];
        let mut zq = DMatrix::zeros(n, r);
        let qs = q.as_slice();
        let zs = zq.as_mut_slice();
        for (k, yk) in y.iter().enumerate() {
            for p in self.row(k) {
                let c = self.vals[p] * yk;
                match self.slots[p] {
                    Slot::Lp(i) => lp[i] += c,
                    Slot::Diag(i) => {
                        for t in 0..r {
                            zs[t * n + i] += c * qs[t * n + i];
                        }
                    }
                    Slot::Off(i, j) => {
                        let c = c / SQRT2;
                        for t in 0..r {
                            let o = t * n;
                            zs[o + i] += c * qs[o + j];
                            zs[o + j] += c * qs[o + i];
                        }
                    }
                }
            }
        }
        (lp, zq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symlin::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_op(rng: &mut ChaCha8Rng, l: usize, n: usize, m: usize, nnz: usize) -> SparseOperator {
        let layout = ConeLayout::new(l, n).unwrap();
        let t: Vec<_> = (0..nnz)
            .map(|_| (rng.random_range(0..m), rng.random_range(0..layout.dim()), rng.sample(StandardNormal)))
            .collect();
        SparseOperator::from_triplets(layout, m, &t).unwrap()
    }

    fn rv(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let op = random_op(&mut rng, 3, 6, 10, 60);
        for _ in 0..20 {
            let x = rv(op.layout().dim(), &mut rng);
            let y = rv(10, &mut rng);
            let a = dot(&op.forward(&x), &y);
            let b = dot(&x, &op.adjoint(&y));
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn duplicates_are_summed_and_bounds_checked() {
        let layout = ConeLayout::new(0, 2).unwrap();
        let op = SparseOperator::from_triplets(layout, 1, &[(0, 1, 1.0), (0, 1, 2.0)]).unwrap();
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.forward(&[0.0, 1.0, 0.0]), vec![3.0]);
        assert!(SparseOperator::from_triplets(layout, 1, &[(1, 0, 1.0)]).is_err());
        assert!(SparseOperator::from_triplets(layout, 1, &[(0, 3, 1.0)]).is_err());
    }

    #[test]
    fn restricted_products_match_dense_fallback() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let op = random_op(&mut rng, 4, 7, 12, 80);
        let u = DMatrix::from_fn(7, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = DMatrix::from_fn(7, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lp = rv(4, &mut rng);

        let mut x = vec![0.0; op.layout().dim()];
        x[..4].copy_from_slice(&lp);
        let sym = (&u * v.transpose() + &v * u.transpose()) * 0.5;
        svec_into(&sym, &mut x[4..]);
        let want = op.forward(&x);
        let got = op.forward_lowrank(&lp, &u, &v);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }

        let y = rv(12, &mut rng);
        let z = op.adjoint(&y);
        let want_zq = smat_from(&z[4..], 7) * &u;
        let (lp_got, zq) = op.adjoint_times(&y, &u);
        assert!((zq - want_zq).norm() < 1e-12);
        for (a, b) in lp_got.iter().zip(&z[..4]) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
