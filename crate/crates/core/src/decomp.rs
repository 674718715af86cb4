//! Low-rank-plus-well-conditioned split of the scaling operator.
//!
//! With `W = QΛQᵀ + Q⊥Λ⊥Q⊥ᵀ` and `τ = ½λ_{r+1}(W)` (for a pure PSD cone),
//!
//! ```text
//! W ⊗ₛ W = 𝐐 Σ⁻¹ 𝐐ᵀ + τ² 𝐄,    𝐄 svec(X) = svec(E X E),
//! E = QQᵀ + τ⁻¹ Q⊥Λ⊥Q⊥ᵀ,
//! 𝐐 [svec(B); vec(N)] = svec(½(U Qᵀ + Q Uᵀ)),   U = Q B + √2 Q⊥ N.
//! ```
//!
//! Every apply acts on stacked primal vectors `[lp | svec]`. LP coordinates
//! are 1×1 blocks: one with scaling `wᵢ > t = clamp(√(λ₁λₙ), λ_{r+1}, λ_r)`
//! contributes a unit column to 𝐐 (appended after the PSD coordinates) and
//! `wᵢ² − τ²` to Σ⁻¹; the rest go to 𝐄 with weight `wᵢ²/τ²`. τ is raised to
//! half the largest of those small `wᵢ` when that exceeds `λ_{r+1}`.

use nalgebra::DMatrix;

use crate::cones::NtScaling;
use crate::error::{dim_err, Error, Result};
use crate::symlin::{smat_from, svec_index, svec_into, svec_len, SymMatrix, SQRT2};

/// Rank maximizing the eigenvalue ratio `λᵢ/λᵢ₊₁` over `1 ≤ i ≤ r_max`.
pub fn select_rank(values: &[f64], r_max: usize) -> Result<usize> {
    let n = values.len();
    if r_max == 0 || r_max >= n {
        return dim_err(format!("r_max = {r_max} must lie in 1..{n}"));
    }
    let mut best = 1;
    let mut best_ratio = f64::NEG_INFINITY;
    for i in 1..=r_max {
        let ratio = values[i - 1] / values[i];
        if ratio > best_ratio {
            best_ratio = ratio;
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct ScalingDecomposition {
    pub r: usize,
    pub q: DMatrix<f64>,
    pub q_perp: DMatrix<f64>,
    pub lambda: Vec<f64>,
    pub lambda_perp: Vec<f64>,
    pub tau: f64,
    pub e: SymMatrix,
    /// Σ⁻¹ over the PSD coordinates `[svec(B) | vec(N)]`.
    pub sigma_inv: Vec<f64>,
    pub lp_large: Vec<usize>,
    pub lp_sigma_inv: Vec<f64>,
    pub lp_e: Vec<f64>,
    pub tau_lp: f64,
    pub lp_threshold: f64,
}

impl ScalingDecomposition {
    /// Splits `scaling` at rank `r`; `r = 0` is allowed and puts all of `W` into 𝐄.
    pub fn build(scaling: &NtScaling, r: usize) -> Result<Self> {
        let n = scaling.eig.order();
        if r >= n {
            return dim_err(format!("rank {r} must be below the PSD order {n}"));
        }
        let vals = &scaling.eig.values;
        let lambda_r = if r > 0 { vals[r - 1] } else { f64::INFINITY };
        // Orthant coordinates join the spectrum: those above `t` are large, and τ is half the
        // largest small value over both blocks. `√(λ₁λₙ)` sits between the Θ(1/√μ) and Θ(√μ)
        // clusters near a strictly complementary solution, so the split does not move with r.
        let lp_threshold = (vals[0] * vals[n - 1]).sqrt().clamp(vals[r], lambda_r);
        let small_lp = scaling.w_lp.iter().copied().filter(|w| *w <= lp_threshold).fold(0.0, f64::max);
        let tau = 0.5 * vals[r].max(small_lp);
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::DegenerateSpectrum { rank: r, tau, lambda_r });
        }
        if r > 0 && !(tau < lambda_r) {
            return Err(Error::DegenerateSpectrum { rank: r, tau, lambda_r });
        }
        let v = &scaling.eig.vectors;
        let q = v.columns(0, r).into_owned();
        let q_perp = v.columns(r, n - r).into_owned();
        let lambda = vals[..r].to_vec();
        let lambda_perp = vals[r..].to_vec();

        let mut ev = vec![1.0; n];
        for (k, l) in lambda_perp.iter().enumerate() {
            ev[r + k] = l / tau;
        }
        let mut scaled = v.clone();
        for (j, s) in ev.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        let e = SymMatrix::symmetrize(scaled * v.transpose());

        let mut sigma_inv = Vec::with_capacity(svec_len(r) + (n - r) * r);
        for j in 0..r {
            for i in j..r {
                sigma_inv.push(lambda[i] * lambda[j] - tau * tau);
            }
        }
        for qi in 0..r {
            for lp in &lambda_perp {
                sigma_inv.push(lp * (lambda[qi] - tau));
            }
        }

        let mut lp_large = Vec::new();
        let mut lp_sigma_inv = Vec::new();
        let mut lp_e = Vec::with_capacity(scaling.w_lp.len());
        for (i, &w) in scaling.w_lp.iter().enumerate() {
            if w > lp_threshold {
                lp_large.push(i);
                lp_sigma_inv.push(w * w - tau * tau);
                lp_e.push(1.0);
            } else {
                lp_e.push(w * w / (tau * tau));
            }
        }

        Ok(ScalingDecomposition {
            r,
            q,
            q_perp,
            lambda,
            lambda_perp,
            tau,
            e,
            sigma_inv,
            lp_large,
            lp_sigma_inv,
            lp_e,
            tau_lp: tau,
            lp_threshold,
        })
    }

    pub fn order(&self) -> usize {
        self.q.nrows()
    }

    pub fn lp_dim(&self) -> usize {
        self.lp_e.len()
    }

    /// Length of stacked primal vectors.
    pub fn primal_dim(&self) -> usize {
        self.lp_dim() + svec_len(self.order())
    }

    /// PSD part of `d`: `nr − r(r−1)/2`.
    pub fn d_psd(&self) -> usize {
        self.sigma_inv.len()
    }

    /// Total column count of 𝐐 including LP unit columns.
    pub fn d(&self) -> usize {
        self.d_psd() + self.lp_large.len()
    }

    /// Σ⁻¹ over all coordinates of 𝐐.
    pub fn sigma_inv_full(&self) -> Vec<f64> {
        let mut s = self.sigma_inv.clone();
        s.extend_from_slice(&self.lp_sigma_inv);
        s
    }

    pub fn apply_sigma_inv(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_d(v.len())?;
        Ok(v.iter().zip(self.sigma_inv.iter().chain(&self.lp_sigma_inv)).map(|(a, s)| a * s).collect())
    }

    pub fn apply_sigma(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_d(v.len())?;
        Ok(v.iter().zip(self.sigma_inv.iter().chain(&self.lp_sigma_inv)).map(|(a, s)| a / s).collect())
    }

    fn check_d(&self, len: usize) -> Result<()> {
        if len != self.d() {
            return dim_err(format!("vector of length {len}, decomposition has d = {}", self.d()));
        }
        Ok(())
    }

    fn check_primal(&self, len: usize) -> Result<()> {
        if len != self.primal_dim() {
            return dim_err(format!("vector of length {len}, primal dimension is {}", self.primal_dim()));
        }
        Ok(())
    }

    /// `[lp_e ∘ x_lp | svec(E X E)]`.
    pub fn apply_e(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_primal(x.len())?;
        Ok(self.congruence_apply(x, self.e.as_matrix(), &self.lp_e))
    }

    /// Inverse of [`apply_e`](Self::apply_e).
    pub fn apply_e_inv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_primal(x.len())?;
        let n = self.order();
        let mut v = DMatrix::zeros(n, n);
        v.columns_mut(0, self.r).copy_from(&self.q);
        for (k, l) in self.lambda_perp.iter().enumerate() {
            v.column_mut(self.r + k).copy_from(&(self.q_perp.column(k) * (self.tau / l).sqrt()));
        }
        let e_inv = &v * v.transpose();
        let lp: Vec<f64> = self.lp_e.iter().map(|e| 1.0 / e).collect();
        Ok(self.congruence_apply(x, &e_inv, &lp))
    }

    /// `[w² ∘ x_lp | svec(W X W)]`, reassembled from the stored factors.
    pub fn apply_w_kron(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_primal(x.len())?;
        let w = self.w_matrix();
        let lp = self.w_lp_squared();
        Ok(self.congruence_apply(x, &w, &lp))
    }

    pub fn w_matrix(&self) -> DMatrix<f64> {
        let mut ql = self.q.clone();
        for (j, l) in self.lambda.iter().enumerate() {
            ql.column_mut(j).scale_mut(*l);
        }
        let mut pl = self.q_perp.clone();
        for (j, l) in self.lambda_perp.iter().enumerate() {
            pl.column_mut(j).scale_mut(*l);
        }
        ql * self.q.transpose() + pl * self.q_perp.transpose()
    }

    pub fn w_lp_squared(&self) -> Vec<f64> {
        let mut w2: Vec<f64> = self.lp_e.iter().map(|e| e * self.tau * self.tau).collect();
        for (k, &i) in self.lp_large.iter().enumerate() {
            w2[i] = self.lp_sigma_inv[k] + self.tau * self.tau;
        }
        w2
    }

    fn congruence_apply(&self, x: &[f64], m: &DMatrix<f64>, lp: &[f64]) -> Vec<f64> {
        let l = self.lp_dim();
        let n = self.order();
        let mut out = vec![0.0; x.len()];
        for i in 0..l {
            out[i] = lp[i] * x[i];
        }
        let xm = smat_from(&x[l..], n);
        let prod = m * xm * m;
        svec_into(&prod, &mut out[l..]);
        out
    }

    /// `U = QB + √2 Q⊥N` from the PSD part of `h`.
    pub fn tangent_factor(&self, h: &[f64]) -> DMatrix<f64> {
        let (n, r) = (self.order(), self.r);
        let nb = svec_len(r);
        let b = smat_from(&h[..nb], r);
        let nm = DMatrix::from_column_slice(n - r, r, &h[nb..nb + (n - r) * r]);
        &self.q * b + &self.q_perp * nm * SQRT2
    }

    pub fn apply_q(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.check_d(h.len())?;
        let l = self.lp_dim();
        let mut out = vec![0.0; self.primal_dim()];
        let dp = self.d_psd();
        for (k, &i) in self.lp_large.iter().enumerate() {
            out[i] = h[dp + k];
        }
        if self.r > 0 {
            let u = self.tangent_factor(h);
            let uq = u * self.q.transpose();
            svec_into(&uq, &mut out[l..]);
        }
        Ok(out)
    }

    pub fn apply_qt(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_primal(x.len())?;
        let l = self.lp_dim();
        let xm = smat_from(&x[l..], self.order());
        let xq = xm * &self.q;
        Ok(self.qt_from_xq(&x[..l], &xq))
    }

    /// 𝐐ᵀ given `x_lp` and the product `X Q` (so callers with a cheap `XQ` skip the `n³` step).
    pub fn qt_from_xq(&self, x_lp: &[f64], xq: &DMatrix<f64>) -> Vec<f64> {
        let r = self.r;
        let mut out = Vec::with_capacity(self.d());
        if r > 0 {
            let qxq = self.q.transpose() * xq;
            for j in 0..r {
                out.push(qxq[(j, j)]);
                for i in j + 1..r {
                    out.push((qxq[(i, j)] + qxq[(j, i)]) * (0.5 * SQRT2));
                }
            }
            let pxq = self.q_perp.transpose() * xq;
            out.extend(pxq.iter().map(|v| v * SQRT2));
        }
        out.extend(self.lp_large.iter().map(|&i| x_lp[i]));
        out
    }

    /// Thin factors `(U_k, V_k)` with `𝐐 e_k = svec(½(U_k V_kᵀ + V_k U_kᵀ))` for a PSD coordinate `k`.
    pub fn basis_factors(&self, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, r) = (self.order(), self.r);
        let nb = svec_len(r);
        if k < nb {
            let (mut i, mut j) = (0, 0);
            'find: for jj in 0..r {
                for ii in jj..r {
                    if svec_index(r, ii, jj) == k {
                        i = ii;
                        j = jj;
                        break 'find;
                    }
                }
            }
            if i == j {
                let qi = self.q.column(i).into_owned();
                (DMatrix::from_columns(&[qi.clone()]), DMatrix::from_columns(&[qi]))
            } else {
                let s = 1.0 / SQRT2;
                let u = DMatrix::from_columns(&[self.q.column(i) * s, self.q.column(j) * s]);
                let v = DMatrix::from_columns(&[self.q.column(j).into_owned(), self.q.column(i).into_owned()]);
                (u, v)
            }
        } else {
            let k = k - nb;
            let (p, q) = (k % (n - r), k / (n - r));
            let u = DMatrix::from_columns(&[self.q_perp.column(p) * SQRT2]);
            let v = DMatrix::from_columns(&[self.q.column(q).into_owned()]);
            (u, v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{nt_scaling, ConePoint};
    use crate::symlin::{eig_sym, EigenDecomposition};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn scaling_from(w: SymMatrix, w_lp: Vec<f64>) -> NtScaling {
        let eig = eig_sym(&w).unwrap();
        NtScaling { w_lp, w, eig }
    }

    fn random_spectrum_w(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr().q();
        let vals: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        EigenDecomposition { vectors: qr, values: vals }.reconstruct()
    }

    fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn sub(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn select_rank_examples() {
        assert_eq!(select_rank(&[10.0, 9.0, 0.1, 0.05], 3).unwrap(), 2);
        assert_eq!(select_rank(&[1.0, 1.0, 1.0], 2).unwrap(), 1);
        assert!(select_rank(&[1.0, 1.0, 1.0], 3).is_err());
        assert!(select_rank(&[1.0, 1.0, 1.0], 0).is_err());
    }

    #[test]
    fn select_rank_on_centered_rank_two_iterate() {
        let n = 8;
        let mu: f64 = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = g.qr().q();
        let xs: Vec<f64> = (0..n).map(|i| if i < 2 { 1.0 + i as f64 } else { mu }).collect();
        let ss: Vec<f64> = (0..n).map(|i| if i < 2 { mu / (1.0 + i as f64) } else { 1.0 }).collect();
        let x = EigenDecomposition { vectors: v.clone(), values: xs }.reconstruct();
        let s = EigenDecomposition { vectors: v, values: ss }.reconstruct();
        let nt = nt_scaling(&ConePoint::new(vec![], x), &ConePoint::new(vec![], s)).unwrap();
        assert_eq!(select_rank(&nt.eig.values, 5).unwrap(), 2);
    }

    #[test]
    fn build_worked_example() {
        let w = SymMatrix::from_diagonal(&[4.0, 2.0, 0.5, 0.25]);
        let dec = ScalingDecomposition::build(&scaling_from(w, vec![]), 2).unwrap();
        assert_eq!(dec.tau, 0.25);
        let e = dec.e.as_matrix();
        let expected = SymMatrix::from_diagonal(&[1.0, 1.0, 2.0, 1.0]);
        assert!((e - expected.as_matrix()).norm() < 1e-14);
        let want = [15.9375, 7.9375, 3.9375, 1.875, 0.9375, 0.875, 0.4375];
        assert_eq!(dec.d(), 7);
        for (a, b) in dec.sigma_inv.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        let ones = vec![1.0; 7];
        let s = dec.apply_sigma_inv(&ones).unwrap();
        assert!(sub(&s, &want) < 1e-14);
        assert!(sub(&dec.apply_sigma(&s).unwrap(), &ones) < 1e-14);

        let x = svec_of(&SymMatrix::identity(4));
        let ex = dec.apply_e(&x).unwrap();
        assert!(sub(&ex, &svec_of(&SymMatrix::from_diagonal(&[1.0, 1.0, 4.0, 1.0]))) < 1e-14);
    }

    fn svec_of(m: &SymMatrix) -> Vec<f64> {
        m.to_svec().into_vec()
    }

    #[test]
    fn build_identity_spectrum() {
        let dec = ScalingDecomposition::build(&scaling_from(SymMatrix::identity(3), vec![]), 1).unwrap();
        assert_eq!(dec.tau, 0.5);
        let expected = dec.q.clone() * dec.q.transpose() + dec.q_perp.clone() * dec.q_perp.transpose() * 2.0;
        assert!((dec.e.as_matrix() - expected).norm() < 1e-14);
        assert!(dec.sigma_inv.iter().all(|s| (s - 0.75).abs() < 1e-14 || (s - 0.5).abs() < 1e-14));
        assert!((dec.sigma_inv[0] - 0.75).abs() < 1e-14);
    }

    #[test]
    fn build_rejects_degenerate_rank() {
        let w = SymMatrix::from_diagonal(&[1.0, 1.0, 0.0]);
        let err = ScalingDecomposition::build(&scaling_from(w, vec![]), 2).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpectrum { rank: 2, .. }));
        let w = SymMatrix::from_diagonal(&[1.0, 3.0]);
        let err = ScalingDecomposition::build(&scaling_from(w, vec![]), 2).unwrap_err();
        assert!(matches!(err, Error::InvalidDimension(_)));
    }

    #[test]
    fn exactness_random_with_lp() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 12;
        let w = random_spectrum_w(n, &mut rng);
        let w_lp: Vec<f64> = (0..5).map(|_| 10f64.powf(rng.random_range(-3.0..3.0))).collect();
        let sc = scaling_from(w.clone(), w_lp.clone());
        let dec = ScalingDecomposition::build(&sc, 3).unwrap();
        let wn = sc.eig.max_value();
        for _ in 0..20 {
            let x = random_vec(dec.primal_dim(), &mut rng);
            let lhs = dec.apply_w_kron(&x).unwrap();
            let qt = dec.apply_qt(&x).unwrap();
            let sq = dec.apply_sigma_inv(&qt).unwrap();
            let mut rhs = dec.apply_q(&sq).unwrap();
            let ex = dec.apply_e(&x).unwrap();
            for (o, e) in rhs.iter_mut().zip(&ex) {
                *o += dec.tau * dec.tau * e;
            }
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = wn.max(*w_lp.iter().fold(&0.0, |a, b| if b > a { b } else { a })).powi(2);
            assert!(sub(&lhs, &rhs) <= 1e-10 * scale * xn);
            let wx = &w.as_matrix().clone();
            let xm = smat_from(&x[5..], n);
            let dense = wx * xm * wx;
            let mut want = vec![0.0; svec_len(n)];
            svec_into(&dense, &mut want);
            assert!(sub(&lhs[5..], &want) <= 1e-10 * scale * xn);
        }
    }

    #[test]
    fn isometry_and_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let n = 9;
        let sc = scaling_from(random_spectrum_w(n, &mut rng), vec![5.0, 1e-3, 2.0]);
        let dec = ScalingDecomposition::build(&sc, 4).unwrap();
        assert_eq!(dec.d_psd(), n * 4 - 4 * 3 / 2);
        for _ in 0..100 {
            let h = random_vec(dec.d(), &mut rng);
            let back = dec.apply_qt(&dec.apply_q(&h).unwrap()).unwrap();
            assert!(sub(&back, &h) <= 1e-12 * (h.len() as f64).sqrt());
            let x = random_vec(dec.primal_dim(), &mut rng);
            let lhs: f64 = dec.apply_q(&h).unwrap().iter().zip(&x).map(|(a, b)| a * b).sum();
            let rhs: f64 = h.iter().zip(dec.apply_qt(&x).unwrap()).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0) * 10.0);
        }
    }

    #[test]
    fn apply_q_and_qt_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 6;
        let sc = scaling_from(random_spectrum_w(n, &mut rng), vec![]);
        let dec = ScalingDecomposition::build(&sc, 2).unwrap();
        let mut h = vec![0.0; dec.d()];
        h[0] = 1.0;
        h[2] = 1.0;
        let qqt = SymMatrix::from_matrix(&dec.q * dec.q.transpose()).unwrap();
        assert!(sub(&dec.apply_q(&h).unwrap(), &svec_of(&qqt)) < 1e-13);
        assert!(dec.apply_q(&vec![0.0; dec.d()]).unwrap().iter().all(|v| *v == 0.0));
        let qt_i = dec.apply_qt(&svec_of(&SymMatrix::identity(n))).unwrap();
        assert!(sub(&qt_i, &h) < 1e-13);
        let a = SymMatrix::from_rows(&[&[2.0, -1.0], &[-1.0, 3.0]]).unwrap();
        let x = SymMatrix::from_matrix(&dec.q * a.as_matrix() * dec.q.transpose()).unwrap();
        let mut want = svec_of(&a);
        want.extend(vec![0.0; dec.d() - 3]);
        assert!(sub(&dec.apply_qt(&svec_of(&x)).unwrap(), &want) < 1e-13);
        assert!(dec.apply_q(&[1.0]).is_err());
        assert!(dec.apply_qt(&[1.0]).is_err());
    }

    #[test]
    fn basis_factors_reproduce_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let n = 7;
        let sc = scaling_from(random_spectrum_w(n, &mut rng), vec![]);
        let dec = ScalingDecomposition::build(&sc, 3).unwrap();
        for k in 0..dec.d() {
            let mut h = vec![0.0; dec.d()];
            h[k] = 1.0;
            let col = dec.apply_q(&h).unwrap();
            let (u, v) = dec.basis_factors(k);
            let m = (&u * v.transpose() + &v * u.transpose()) * 0.5;
            let mut got = vec![0.0; svec_len(n)];
            svec_into(&m, &mut got);
            assert!(sub(&col, &got) < 1e-14, "column {k}");
        }
    }

    #[test]
    fn e_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let sc = scaling_from(random_spectrum_w(5, &mut rng), vec![0.3, 40.0]);
        let dec = ScalingDecomposition::build(&sc, 2).unwrap();
        let x = random_vec(dec.primal_dim(), &mut rng);
        let back = dec.apply_e_inv(&dec.apply_e(&x).unwrap()).unwrap();
        assert!(sub(&back, &x) < 1e-10);
    }

    #[test]
    fn eigenvalue_bounds_on_e_and_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for trial in 0..30 {
            let n = 6 + trial % 10;
            let sc = scaling_from(random_spectrum_w(n, &mut rng), vec![]);
            let r = 1 + trial % 4;
            let w = &sc.eig.values;
            let Ok(dec) = ScalingDecomposition::build(&sc, r) else { continue };
            let ee = eig_sym(&dec.e).unwrap();
            assert!(ee.max_value().powi(2) <= 4.0 + 1e-12);
            assert!(ee.min_value().powi(2) >= (w[n - 1] / w[r]).powi(2) * (1.0 - 1e-12));
            let t2 = dec.tau * dec.tau;
            let smin = dec.sigma_inv.iter().map(|s| 1.0 / s).fold(f64::INFINITY, f64::min);
            let smax = dec.sigma_inv.iter().map(|s| 1.0 / s).fold(0.0, f64::max);
            assert!(w[n - 1].powi(2) / (4.0 * w[0].powi(2)) <= t2 * smin * (1.0 + 1e-12));
            assert!(t2 * smax <= w[r].powi(2) / (w[n - 1] * w[r - 1]) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn lp_split_is_exact_and_bounded() {
        let w = SymMatrix::from_diagonal(&[4.0, 1.0]);
        let sc = scaling_from(w, vec![3.0, 1.0, 0.5, 0.01]);
        let dec = ScalingDecomposition::build(&sc, 1).unwrap();
        assert_eq!(dec.tau, 0.5);
        assert_eq!(dec.lp_large, vec![0]);
        assert_eq!(dec.lp_threshold, 2.0);
        let w2 = dec.w_lp_squared();
        for (a, b) in w2.iter().zip([9.0, 1.0, 0.25, 1e-4]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(dec.lp_e.iter().all(|e| *e <= 4.0));
    }

    #[test]
    fn small_lp_entry_above_psd_tail_raises_tau() {
        let w = SymMatrix::from_diagonal(&[4.0, 1.0]);
        let sc = scaling_from(w, vec![1.5, 0.2, 8.0]);
        let dec = ScalingDecomposition::build(&sc, 1).unwrap();
        assert_eq!(dec.tau, 0.75);
        assert_eq!(dec.lp_large, vec![2]);
        assert!(dec.lp_e.iter().all(|e| *e <= 4.0));
        let x = vec![1.0, -2.0, 0.5, 0.3, -0.7, 1.1];
        let lhs = dec.apply_w_kron(&x).unwrap();
        let mut rhs = dec.apply_q(&dec.apply_sigma_inv(&dec.apply_qt(&x).unwrap()).unwrap()).unwrap();
        for (o, e) in rhs.iter_mut().zip(dec.apply_e(&x).unwrap()) {
            *o += dec.tau * dec.tau * e;
        }
        let direct = [2.25, 0.04 * -2.0, 64.0 * 0.5, 16.0 * 0.3, 4.0 * -0.7, 1.1];
        assert!(sub(&lhs, &direct) < 1e-12);
        assert!(sub(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn rank_zero_puts_everything_in_e() {
        let sc = scaling_from(SymMatrix::from_diagonal(&[2.0]), vec![4.0, 0.1]);
        let dec = ScalingDecomposition::build(&sc, 0).unwrap();
        assert_eq!(dec.d_psd(), 0);
        assert_eq!(dec.d(), 1);
        let x = vec![1.0, 1.0, 1.0];
        let lhs = dec.apply_w_kron(&x).unwrap();
        let mut rhs = dec.apply_q(&dec.apply_sigma_inv(&dec.apply_qt(&x).unwrap()).unwrap()).unwrap();
        for (o, e) in rhs.iter_mut().zip(dec.apply_e(&x).unwrap()) {
            *o += dec.tau * dec.tau * e;
        }
        assert!(sub(&lhs, &rhs) < 1e-14);
        assert!((lhs[2] - 4.0).abs() < 1e-14);
    }
}
