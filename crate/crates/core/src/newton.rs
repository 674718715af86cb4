//! Newton step through the augmented system
//!
//! ```text
//! [ 𝐀𝐄𝐀ᵀ   𝐀𝐐  ] [u]   [ b̃ + τ²𝐀𝐄c̃ ]
//! [ 𝐐ᵀ𝐀ᵀ  −τ²Σ ] [v] = [ τ²𝐐ᵀc̃      ]
//! ```
//!
//! followed by `Δy = u/τ²`, `ΔX = 𝐄(𝐀ᵀu − τ²c̃) + 𝐐v`, `ΔS = c̃ − 𝒜ᵀΔy`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cones::ConePoint;
use crate::decomp::ScalingDecomposition;
use crate::error::{dim_err, Error, Result};
use crate::krylov::{minres, pcg, IdentityPreconditioner, KrylovResult, KrylovStatus, LinearOperator, Preconditioner};
use crate::operator::ConstraintOperator;
use crate::symlin::norm2;

pub const DEFAULT_BETA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMethod {
    Pcg,
    Minres,
}

impl std::str::FromStr for KrylovMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pcg" => Ok(KrylovMethod::Pcg),
            "minres" => Ok(KrylovMethod::Minres),
            other => Err(format!("unknown Krylov method '{other}' (expected pcg or minres)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovSettings {
    pub method: KrylovMethod,
    /// Stopping tolerance relative to the augmented right-hand side norm.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        KrylovSettings { method: KrylovMethod::Pcg, rel_tol: 1e-10, max_iter: 5000 }
    }
}

pub struct AugmentedSystem<'a> {
    pub op: &'a dyn ConstraintOperator,
    pub dec: &'a ScalingDecomposition,
}

impl<'a> AugmentedSystem<'a> {
    pub fn new(op: &'a dyn ConstraintOperator, dec: &'a ScalingDecomposition) -> Result<Self> {
        let layout = op.layout();
        if layout.psd_order != dec.order() || layout.lp_dim != dec.lp_dim() {
            return dim_err(format!(
                "operator layout {layout:?} does not match decomposition (n = {}, lp = {})",
                dec.order(),
                dec.lp_dim()
            ));
        }
        Ok(AugmentedSystem { op, dec })
    }

    pub fn m(&self) -> usize {
        self.op.num_constraints()
    }

    pub fn d(&self) -> usize {
        self.dec.d()
    }

    /// `𝐀𝐐h`, using the thin factorization of `𝐐h`.
    pub fn aq(&self, h: &[f64]) -> Vec<f64> {
        let dec = self.dec;
        let mut lp = vec![0.0; dec.lp_dim()];
        for (k, &i) in dec.lp_large.iter().enumerate() {
            lp[i] = h[dec.d_psd() + k];
        }
        let u = if dec.r > 0 { dec.tangent_factor(h) } else { DMatrix::zeros(dec.order(), 0) };
        self.op.forward_lowrank(&lp, &u, &dec.q)
    }

    /// `𝐐ᵀ𝐀ᵀy`.
    pub fn qt_at(&self, y: &[f64]) -> Vec<f64> {
        let (lp, zq) = self.op.adjoint_times(y, &self.dec.q);
        self.dec.qt_from_xq(&lp, &zq)
    }

    pub fn apply_checked(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return dim_err(format!("augmented input of length {}, expected {}", x.len(), self.dim()));
        }
        Ok(self.apply(x))
    }

    pub fn build_rhs(&self, rhs: &NewtonRhs) -> Result<Vec<f64>> {
        self.check_rhs(rhs)?;
        let t2 = self.dec.tau * self.dec.tau;
        let ec = self.dec.apply_e(&rhs.c_tilde)?;
        let aec = self.op.forward(&ec);
        let mut out: Vec<f64> = rhs.b_tilde.iter().zip(&aec).map(|(b, a)| b + t2 * a).collect();
        out.extend(self.dec.apply_qt(&rhs.c_tilde)?.into_iter().map(|v| t2 * v));
        Ok(out)
    }

    fn check_rhs(&self, rhs: &NewtonRhs) -> Result<()> {
        if rhs.b_tilde.len() != self.m() || rhs.c_tilde.len() != self.dec.primal_dim() {
            return dim_err("Newton right-hand side does not match the system");
        }
        if rhs.b_tilde.iter().chain(&rhs.c_tilde).any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite Newton right-hand side".into()));
        }
        Ok(())
    }

    /// `(ΔX, Δy, ΔS)` from an augmented solution `[u; v]`.
    pub fn recover(&self, uv: &[f64], rhs: &NewtonRhs) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let m = self.m();
        let t2 = self.dec.tau * self.dec.tau;
        let (u, v) = uv.split_at(m);
        let dy: Vec<f64> = u.iter().map(|x| x / t2).collect();
        let atu = self.op.adjoint(u);
        let g: Vec<f64> = atu.iter().zip(&rhs.c_tilde).map(|(a, c)| a - t2 * c).collect();
        let mut dx = self.dec.apply_e(&g)?;
        for (o, q) in dx.iter_mut().zip(self.dec.apply_q(v)?) {
            *o += q;
        }
        let aty = self.op.adjoint(&dy);
        let ds = rhs.c_tilde.iter().zip(&aty).map(|(c, a)| c - a).collect();
        Ok((dx, dy, ds))
    }
}

impl LinearOperator for AugmentedSystem<'_> {
    fn dim(&self) -> usize {
        self.m() + self.d()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m();
        let (u, v) = x.split_at(m);
        let z = self.op.adjoint(u);
        let mut inner = self.dec.apply_e(&z).expect("layout checked on construction");
        for (o, q) in inner.iter_mut().zip(self.dec.apply_q(v).expect("length checked")) {
            *o += q;
        }
        let mut out = self.op.forward(&inner);
        let t2 = self.dec.tau * self.dec.tau;
        let qz = self.dec.apply_qt(&z).expect("layout checked on construction");
        let sig = self.dec.sigma_inv_full();
        out.extend(qz.iter().zip(v).zip(&sig).map(|((a, b), s)| a - t2 * b / s));
        out
    }
}

/// Solves `[βI, 𝐀𝐐; 𝐐ᵀ𝐀ᵀ, −τ²Σ][u; v] = [f; g]` through the factored Schur complement
/// `C = τ²Σ + β⁻¹𝐐ᵀ𝐀ᵀ𝐀𝐐`.
pub struct SchurPreconditioner<'a> {
    pub beta: f64,
    pub c: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    sys: &'a AugmentedSystem<'a>,
}

impl<'a> SchurPreconditioner<'a> {
    pub fn build(sys: &'a AugmentedSystem<'a>, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::PreconditionerFailure(format!("beta must be positive, got {beta}")));
        }
        let dec = sys.dec;
        let d = dec.d();
        let dp = dec.d_psd();
        let n = dec.order();
        let mut c = DMatrix::zeros(d, d);
        let mut lp = vec![0.0; dec.lp_dim()];
        let empty = DMatrix::zeros(n, 0);
        for k in 0..d {
            let aqe = if k < dp {
                let (u, v) = dec.basis_factors(k);
                sys.op.forward_lowrank(&lp, &u, &v)
            } else {
                let i = dec.lp_large[k - dp];
                lp[i] = 1.0;
                let col = sys.op.forward_lowrank(&lp, &empty, &empty);
                lp[i] = 0.0;
                col
            };
            let col = sys.qt_at(&aqe);
            for (j, v) in col.iter().enumerate() {
                c[(j, k)] = v / beta;
            }
        }
        let c = (&c + c.transpose()) * 0.5;
        let mut c = c;
        let t2 = dec.tau * dec.tau;
        for (k, s) in dec.sigma_inv_full().iter().enumerate() {
            c[(k, k)] += t2 / s;
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::PreconditionerFailure("non-finite Schur complement".into()));
        }
        let factor = Cholesky::new(c.clone())
            .ok_or_else(|| Error::PreconditionerFailure(format!("Schur complement of order {d} is not positive definite")))?;
        Ok(SchurPreconditioner { beta, c, factor, sys })
    }

    pub fn solve_c(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.solve(&DVector::from_column_slice(rhs)).as_slice().to_vec()
    }

    /// The preconditioner matrix applied to `[u; v]`; used to check solves.
    pub fn apply_forward(&self, uv: &[f64]) -> Vec<f64> {
        let m = self.sys.m();
        let (u, v) = uv.split_at(m);
        let aqv = self.sys.aq(v);
        let mut out: Vec<f64> = u.iter().zip(&aqv).map(|(a, b)| self.beta * a + b).collect();
        let t2 = self.sys.dec.tau * self.sys.dec.tau;
        let qtu = self.sys.qt_at(u);
        let sig = self.sys.dec.sigma_inv_full();
        out.extend(qtu.iter().zip(v).zip(&sig).map(|((a, b), s)| a - t2 * b / s));
        out
    }
}

impl Preconditioner for SchurPreconditioner<'_> {
    fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let m = self.sys.m();
        let (f, g) = r.split_at(m);
        let t = self.sys.qt_at(f);
        let w: Vec<f64> = t.iter().zip(g).map(|(t, g)| t / self.beta - g).collect();
        let v = self.solve_c(&w);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::PreconditionerFailure("non-finite Schur solve".into()));
        }
        let aqv = self.sys.aq(&v);
        let mut out: Vec<f64> = f.iter().zip(&aqv).map(|(f, a)| (f - a) / self.beta).collect();
        out.extend(v);
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct NewtonRhs {
    pub b_tilde: Vec<f64>,
    /// Stacked `[lp | svec]`.
    pub c_tilde: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NewtonDirection {
    pub dx: ConePoint,
    pub dy: Vec<f64>,
    pub ds: ConePoint,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: KrylovStatus,
    /// Augmented-system residual relative to its right-hand side.
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
}

/// Initial point `[0; −Σ⁻¹𝐐ᵀc̃]`, which zeroes the second-block residual.
///
/// Forming it multiplies `𝐐ᵀc̃` by `Σ⁻¹ ~ λ₁²`, so the first-block residual it leaves
/// grows like `1/μ`; [`pcg_start`] is used by the solver instead.
pub fn pcg_start_sigma(sys: &AugmentedSystem, rhs: &NewtonRhs) -> Result<Vec<f64>> {
    let mut x0 = vec![0.0; sys.m()];
    let qc = sys.dec.apply_qt(&rhs.c_tilde)?;
    x0.extend(qc.iter().zip(sys.dec.sigma_inv_full()).map(|(q, s)| -s * q));
    Ok(x0)
}

/// Initial point `P⁻¹[0; τ²𝐐ᵀc̃]`.
///
/// The preconditioner shares its second block row with the augmented matrix, so this point
/// also zeroes the second-block residual, without dividing by `Σ`.
pub fn pcg_start(sys: &AugmentedSystem, prec: &SchurPreconditioner, rhs: &NewtonRhs) -> Result<Vec<f64>> {
    let t2 = sys.dec.tau * sys.dec.tau;
    let mut r = vec![0.0; sys.m()];
    r.extend(sys.dec.apply_qt(&rhs.c_tilde)?.into_iter().map(|v| t2 * v));
    prec.solve(&r)
}

/// Builds the Schur preconditioner when needed and solves.
pub fn solve_newton(sys: &AugmentedSystem, rhs: &NewtonRhs, settings: KrylovSettings, beta: f64) -> Result<NewtonDirection> {
    match settings.method {
        KrylovMethod::Pcg => {
            let prec = SchurPreconditioner::build(sys, beta)?;
            solve_newton_with(sys, Some(&prec), rhs, settings)
        }
        KrylovMethod::Minres => solve_newton_with(sys, None, rhs, settings),
    }
}

/// Solves with a prebuilt preconditioner (ignored by MINRES).
pub fn solve_newton_with(
    sys: &AugmentedSystem,
    prec: Option<&SchurPreconditioner>,
    rhs: &NewtonRhs,
    settings: KrylovSettings,
) -> Result<NewtonDirection> {
    let aug_rhs = sys.build_rhs(rhs)?;
    let scale = norm2(&aug_rhs).max(1.0);
    let tol = settings.rel_tol * scale;
    let res: KrylovResult = match (settings.method, prec) {
        (KrylovMethod::Pcg, Some(p)) => {
            let x0 = pcg_start(sys, p, rhs)?;
            pcg(sys, &aug_rhs, p, Some(&x0), tol, settings.max_iter)?
        }
        (KrylovMethod::Pcg, None) => {
            return Err(Error::PreconditionerFailure("PCG requested without a preconditioner".into()))
        }
        (KrylovMethod::Minres, _) => {
            // MINRES spreads its residual over both blocks, and recovery divides the first
            // block by τ², so the target shrinks with τ².
            let t2 = sys.dec.tau * sys.dec.tau;
            minres(sys, &aug_rhs, &IdentityPreconditioner, None, tol * t2.min(1.0), settings.max_iter)?
        }
    };
    let (dx, dy, ds) = sys.recover(&res.x, rhs)?;
    let kkt_residual = kkt_residual_check(sys.dec, sys.op, &dx, &dy, rhs)?;
    let layout = sys.op.layout();
    Ok(NewtonDirection {
        dx: ConePoint::from_vec(layout, &dx)?,
        dy,
        ds: ConePoint::from_vec(layout, &ds)?,
        kkt_residual,
        iterations: res.iterations,
        converged: res.converged,
        status: res.status,
        relative_residual: res.final_residual / scale,
        residual_history: res.residual_history,
    })
}

/// Norm of `[−(W⊗ₛW)⁻¹ΔX + 𝒜ᵀΔy − c̃ ; 𝒜ΔX − b̃]`.
pub fn kkt_residual_check(
    dec: &ScalingDecomposition,
    op: &dyn ConstraintOperator,
    dx: &[f64],
    dy: &[f64],
    rhs: &NewtonRhs,
) -> Result<f64> {
    let winv = kkt_first_block(dec, op, dx, dy, rhs)?;
    let adx = op.forward(dx);
    let second: f64 = adx.iter().zip(&rhs.b_tilde).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((norm2(&winv).powi(2) + second).sqrt())
}

/// First block `−(W⊗ₛW)⁻¹ΔX + 𝒜ᵀΔy − c̃` of the KKT residual.
pub fn kkt_first_block(
    dec: &ScalingDecomposition,
    op: &dyn ConstraintOperator,
    dx: &[f64],
    dy: &[f64],
    rhs: &NewtonRhs,
) -> Result<Vec<f64>> {
    if dx.len() != dec.primal_dim() || dy.len() != op.num_constraints() {
        return dim_err("direction does not match the system");
    }
    let winv = apply_w_kron_inv(dec, dx)?;
    let aty = op.adjoint(dy);
    Ok(winv.iter().zip(&aty).zip(&rhs.c_tilde).map(|((w, a), c)| -w + a - c).collect())
}

/// `[x_lp / w² | svec(W⁻¹ X W⁻¹)]`.
pub fn apply_w_kron_inv(dec: &ScalingDecomposition, x: &[f64]) -> Result<Vec<f64>> {
    if dec.lambda.iter().chain(&dec.lambda_perp).any(|l| !(*l > 0.0)) {
        return Err(Error::NotInteriorPoint("scaling matrix is singular".into()));
    }
    let inv = crate::symlin::EigenDecomposition {
        vectors: {
            let n = dec.order();
            let mut v = DMatrix::zeros(n, n);
            v.columns_mut(0, dec.r).copy_from(&dec.q);
            v.columns_mut(dec.r, n - dec.r).copy_from(&dec.q_perp);
            v
        },
        values: dec.lambda.iter().chain(&dec.lambda_perp).map(|l| 1.0 / l).collect(),
    }
    .reconstruct();
    let l = dec.lp_dim();
    let w2 = dec.w_lp_squared();
    let mut out = vec![0.0; x.len()];
    for i in 0..l {
        out[i] = x[i] / w2[i];
    }
    let xm = crate::symlin::smat_from(&x[l..], dec.order());
    let prod = inv.as_matrix() * xm * inv.as_matrix();
    crate::symlin::svec_into(&prod, &mut out[l..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::{ConeLayout, NtScaling};
    use crate::krylov::DenseOperator;
    use crate::operator::SparseOperator;
    use crate::symlin::{eig_sym, svec_len, EigenDecomposition, SymMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_w(n: usize, spread: f64, rng: &mut ChaCha8Rng) -> SymMatrix {
        let q = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)).qr().q();
        let vals = (0..n).map(|_| spread.powf(rng.random_range(-1.0..1.0))).collect();
        EigenDecomposition { vectors: q, values: vals }.reconstruct()
    }

    fn scaling(w: SymMatrix, w_lp: Vec<f64>) -> NtScaling {
        let eig = eig_sym(&w).unwrap();
        NtScaling { w_lp, w, eig }
    }

    fn random_op(rng: &mut ChaCha8Rng, l: usize, n: usize, m: usize) -> SparseOperator {
        let layout = ConeLayout::new(l, n).unwrap();
        let mut t = Vec::new();
        for k in 0..m {
            for c in 0..layout.dim() {
                if rng.random_bool(0.4) || c == k % layout.dim() {
                    t.push((k, c, rng.sample(StandardNormal)));
                }
            }
        }
        SparseOperator::from_triplets(layout, m, &t).unwrap()
    }

    fn rv(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn dense_of(op: &dyn LinearOperator) -> DMatrix<f64> {
        let n = op.dim();
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            a.set_column(j, &DVector::from_vec(op.apply(&e)));
        }
        a
    }

    #[test]
    fn augmented_operator_is_symmetric_and_matches_dense_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let n = 10;
        let op = random_op(&mut rng, 3, n, 20);
        let dec = ScalingDecomposition::build(&scaling(random_w(n, 100.0, &mut rng), vec![5.0, 0.01, 1.0]), 3).unwrap();
        let sys = AugmentedSystem::new(&op, &dec).unwrap();
        let a = op.to_dense();
        let dim = dec.primal_dim();
        let mut e = DMatrix::zeros(dim, dim);
        let mut q = DMatrix::zeros(dim, dec.d());
        for j in 0..dim {
            let mut x = vec![0.0; dim];
            x[j] = 1.0;
            e.set_column(j, &DVector::from_vec(dec.apply_e(&x).unwrap()));
        }
        for j in 0..dec.d() {
            let mut h = vec![0.0; dec.d()];
            h[j] = 1.0;
            q.set_column(j, &DVector::from_vec(dec.apply_q(&h).unwrap()));
        }
        let t2 = dec.tau * dec.tau;
        let sig = DMatrix::from_diagonal(&DVector::from_vec(dec.sigma_inv_full().iter().map(|s| t2 / s).collect()));
        let m = 20;
        let d = dec.d();
        let mut dense = DMatrix::zeros(m + d, m + d);
        dense.view_mut((0, 0), (m, m)).copy_from(&(&a * &e * a.transpose()));
        dense.view_mut((0, m), (m, d)).copy_from(&(&a * &q));
        dense.view_mut((m, 0), (d, m)).copy_from(&(q.transpose() * a.transpose()));
        dense.view_mut((m, m), (d, d)).copy_from(&(-sig));
        let got = dense_of(&sys);
        assert!((&got - &dense).norm() <= 1e-10 * dense.norm());
        assert!((&got - got.transpose()).norm() <= 1e-10 * got.norm());
        assert!(sys.apply_checked(&[1.0]).is_err());
    }

    #[test]
    fn augmented_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let n = 5;
        let op = random_op(&mut rng, 0, n, 8);
        // Flat spectrum at rank 0: E = W/τ = 2I, so 𝐄 = 4I.
        let dec = ScalingDecomposition::build(&scaling(SymMatrix::identity(n).scale(0.5), vec![]), 0).unwrap();
        assert!((dec.e.as_matrix() - DMatrix::identity(n, n) * 2.0).norm() < 1e-14);
        let sys = AugmentedSystem::new(&op, &dec).unwrap();
        let u = rv(8, &mut rng);
        let got = sys.apply(&u);
        let a = op.to_dense();
        let want = &a * a.transpose() * DVector::from_column_slice(&u) * 4.0;
        assert!((DVector::from_vec(got) - want).norm() < 1e-12);

        let dec = ScalingDecomposition::build(&scaling(random_w(n, 10.0, &mut rng), vec![]), 2).unwrap();
        let sys = AugmentedSystem::new(&op, &dec).unwrap();
        let v = rv(dec.d(), &mut rng);
        let mut x = vec![0.0; 8];
        x.extend_from_slice(&v);
        let got = sys.apply(&x);
        let aqv = op.forward(&dec.apply_q(&v).unwrap());
        let t2 = dec.tau * dec.tau;
        for k in 0..8 {
            assert!((got[k] - aqv[k]).abs() < 1e-12);
        }
        for k in 0..dec.d() {
            assert!((got[8 + k] + t2 * v[k] / dec.sigma_inv[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn build_rhs_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let n = 4;
        let op = random_op(&mut rng, 0, n, 6);
        let dec = ScalingDecomposition::build(&scaling(random_w(n, 10.0, &mut rng), vec![]), 1).unwrap();
        let sys = AugmentedSystem::new(&op, &dec).unwrap();
        let b = rv(6, &mut rng);
        let rhs = NewtonRhs { b_tilde: b.clone(), c_tilde: vec![0.0; svec_len(n)] };
        let out = sys.build_rhs(&rhs).unwrap();
        assert_eq!(&out[..6], &b[..]);
        assert!(out[6..].iter().all(|v| *v == 0.0));

        let id = SymMatrix::identity(n).to_svec().into_vec();
        let rhs = NewtonRhs { b_tilde: vec![0.0; 6], c_tilde: id.clone() };
        let out = sys.build_rhs(&rhs).unwrap();
        let ee = SymMatrix::from_matrix(dec.e.as_matrix() * dec.e.as_matrix()).unwrap().to_svec().into_vec();
        let t2 = dec.tau * dec.tau;
        let top = op.forward(&ee);
        let bottom = dec.apply_qt(&id).unwrap();
        for k in 0..6 {
            assert!((out[k] - t2 * top[k]).abs() < 1e-12);
        }
        for k in 0..dec.d() {
            assert!((out[6 + k] - t2 * bottom[k]).abs() < 1e-12);
        }
        let bad = NewtonRhs { b_tilde: vec![f64::NAN; 6], c_tilde: id };
        assert!(sys.build_rhs(&bad).is_err());
    }

    #[test]
    fn preconditioner_matches_dense_schur_and_solves_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let n = 8;
        let op = random_op(&mut rng, 4, n, 15);
        let dec = ScalingDecomposition::build(&scaling(random_w(n, 50.0, &mut rng), vec![20.0, 0.1, 3.0, 1e-3]), 2).unwrap();
        let sys = AugmentedSystem::new(&op, &dec).unwrap();
        let beta = 3.0;
        let prec = SchurPreconditioner::build(&sys, beta).unwrap();
        let a = op.to_dense();
        let d = dec.d();
        let mut q = DMatrix::zeros(dec.primal_dim(), d);
        for j in 0..d {
            let mut h = vec![0.0; d];
            h[j] = 1.0;
            q.set_column(j, &DVector::from_vec(dec.apply_q(&h).unwrap()));
        }
        let aq = &a * &q;
        let t2 = dec.tau * dec.tau;
        let mut c = aq.transpose() * &aq / beta;
        for (k, s) in dec.sigma_inv_full().iter().enumerate() {
            c[(k, k)] += t2 / s;
        }
        assert!((&prec.c - &c).norm() <= 1e-12 * c.norm());

        for _ in 0..5 {
            let fg = rv(15 + d, &mut rng);
            let uv = prec.solve(&fg).unwrap();
            let back = prec.apply_forward(&uv);
            let err: f64 = back.iter().zip(&fg).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-10 * norm2(&fg));
        }
        assert!(SchurPreconditioner::build(&sys, 0.0).is_err());
    }

    #[test]
    fn preconditioner_closed_forms() {
        let n = 3;
        let layout = ConeLayout::new(0, n).unwrap();
        let t: Vec<_> = (0..svec_len(n)).map(|k| (k, k, 1.0)).collect();
        let op = SparseOperator::from_triplets(layout, svec_len(n), &t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let dec = ScalingDecomposition::build(&scaling(random_w(n, 10.0, &mut rng), vec![]), 1).unwrap();
        let sys = AugmentedSystem::new(&op, &dec).unwrap();
        let prec = SchurPreconditioner::build(&sys, 2.0).unwrap();
        let t2 = dec.tau * dec.tau;
        let mut want = DMatrix::identity(dec.d(), dec.d()) * 0.5;
        for (k, s) in dec.sigma_inv.iter().enumerate() {
            want[(k, k)] += t2 / s;
        }
        assert!((&prec.c - want).norm() < 1e-13);
    }

    #[test]
    fn newton_direction_matches_dense_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let n = 6;
        let l = 2;
        let m = 12;
        let op = random_op(&mut rng, l, n, m);
        let dec = ScalingDecomposition::build(&scaling(random_w(n, 30.0, &mut rng), vec![4.0, 0.05]), 2).unwrap();
        let sys = AugmentedSystem::new(&op, &dec).unwrap();
        let rhs = NewtonRhs { b_tilde: rv(m, &mut rng), c_tilde: rv(dec.primal_dim(), &mut rng) };

        let dim = dec.primal_dim();
        let mut winv = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let mut x = vec![0.0; dim];
            x[j] = 1.0;
            winv.set_column(j, &DVector::from_vec(apply_w_kron_inv(&dec, &x).unwrap()));
        }
        let a = op.to_dense();
        let mut k = DMatrix::zeros(dim + m, dim + m);
        k.view_mut((0, 0), (dim, dim)).copy_from(&(-winv));
        k.view_mut((0, dim), (dim, m)).copy_from(&a.transpose());
        k.view_mut((dim, 0), (m, dim)).copy_from(&a);
        let mut r = rhs.c_tilde.clone();
        r.extend_from_slice(&rhs.b_tilde);
        let sol = k.lu().solve(&DVector::from_vec(r)).unwrap();

        for method in [KrylovMethod::Pcg, KrylovMethod::Minres] {
            let settings = KrylovSettings { method, rel_tol: 1e-13, max_iter: 2000 };
            let dir = solve_newton(&sys, &rhs, settings, DEFAULT_BETA).unwrap();
            let dx = dir.dx.to_vec();
            let ex = sol.rows(0, dim);
            let ey = sol.rows(dim, m);
            let err_x = (DVector::from_vec(dx) - ex).norm() / ex.norm();
            let err_y = (DVector::from_vec(dir.dy.clone()) - ey).norm() / ey.norm();
            assert!(err_x < 1e-7 && err_y < 1e-7, "{method:?}: {err_x:e} {err_y:e}");
            let ds = dir.ds.to_vec();
            let aty = op.adjoint(&dir.dy);
            for i in 0..dim {
                assert!((ds[i] - (rhs.c_tilde[i] - aty[i])).abs() < 1e-12 * (1.0 + aty[i].abs()));
            }
        }
    }

    #[test]
    fn identity_scaling_orthonormal_rows() {
        let n = 3;
        let layout = ConeLayout::new(0, n).unwrap();
        let op = SparseOperator::from_triplets(layout, 2, &[(0, 0, 1.0), (1, 4, 1.0)]).unwrap();
        let dec = ScalingDecomposition::build(&scaling(SymMatrix::identity(n), vec![]), 1).unwrap();
        let sys = AugmentedSystem::new(&op, &dec).unwrap();
        let rhs = NewtonRhs { b_tilde: vec![0.7, -1.3], c_tilde: vec![0.0; svec_len(n)] };
        let dir = solve_newton(&sys, &rhs, KrylovSettings::default(), DEFAULT_BETA).unwrap();
        assert!((dir.dy[0] - 0.7).abs() < 1e-9 && (dir.dy[1] + 1.3).abs() < 1e-9);
    }

    #[test]
    fn kkt_residual_of_zero_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let n = 4;
        let op = random_op(&mut rng, 1, n, 5);
        let dec = ScalingDecomposition::build(&scaling(random_w(n, 5.0, &mut rng), vec![1.0]), 1).unwrap();
        let rhs = NewtonRhs { b_tilde: rv(5, &mut rng), c_tilde: rv(dec.primal_dim(), &mut rng) };
        let res = kkt_residual_check(&dec, &op, &vec![0.0; dec.primal_dim()], &[0.0; 5], &rhs).unwrap();
        let want = (norm2(&rhs.b_tilde).powi(2) + norm2(&rhs.c_tilde).powi(2)).sqrt();
        assert!((res - want).abs() < 1e-12 * want);
    }

    #[test]
    fn dense_operator_round_trip_helper() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(dense_of(&DenseOperator(a.clone())), a);
    }
}
