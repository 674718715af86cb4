//! Matrix-free MINRES and PCG.
//!
//! Both solvers recompute the true residual `‖b − A x_k‖` every iteration,
//! use it for the stopping test, and return the iterate with the smallest
//! true residual seen.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symlin::{axpy, dot, norm2};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

/// Exposes `r ↦ P⁻¹ r`.
pub trait Preconditioner {
    fn solve(&self, r: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

/// Dense matrix as a linear operator.
#[derive(Debug, Clone)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.0.nrows()];
        for j in 0..self.0.ncols() {
            let xj = x[j];
            if xj != 0.0 {
                for (o, a) in out.iter_mut().zip(self.0.column(j).iter()) {
                    *o += a * xj;
                }
            }
        }
        out
    }
}

/// Dense preconditioner applied through an LU solve.
#[derive(Debug, Clone)]
pub struct DensePreconditioner(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>);

impl DensePreconditioner {
    pub fn new(p: DMatrix<f64>) -> Self {
        DensePreconditioner(p.lu())
    }
}

impl Preconditioner for DensePreconditioner {
    fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let rhs = nalgebra::DVector::from_column_slice(r);
        self.0
            .solve(&rhs)
            .map(|v| v.as_slice().to_vec())
            .ok_or_else(|| Error::PreconditionerFailure("singular dense preconditioner".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovStatus {
    Converged,
    MaxIterations,
    Stagnation,
}

#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub status: KrylovStatus,
    /// True residual norms, starting with the initial point.
    pub residual_history: Vec<f64>,
}

/// Iterations compared by the stagnation test.
pub const STAGNATION_WINDOW: usize = 50;
/// Required relative improvement of the best residual over one window.
pub const STAGNATION_FACTOR: f64 = 0.99;

struct Tracker<'a> {
    a: &'a dyn LinearOperator,
    b: &'a [f64],
    tol: f64,
    best_x: Vec<f64>,
    best: f64,
    best_by_iter: Vec<f64>,
    history: Vec<f64>,
}

impl<'a> Tracker<'a> {
    fn new(a: &'a dyn LinearOperator, b: &'a [f64], tol: f64, x0: &[f64]) -> (Self, Vec<f64>) {
        let ax = a.apply(x0);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let res = norm2(&r);
        let t = Tracker {
            a,
            b,
            tol,
            best_x: x0.to_vec(),
            best: res,
            best_by_iter: vec![res],
            history: vec![res],
        };
        (t, r)
    }

    /// Records iterate `x`; returns a status if the solve should stop.
    fn record(&mut self, x: &[f64]) -> Result<Option<KrylovStatus>> {
        let ax = self.a.apply(x);
        let res = self.b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt();
        if !res.is_finite() {
            return Err(Error::NumericalFailure("non-finite Krylov residual".into()));
        }
        self.history.push(res);
        if res < self.best {
            self.best = res;
            self.best_x.copy_from_slice(x);
        }
        self.best_by_iter.push(self.best);
        let k = self.best_by_iter.len() - 1;
        if res <= self.tol {
            return Ok(Some(KrylovStatus::Converged));
        }
        if k >= STAGNATION_WINDOW && self.best > STAGNATION_FACTOR * self.best_by_iter[k - STAGNATION_WINDOW] {
            return Ok(Some(KrylovStatus::Stagnation));
        }
        Ok(None)
    }

    fn finish(self, status: KrylovStatus) -> KrylovResult {
        KrylovResult {
            x: self.best_x,
            iterations: self.history.len() - 1,
            final_residual: self.best,
            converged: status == KrylovStatus::Converged,
            status,
            residual_history: self.history,
        }
    }
}

fn precond(p: &dyn Preconditioner, r: &[f64]) -> Result<Vec<f64>> {
    let z = p.solve(r)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::PreconditionerFailure("preconditioner produced non-finite values".into()));
    }
    Ok(z)
}

fn start(a: &dyn LinearOperator, b: &[f64], x0: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n || x0.is_some_and(|x| x.len() != n) {
        return Err(Error::InvalidDimension(format!("Krylov system of dimension {n}")));
    }
    Ok(x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec))
}

/// Preconditioned MINRES (Lanczos with Givens rotations). `P` must be SPD.
pub fn minres(
    a: &dyn LinearOperator,
    b: &[f64],
    p: &dyn Preconditioner,
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovResult> {
    let mut x = start(a, b, x0)?;
    let n = x.len();
    let (mut tr, mut r1) = Tracker::new(a, b, tol, &x);
    if tr.best <= tol {
        return Ok(tr.finish(KrylovStatus::Converged));
    }
    let mut y = precond(p, &r1)?;
    let ry = dot(&r1, &y);
    if !(ry > 0.0) {
        return Err(Error::PreconditionerFailure("preconditioner is not positive definite".into()));
    }
    let beta1 = ry.sqrt();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = a.apply(&v);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y);
        y = precond(p, &r2)?;
        oldb = beta;
        let ry = dot(&r2, &y);
        if ry < 0.0 {
            return Err(Error::PreconditionerFailure("preconditioner is not positive definite".into()));
        }
        beta = ry.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = (0..n).map(|i| (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma).collect();
        axpy(phi, &w, &mut x);

        if let Some(status) = tr.record(&x)? {
            return Ok(tr.finish(status));
        }
        if beta == 0.0 {
            return Ok(tr.finish(KrylovStatus::Stagnation));
        }
    }
    Ok(tr.finish(KrylovStatus::MaxIterations))
}

/// Preconditioned conjugate gradients. `A` and `P` need only be symmetric and
/// invertible; indefinite pairs with matching block structure are allowed.
pub fn pcg(
    a: &dyn LinearOperator,
    b: &[f64],
    p: &dyn Preconditioner,
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovResult> {
    pcg_observed(a, b, p, x0, tol, max_iter, &mut |_, _| {})
}

/// [`pcg`] that reports every iterate `x_k` (including `x_0`) to `observe`.
pub fn pcg_observed(
    a: &dyn LinearOperator,
    b: &[f64],
    p: &dyn Preconditioner,
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<KrylovResult> {
    let mut x = start(a, b, x0)?;
    observe(0, &x);
    let (mut tr, mut r) = Tracker::new(a, b, tol, &x);
    if tr.best <= tol {
        return Ok(tr.finish(KrylovStatus::Converged));
    }
    let mut z = precond(p, &r)?;
    let mut pdir = z.clone();
    let mut rz = dot(&r, &z);
    for k in 0..max_iter {
        let ap = a.apply(&pdir);
        let pap = dot(&pdir, &ap);
        if pap == 0.0 {
            return Err(Error::Breakdown { iteration: k });
        }
        if !pap.is_finite() {
            return Err(Error::NumericalFailure("non-finite curvature in PCG".into()));
        }
        let alpha = rz / pap;
        axpy(alpha, &pdir, &mut x);
        axpy(-alpha, &ap, &mut r);
        observe(k + 1, &x);
        if let Some(status) = tr.record(&x)? {
            return Ok(tr.finish(status));
        }
        z = precond(p, &r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in pdir.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(tr.finish(KrylovStatus::MaxIterations))
}
