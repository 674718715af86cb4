//! Primal-dual path following with Mehrotra predictor-corrector NT steps.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix};

use crate::cones::{centrality, duality_mu, mu_for_centrality, nt_scaling, psd_centrality, ConeLayout, ConePoint, NtScaling};
use crate::decomp::{select_rank, ScalingDecomposition};
use crate::error::{dim_err, Error, Result};
use crate::newton::{
    solve_newton_with, AugmentedSystem, KrylovMethod, KrylovSettings, NewtonDirection, NewtonRhs, SchurPreconditioner,
};
use crate::operator::ConstraintOperator;
use crate::symlin::{dot, eig_sym, norm2, SymMatrix};

/// `min ⟨c, x⟩ s.t. 𝒜x = b, x ∈ ℝ₊ˡ ⊕ 𝕊₊ⁿ`, with `x` stacked as `[lp | svec]`.
#[derive(Clone)]
pub struct ConicProgram {
    pub op: Arc<dyn ConstraintOperator>,
    pub b: Vec<f64>,
    pub cost: Vec<f64>,
}

impl std::fmt::Debug for ConicProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConicProgram")
            .field("layout", &self.layout())
            .field("m", &self.m())
            .finish()
    }
}

impl ConicProgram {
    pub fn new(op: Arc<dyn ConstraintOperator>, b: Vec<f64>, cost: Vec<f64>) -> Result<Self> {
        let layout = op.layout();
        if b.len() != op.num_constraints() {
            return dim_err(format!("b has length {}, operator has {} rows", b.len(), op.num_constraints()));
        }
        if cost.len() != layout.dim() {
            return dim_err(format!("cost has length {}, primal dimension is {}", cost.len(), layout.dim()));
        }
        if op.num_constraints() > layout.dim() {
            return dim_err("more constraints than primal coordinates");
        }
        Ok(ConicProgram { op, b, cost })
    }

    pub fn layout(&self) -> ConeLayout {
        self.op.layout()
    }

    pub fn m(&self) -> usize {
        self.op.num_constraints()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub tol_mu: f64,
    pub tol_feas: f64,
    pub max_outer: usize,
    /// Largest rank considered by the eigenvalue-gap rule.
    pub r_hat: usize,
    /// Overrides the gap rule when set.
    pub fixed_rank: Option<usize>,
    pub beta: f64,
    pub step_fraction: f64,
    pub krylov: KrylovSettings,
    /// Krylov results above this relative residual count as failures.
    pub accept_rel_residual: f64,
    pub keep_trajectory: bool,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            tol_mu: 1e-12,
            tol_feas: 1e-10,
            max_outer: 100,
            r_hat: 5,
            fixed_rank: None,
            beta: crate::newton::DEFAULT_BETA,
            step_fraction: 0.99,
            krylov: KrylovSettings::default(),
            accept_rel_residual: 1e-6,
            keep_trajectory: false,
        }
    }
}

impl IpmOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.tol_mu, self.tol_feas, self.beta, self.krylov.rel_tol, self.accept_rel_residual];
        if positive.iter().any(|v| !(*v > 0.0)) || self.r_hat == 0 || self.krylov.max_iter == 0 {
            return Err(Error::InvalidDimension("solver options must be positive".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::InvalidDimension(format!("step_fraction {} outside (0, 1)", self.step_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IpmState {
    pub x: ConePoint,
    pub y: Vec<f64>,
    pub s: ConePoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub mu: f64,
    pub centrality: f64,
    pub feas_p: f64,
    pub feas_d: f64,
    /// Rank used for the step taken from this iterate (0 on the terminal row).
    pub r: usize,
    pub tau: f64,
    pub d: usize,
    pub inner_iters: usize,
    pub cum_inner_iters: usize,
    pub setup_s: f64,
    pub krylov_s: f64,
    pub sigma: f64,
    pub alpha_p: f64,
    pub alpha_d: f64,
    /// PCG solves in this iteration that fell back to MINRES.
    pub pcg_failures: usize,
    /// Worst relative augmented residual among the accepted solves.
    pub krylov_rel_residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
}

impl IterationLog {
    pub fn cumulative_inner(&self) -> usize {
        self.records.last().map_or(0, |r| r.cum_inner_iters)
    }

    pub fn pcg_failures(&self) -> usize {
        self.records.iter().map(|r| r.pcg_failures).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Solved,
    MaxIterations,
    NumericalFailure(String),
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: ConePoint,
    pub y: Vec<f64>,
    pub s: ConePoint,
    pub mu: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub status: SolveStatus,
    pub log: IterationLog,
    /// The iterate at the start of every outer iteration, when requested.
    pub trajectory: Vec<IpmState>,
}

/// `X = ρ_p·e`, `S = ρ_d·e`, `y = 0` with `ρ_p = 1 + ‖b‖∞`, `ρ_d = 1 + ‖c‖`.
pub fn initial_point(prog: &ConicProgram) -> IpmState {
    let rho_p = 1.0 + prog.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rho_d = 1.0 + norm2(&prog.cost);
    IpmState {
        x: ConePoint::identity(prog.layout(), rho_p),
        y: vec![0.0; prog.m()],
        s: ConePoint::identity(prog.layout(), rho_d),
    }
}

#[derive(Debug, Clone)]
pub struct Residuals {
    /// `b − 𝒜x`.
    pub rp: Vec<f64>,
    /// `c − s − 𝒜ᵀy`, stacked.
    pub rd: Vec<f64>,
    pub feas_p: f64,
    pub feas_d: f64,
}

pub fn residuals(prog: &ConicProgram, st: &IpmState) -> Residuals {
    let xv = st.x.to_vec();
    let sv = st.s.to_vec();
    let ax = prog.op.forward(&xv);
    let aty = prog.op.adjoint(&st.y);
    let rp: Vec<f64> = prog.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let rd: Vec<f64> = (0..xv.len()).map(|i| prog.cost[i] - sv[i] - aty[i]).collect();
    Residuals {
        feas_p: norm2(&rp) / (1.0 + norm2(&prog.b)),
        feas_d: norm2(&rd) / (1.0 + norm2(&prog.cost)),
        rp,
        rd,
    }
}

fn inverse_pd(m: &SymMatrix) -> Result<SymMatrix> {
    let c = Cholesky::new(m.as_matrix().clone())
        .ok_or_else(|| Error::NotInteriorPoint("matrix is not positive definite".into()))?;
    SymMatrix::from_matrix(c.inverse())
}

/// NT-scaled second-order term `G⁻¹ L_V⁻¹(sym(DX·DS)) G⁻¹` with `G = W^{1/2}`, `V = GSG`,
/// `DX = G⁻¹ΔX G⁻¹`, `DS = GΔS G`, and `L_V(M) = ½(VM + MV)`.
pub fn second_order_term(nt: &NtScaling, s: &SymMatrix, dx: &SymMatrix, ds: &SymMatrix) -> Result<SymMatrix> {
    let g = nt.w_pow(0.5);
    let gi = nt.w_pow(-0.5);
    let v = s.congruence(g.as_matrix());
    let ev = eig_sym(&v)?;
    let dxs = dx.congruence(gi.as_matrix());
    let dss = ds.congruence(g.as_matrix());
    let prod = dxs.as_matrix() * dss.as_matrix();
    let h = (&prod + prod.transpose()) * 0.5;
    let u = &ev.vectors;
    let mut hu = u.transpose() * h * u;
    let n = ev.order();
    for j in 0..n {
        for i in 0..n {
            hu[(i, j)] *= 2.0 / (ev.values[i] + ev.values[j]);
        }
    }
    let lvi = u * hu * u.transpose();
    Ok(SymMatrix::symmetrize(lvi).congruence(gi.as_matrix()))
}

/// Right-hand side of the NT Newton system for target `σμ`; `predicted` adds the
/// Mehrotra second-order correction from an affine direction `(ΔX_a, ΔS_a)`.
///
/// `b̃ = b − 𝒜x`, `c̃ = c − 𝒜ᵀy − σμX⁻¹ + G⁻¹L_V⁻¹(sym(DX_a DS_a))G⁻¹`, and on the
/// orthant `c̃ᵢ = (c − 𝒜ᵀy)ᵢ − σμ/xᵢ + Δxᵢ Δsᵢ / xᵢ`.
pub fn newton_rhs(
    prog: &ConicProgram,
    st: &IpmState,
    res: &Residuals,
    nt: &NtScaling,
    sigma_mu: f64,
    predicted: Option<(&ConePoint, &ConePoint)>,
) -> Result<NewtonRhs> {
    let layout = prog.layout();
    let l = layout.lp_dim;
    let sv = st.s.to_vec();
    let mut c_tilde: Vec<f64> = res.rd.iter().zip(&sv).map(|(r, s)| r + s).collect();
    for i in 0..l {
        c_tilde[i] -= sigma_mu / st.x.lp[i];
    }
    if sigma_mu != 0.0 {
        let xinv = inverse_pd(&st.x.psd)?.to_svec().into_vec();
        for (c, xi) in c_tilde[l..].iter_mut().zip(&xinv) {
            *c -= sigma_mu * xi;
        }
    }
    if let Some((dxa, dsa)) = predicted {
        for i in 0..l {
            c_tilde[i] += dxa.lp[i] * dsa.lp[i] / st.x.lp[i];
        }
        let corr = second_order_term(nt, &st.s.psd, &dxa.psd, &dsa.psd)?.to_svec().into_vec();
        for (c, v) in c_tilde[l..].iter_mut().zip(&corr) {
            *c += v;
        }
    }
    Ok(NewtonRhs { b_tilde: res.rp.clone(), c_tilde })
}

/// Largest `α ≤ 1` with `point + α·dir` inside the cone, shrunk by `step_fraction`.
pub fn max_step(point: &ConePoint, dir: &ConePoint, step_fraction: f64) -> Result<f64> {
    if point.layout() != dir.layout() {
        return dim_err("step direction layout differs from the point");
    }
    let mut boundary = f64::INFINITY;
    for (x, d) in point.lp.iter().zip(&dir.lp) {
        if *d < 0.0 {
            boundary = boundary.min(-x / d);
        }
    }
    let ex = eig_sym(&point.psd)?;
    let xih = ex.spectral_map(|v| 1.0 / v.sqrt());
    let m = dir.psd.congruence(xih.as_matrix());
    let lmin = eig_sym(&m)?.min_value();
    if lmin < 0.0 {
        boundary = boundary.min(-1.0 / lmin);
    }
    Ok((step_fraction * boundary).min(1.0))
}

const MAX_BACKTRACKS: usize = 30;

/// Halves both step lengths until the new pair is interior and admits an NT scaling.
/// Near convergence the eigenvalue step bound can land a rounding error outside the cone.
fn backtrack(st: &IpmState, dx: &ConePoint, ds: &ConePoint, ap: f64, ad: f64) -> Option<(ConePoint, ConePoint, f64, f64)> {
    let (mut ap, mut ad) = (ap, ad);
    for _ in 0..=MAX_BACKTRACKS {
        let x = st.x.add_scaled(ap, dx);
        let s = st.s.add_scaled(ad, ds);
        if x.is_interior() && s.is_interior() && nt_scaling(&x, &s).is_ok() {
            return Some((x, s, ap, ad));
        }
        ap *= 0.5;
        ad *= 0.5;
    }
    None
}

struct StepSolve {
    dir: NewtonDirection,
    pcg_failed: bool,
    failed: bool,
    iterations: usize,
}

fn solve_step(
    sys: &AugmentedSystem,
    prec: Option<&SchurPreconditioner>,
    rhs: &NewtonRhs,
    opts: &IpmOptions,
) -> Result<StepSolve> {
    let ok = |d: &NewtonDirection| d.converged || d.relative_residual <= opts.accept_rel_residual;
    let mut iterations = 0;
    let mut pcg_failed = false;
    if opts.krylov.method == KrylovMethod::Pcg {
        if let Some(p) = prec {
            match solve_newton_with(sys, Some(p), rhs, opts.krylov) {
                Ok(d) if ok(&d) => {
                    let iterations = d.iterations;
                    return Ok(StepSolve { dir: d, pcg_failed, failed: false, iterations });
                }
                Ok(d) => iterations += d.iterations,
                Err(_) => {}
            }
        }
        pcg_failed = true;
    }
    let settings = KrylovSettings { method: KrylovMethod::Minres, ..opts.krylov };
    let d = solve_newton_with(sys, None, rhs, settings)?;
    iterations += d.iterations;
    let failed = !ok(&d);
    Ok(StepSolve { dir: d, pcg_failed, failed, iterations })
}

/// Chooses the rank for this iterate and builds the decomposition, lowering the rank on
/// degenerate spectra.
pub fn decompose(nt: &NtScaling, r_hat: usize, fixed_rank: Option<usize>) -> Result<ScalingDecomposition> {
    let n = nt.eig.order();
    let mut r = match fixed_rank {
        Some(r) => r.min(n - 1),
        None if n == 1 => 0,
        None => select_rank(&nt.eig.values, r_hat.min(n - 1))?,
    };
    loop {
        match ScalingDecomposition::build(nt, r) {
            Err(Error::DegenerateSpectrum { .. }) if r > 0 => r -= 1,
            other => return other,
        }
    }
}

fn dual_step_slack(prog: &ConicProgram, res: &Residuals, dy: &[f64]) -> Result<ConePoint> {
    let aty = prog.op.adjoint(dy);
    let ds: Vec<f64> = res.rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
    ConePoint::from_vec(prog.layout(), &ds)
}

/// Outer iterations without a 1% decrease in `μ` before declaring a stall.
const STALL_WINDOW: usize = 8;

pub fn solve(prog: &ConicProgram, opts: &IpmOptions) -> Result<SolveResult> {
    opts.validate()?;
    let mut st = initial_point(prog);
    let nu = prog.layout().degree() as f64;
    let mut log = IterationLog::default();
    let mut trajectory = Vec::new();
    let mut cum = 0usize;
    let mut consecutive_failures = 0;
    let mut mu_history: Vec<f64> = Vec::new();
    let status;

    let mut iter = 0;
    loop {
        let res = residuals(prog, &st);
        let mu = duality_mu(&st.x, &st.s)?;
        let cent = centrality(&st.x, &st.s, mu).unwrap_or(f64::NAN);
        let mut rec = IterationRecord {
            iter,
            mu,
            centrality: cent,
            feas_p: res.feas_p,
            feas_d: res.feas_d,
            r: 0,
            tau: 0.0,
            d: 0,
            inner_iters: 0,
            cum_inner_iters: cum,
            setup_s: 0.0,
            krylov_s: 0.0,
            sigma: 0.0,
            alpha_p: 0.0,
            alpha_d: 0.0,
            pcg_failures: 0,
            krylov_rel_residual: 0.0,
        };
        if opts.keep_trajectory {
            trajectory.push(st.clone());
        }
        if mu <= opts.tol_mu && res.feas_p <= opts.tol_feas && res.feas_d <= opts.tol_feas {
            log.records.push(rec);
            status = SolveStatus::Solved;
            break;
        }
        if iter >= opts.max_outer {
            log.records.push(rec);
            status = SolveStatus::MaxIterations;
            break;
        }
        mu_history.push(mu);
        if mu_history.len() > STALL_WINDOW {
            let old = mu_history[mu_history.len() - 1 - STALL_WINDOW];
            let recent = mu_history[mu_history.len() - STALL_WINDOW..].iter().fold(f64::INFINITY, |a, b| a.min(*b));
            if recent > 0.99 * old {
                log.records.push(rec);
                status = SolveStatus::NumericalFailure(format!("no progress in mu over {STALL_WINDOW} iterations"));
                break;
            }
        }

        let t0 = Instant::now();
        let step = (|| -> Result<_> {
            let nt = nt_scaling(&st.x, &st.s)?;
            let dec = decompose(&nt, opts.r_hat, opts.fixed_rank)?;
            Ok((nt, dec))
        })();
        let (nt, dec) = match step {
            Ok(v) => v,
            Err(e) => {
                log.records.push(rec);
                status = SolveStatus::NumericalFailure(e.to_string());
                break;
            }
        };
        let sys = AugmentedSystem::new(prog.op.as_ref(), &dec)?;
        let prec = match opts.krylov.method {
            KrylovMethod::Pcg => SchurPreconditioner::build(&sys, opts.beta).ok(),
            KrylovMethod::Minres => None,
        };
        rec.setup_s = t0.elapsed().as_secs_f64();
        rec.r = dec.r;
        rec.tau = dec.tau;
        rec.d = dec.d();

        let t1 = Instant::now();
        let outcome = (|| -> Result<_> {
            let rhs_a = newton_rhs(prog, &st, &res, &nt, 0.0, None)?;
            let pred = solve_step(&sys, prec.as_ref(), &rhs_a, opts)?;
            let ds_a = dual_step_slack(prog, &res, &pred.dir.dy)?;
            let ap = max_step(&st.x, &pred.dir.dx, 1.0)?;
            let ad = max_step(&st.s, &ds_a, 1.0)?;
            let mu_aff = st.x.add_scaled(ap, &pred.dir.dx).inner(&st.s.add_scaled(ad, &ds_a)) / nu;
            let sigma = (mu_aff / mu).powi(3).clamp(1e-8, 1.0);
            let rhs_c = newton_rhs(prog, &st, &res, &nt, sigma * mu, Some((&pred.dir.dx, &ds_a)))?;
            let corr = solve_step(&sys, prec.as_ref(), &rhs_c, opts)?;
            let ds = dual_step_slack(prog, &res, &corr.dir.dy)?;
            Ok((pred, corr, ds, sigma))
        })();
        rec.krylov_s = t1.elapsed().as_secs_f64();
        let (pred, corr, ds, sigma) = match outcome {
            Ok(v) => v,
            Err(e) => {
                log.records.push(rec);
                status = SolveStatus::NumericalFailure(e.to_string());
                break;
            }
        };
        rec.inner_iters = pred.iterations + corr.iterations;
        cum += rec.inner_iters;
        rec.cum_inner_iters = cum;
        rec.sigma = sigma;
        rec.pcg_failures = pred.pcg_failed as usize + corr.pcg_failed as usize;
        rec.krylov_rel_residual = pred.dir.relative_residual.max(corr.dir.relative_residual);

        if pred.failed || corr.failed {
            consecutive_failures += 1;
        } else {
            consecutive_failures = 0;
        }
        if consecutive_failures >= 2 {
            log.records.push(rec);
            status = SolveStatus::NumericalFailure("inner solver failed in two consecutive iterations".into());
            break;
        }

        let (ap, ad) = match (max_step(&st.x, &corr.dir.dx, opts.step_fraction), max_step(&st.s, &ds, opts.step_fraction)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                log.records.push(rec);
                status = SolveStatus::NumericalFailure(e.to_string());
                break;
            }
        };
        let Some((x, s, ap, ad)) = backtrack(&st, &corr.dir.dx, &ds, ap, ad) else {
            log.records.push(rec);
            status = SolveStatus::NumericalFailure("no step keeps the iterate strictly interior".into());
            break;
        };
        rec.alpha_p = ap;
        rec.alpha_d = ad;
        log.records.push(rec);

        st.x = x;
        st.s = s;
        for (y, d) in st.y.iter_mut().zip(&corr.dir.dy) {
            *y += ad * d;
        }
        iter += 1;
    }

    let mu = duality_mu(&st.x, &st.s)?;
    Ok(SolveResult {
        primal_objective: dot(&prog.cost, &st.x.to_vec()),
        dual_objective: dot(&prog.b, &st.y),
        x: st.x,
        y: st.y,
        s: st.s,
        mu,
        status,
        log,
        trajectory,
    })
}

/// Empirical versions of the centrality, proximity and injectivity constants at one iterate.
#[derive(Debug, Clone, Copy)]
pub struct AssumptionReport {
    /// `⟨X, S⟩/n` over the PSD block.
    pub mu: f64,
    /// PSD centrality at `mu`.
    pub delta_hat: f64,
    /// `μ` at which the PSD centrality equals 0.1, or the centrality-minimizing `μ`
    /// when that level is unreachable.
    pub mu_protocol: f64,
    pub delta_protocol: f64,
    /// `‖X − X★‖₂ / mu_protocol`.
    pub l_x: Option<f64>,
    /// `‖S − S★‖₂`.
    pub l_s: Option<f64>,
    /// `1/σ_min((𝐀𝐀ᵀ)^{-1/2}𝐀𝐐)` over the PSD block.
    pub chi2_hat: f64,
    pub r: usize,
}

/// Target centrality used to pick `μ` for the reported iterate diagnostics.
pub const PROTOCOL_CENTRALITY: f64 = 0.1;

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().fold(0.0f64, |a, b| a.max(*b))
}

pub fn diagnostics(
    op: &dyn ConstraintOperator,
    x: &ConePoint,
    s: &ConePoint,
    truth: Option<(&SymMatrix, &SymMatrix)>,
    r_hat: usize,
) -> Result<AssumptionReport> {
    let n = x.psd.order();
    let mu = x.psd.inner(&s.psd) / n as f64;
    let delta_hat = psd_centrality(&x.psd, &s.psd, mu)?;
    let mu_protocol = match mu_for_centrality(&x.psd, &s.psd, PROTOCOL_CENTRALITY)? {
        Some(v) => v,
        None => {
            let xh = eig_sym(&x.psd)?.spectral_map(f64::sqrt);
            let ev = eig_sym(&s.psd.congruence(xh.as_matrix()))?;
            0.5 * (ev.max_value() + ev.min_value())
        }
    };
    let delta_protocol = psd_centrality(&x.psd, &s.psd, mu_protocol)?;
    let (l_x, l_s) = match truth {
        Some((xs, ss)) => (
            Some(spectral_norm(&(x.psd.as_matrix() - xs.as_matrix())) / mu_protocol),
            Some(spectral_norm(&(s.psd.as_matrix() - ss.as_matrix()))),
        ),
        None => (None, None),
    };

    let psd_only = ConePoint::new(vec![], x.psd.clone());
    let psd_slack = ConePoint::new(vec![], s.psd.clone());
    let nt = nt_scaling(&psd_only, &psd_slack)?;
    let dec = decompose(&nt, r_hat, None)?;
    let chi2_hat = injectivity_constant(op, &dec)?;
    Ok(AssumptionReport { mu, delta_hat, mu_protocol, delta_protocol, l_x, l_s, chi2_hat, r: dec.r })
}

/// `1/σ_min((𝐀𝐀ᵀ)^{-1/2}𝐀𝐐)` for the PSD columns of `op`, computed densely.
pub fn injectivity_constant(op: &dyn ConstraintOperator, dec: &ScalingDecomposition) -> Result<f64> {
    let layout = op.layout();
    let m = op.num_constraints();
    let l = layout.lp_dim;
    let mut a = DMatrix::<f64>::zeros(m, layout.psd_len());
    for (row, col, v) in op.triplets() {
        if col >= l {
            a[(row, col - l)] += v;
        }
    }
    let gram = &a * a.transpose();
    let chol = Cholesky::new(gram).ok_or_else(|| Error::NumericalFailure("constraint rows are dependent".into()))?;
    let lp0 = vec![0.0; l];
    let dp = dec.d_psd();
    if dp == 0 {
        return Ok(f64::INFINITY);
    }
    let mut aq = DMatrix::zeros(m, dp);
    for k in 0..dp {
        let (u, v) = dec.basis_factors(k);
        let col = op.forward_lowrank(&lp0, &u, &v);
        aq.column_mut(k).copy_from_slice(&col);
    }
    let ginv_aq = chol.solve(&aq);
    let mtm = aq.transpose() * ginv_aq;
    let lmin = eig_sym(&SymMatrix::from_matrix(mtm)?)?.min_value();
    if !(lmin > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / lmin.sqrt())
}
