//! Benchmark studies: conditioning sweeps, setup and per-iteration timing, and a PCG/MINRES
//! comparison on one Newton system.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cones::{nt_scaling, psd_centrality, ConePoint};
use crate::decomp::ScalingDecomposition;
use crate::error::{dim_err, Error, Result};
use crate::ipm::{decompose, injectivity_constant, newton_rhs, residuals, solve, ConicProgram, IpmOptions, IpmState};
use crate::krylov::{minres, pcg, IdentityPreconditioner, KrylovResult, LinearOperator, Preconditioner};
use crate::newton::{apply_w_kron_inv, pcg_start, AugmentedSystem, SchurPreconditioner};
use crate::operator::ConstraintOperator;
use crate::problems::{complementary_pair, gen_centered_iterates, gen_rmc, sampling_operator};
use crate::symlin::{norm2, svec_len, SymMatrix};

/// `max|λ| / min|λ|` of a symmetric matrix.
pub fn symmetric_condition(a: DMatrix<f64>) -> f64 {
    let ev = SymmetricEigen::new(a).eigenvalues;
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Dense matrix of a linear operator, one unit vector at a time.
pub fn dense_of(a: &dyn LinearOperator) -> DMatrix<f64> {
    let n = a.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        out.column_mut(k).copy_from_slice(&a.apply(&e));
        e[k] = 0.0;
    }
    out
}

/// Dense `[−(W⊗ₛW)⁻¹, 𝒜ᵀ; 𝒜, 0]`.
pub fn dense_kkt(op: &dyn ConstraintOperator, dec: &ScalingDecomposition) -> Result<DMatrix<f64>> {
    let nx = op.layout().dim();
    let m = op.num_constraints();
    let mut k = DMatrix::zeros(nx + m, nx + m);
    let mut e = vec![0.0; nx];
    for j in 0..nx {
        e[j] = 1.0;
        for (i, v) in apply_w_kron_inv(dec, &e)?.iter().enumerate() {
            k[(i, j)] = -v;
        }
        e[j] = 0.0;
    }
    for (row, col, v) in op.triplets() {
        k[(nx + row, col)] += v;
        k[(col, nx + row)] += v;
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy)]
pub struct ConditionConfig {
    pub n: usize,
    pub r_star: usize,
    /// Number of sampled svec coordinates.
    pub m: usize,
    /// Centrality of the generated iterates.
    pub delta: f64,
    pub r_hat: usize,
    pub seed: u64,
}

impl ConditionConfig {
    /// Rank 2 with `m = min(10n, n(n+1)/2)` samples.
    pub fn new(n: usize, seed: u64) -> Self {
        ConditionConfig { n, r_star: 2.min(n), m: (10 * n).min(svec_len(n)), delta: 0.1, r_hat: 5, seed }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConditionRow {
    pub mu: f64,
    pub cond_augmented: f64,
    pub cond_kkt: f64,
    pub delta: f64,
    /// `‖X − X★‖₂ / μ`.
    pub l_x: f64,
    /// `‖S − S★‖₂`.
    pub l_s: f64,
    pub chi2: f64,
    pub r: usize,
    pub tau: f64,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().fold(0.0f64, |a, b| a.max(*b))
}

/// Dense condition numbers of the augmented and KKT matrices along centered iterates of a
/// sampled rank-`r★` instance.
pub fn condition_study(cfg: &ConditionConfig, mu_list: &[f64]) -> Result<Vec<ConditionRow>> {
    if cfg.n == 0 || cfg.n > 60 {
        return dim_err(format!("condition study needs 1 <= n <= 60, got {}", cfg.n));
    }
    let op = sampling_operator(cfg.n, cfg.m, cfg.seed)?;
    let (xs, ss) = complementary_pair(cfg.n, cfg.r_star, cfg.seed.wrapping_add(1))?;
    let iterates = gen_centered_iterates(&xs, &ss, mu_list, cfg.delta, cfg.seed.wrapping_add(2))?;
    let mut rows = Vec::with_capacity(iterates.len());
    for it in iterates {
        let x = ConePoint::new(vec![], it.x.clone());
        let s = ConePoint::new(vec![], it.s.clone());
        let nt = nt_scaling(&x, &s)?;
        let dec = decompose(&nt, cfg.r_hat, None)?;
        let sys = AugmentedSystem::new(&op, &dec)?;
        rows.push(ConditionRow {
            mu: it.mu,
            cond_augmented: symmetric_condition(dense_of(&sys)),
            cond_kkt: symmetric_condition(dense_kkt(&op, &dec)?),
            delta: psd_centrality(&it.x, &it.s, it.mu)?,
            l_x: spectral_norm(&(it.x.as_matrix() - xs.as_matrix())) / it.mu,
            l_s: spectral_norm(&(it.s.as_matrix() - ss.as_matrix())),
            chi2: injectivity_constant(&op, &dec)?,
            r: dec.r,
            tau: dec.tau,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MMode {
    /// `m = 20n`.
    Linear,
    /// `m = n(n+1)/2`.
    Quadratic,
}

impl MMode {
    pub fn constraints(self, n: usize) -> usize {
        match self {
            MMode::Linear => (20 * n).min(svec_len(n)),
            MMode::Quadratic => svec_len(n),
        }
    }
}

impl std::str::FromStr for MMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(MMode::Linear),
            "quadratic" => Ok(MMode::Quadratic),
            other => Err(format!("unknown m-mode '{other}' (expected linear or quadratic)")),
        }
    }
}

impl std::fmt::Display for MMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MMode::Linear => "linear",
            MMode::Quadratic => "quadratic",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScalingConfig {
    pub mode: MMode,
    pub r_star: usize,
    /// Barrier parameter of the synthetic iterate.
    pub mu: f64,
    pub reps: usize,
    /// Inner iterations timed per repetition.
    pub iters: usize,
    pub beta: f64,
    pub seed: u64,
}

impl ScalingConfig {
    pub fn new(mode: MMode, seed: u64) -> Self {
        ScalingConfig { mode, r_star: 2, mu: 1e-6, reps: 3, iters: 10, beta: crate::newton::DEFAULT_BETA, seed }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScalingRow {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub d: usize,
    /// Median over repetitions of NT scaling, decomposition and preconditioner setup.
    pub setup_s: f64,
    /// Median over repetitions of one augmented apply plus one preconditioner solve.
    pub per_iter_s: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Near-optimal interior iterate for an outlier-free completion instance: the PSD block is a
/// centered pair around `X★` and the projector onto its null space, and every orthant
/// coordinate has `x = μ/4`, `s = 1`.
fn synthetic_iterate(x_star: &SymMatrix, lp_dim: usize, mu: f64, seed: u64) -> Result<(ConePoint, ConePoint)> {
    let ev = crate::symlin::eig_sym(x_star)?;
    let top = ev.max_value();
    let s_star = ev.spectral_map(|v| if v > 1e-8 * top { 0.0 } else { 1.0 });
    let x_star = ev.spectral_map(|v| if v > 1e-8 * top { v } else { 0.0 });
    let it = gen_centered_iterates(&x_star, &s_star, &[mu], 0.1, seed)?.remove(0);
    Ok((ConePoint::new(vec![0.25 * mu; lp_dim], it.x), ConePoint::new(vec![1.0; lp_dim], it.s)))
}

/// Times setup and inner iterations on generated completion instances for each `n`.
pub fn scaling_study(n_grid: &[usize], cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    if cfg.reps == 0 || cfg.iters == 0 {
        return dim_err("scaling study needs at least one repetition and one iteration");
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let m = cfg.mode.constraints(n);
        let (prog, inst) = gen_rmc(n, cfg.r_star, m, 0, 1.0, cfg.seed ^ n as u64)?;
        let (x, s) = synthetic_iterate(&inst.x_star, prog.layout().lp_dim, cfg.mu, cfg.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut setup = Vec::with_capacity(cfg.reps);
        let mut per_iter = Vec::with_capacity(cfg.reps);
        let (mut r, mut d) = (0, 0);
        for _ in 0..cfg.reps {
            let t0 = Instant::now();
            let nt = nt_scaling(&x, &s)?;
            let dec = decompose(&nt, 5, None)?;
            let sys = AugmentedSystem::new(prog.op.as_ref(), &dec)?;
            let prec = SchurPreconditioner::build(&sys, cfg.beta)?;
            setup.push(t0.elapsed().as_secs_f64());
            r = dec.r;
            d = dec.d();

            let mut v: Vec<f64> = (0..sys.dim()).map(|_| rng.sample(StandardNormal)).collect();
            let t1 = Instant::now();
            for _ in 0..cfg.iters {
                let av = sys.apply(&v);
                let z = prec.solve(&av)?;
                let nz = norm2(&z).max(f64::MIN_POSITIVE);
                v = z.into_iter().map(|x| x / nz).collect();
            }
            per_iter.push(t1.elapsed().as_secs_f64() / cfg.iters as f64);
            std::hint::black_box(&v);
        }
        rows.push(ScalingRow { n, m, r, d, setup_s: median(setup), per_iter_s: median(per_iter) });
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`; `None` with fewer than two distinct points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMethod {
    Pcg,
    Minres,
}

impl std::fmt::Display for CompareMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CompareMethod::Pcg => "pcg",
            CompareMethod::Minres => "minres",
        })
    }
}

#[derive(Debug, Clone)]
pub struct KrylovRun {
    pub rank: usize,
    pub method: CompareMethod,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norms divided by `‖rhs‖`, starting at the shared initial point.
    pub history: Vec<f64>,
}

/// Solves `prog` keeping the trajectory and returns the last iterate from which a Newton
/// step was computed.
pub fn last_step_iterate(prog: &ConicProgram, opts: &IpmOptions) -> Result<IpmState> {
    let opts = IpmOptions { keep_trajectory: true, ..*opts };
    let mut res = solve(prog, &opts)?;
    let k = res.trajectory.len();
    if k == 0 {
        return Err(Error::NumericalFailure("solver produced no iterates".into()));
    }
    Ok(res.trajectory.swap_remove(k.saturating_sub(2)))
}

/// PCG and MINRES on the predictor system at `st` with rank `rank`, both started from the
/// preconditioned point and stopped at `rel_tol·‖rhs‖` or `max_iter`.
pub fn compare_at(
    prog: &ConicProgram,
    st: &IpmState,
    rank: usize,
    beta: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<[KrylovRun; 2]> {
    let res = residuals(prog, st);
    let nt = nt_scaling(&st.x, &st.s)?;
    let rhs = newton_rhs(prog, st, &res, &nt, 0.0, None)?;
    let dec = decompose(&nt, rank.max(1), Some(rank))?;
    let sys = AugmentedSystem::new(prog.op.as_ref(), &dec)?;
    let prec = SchurPreconditioner::build(&sys, beta)?;
    let b = sys.build_rhs(&rhs)?;
    let scale = norm2(&b);
    if !(scale > 0.0) {
        return Err(Error::NumericalFailure("Newton right-hand side is zero".into()));
    }
    let x0 = pcg_start(&sys, &prec, &rhs)?;
    let tol = rel_tol * scale;
    let run = |method, r: KrylovResult| KrylovRun {
        rank: dec.r,
        method,
        iterations: r.iterations,
        converged: r.converged,
        history: r.residual_history.iter().map(|h| h / scale).collect(),
    };
    Ok([
        run(CompareMethod::Pcg, pcg(&sys, &b, &prec, Some(&x0), tol, max_iter)?),
        run(CompareMethod::Minres, minres(&sys, &b, &IdentityPreconditioner, Some(&x0), tol, max_iter)?),
    ])
}

/// For each rank, solves `prog` with that rank fixed and compares PCG with MINRES on the
/// Newton system of the last iteration.
pub fn krylov_compare(
    prog: &ConicProgram,
    opts: &IpmOptions,
    ranks: &[usize],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<KrylovRun>> {
    let mut out = Vec::with_capacity(2 * ranks.len());
    for &rank in ranks {
        let st = last_step_iterate(prog, &IpmOptions { fixed_rank: Some(rank), ..*opts })?;
        out.extend(compare_at(prog, &st, rank, opts.beta, rel_tol, max_iter)?);
    }
    Ok(out)
}
