//! `lrsdp`: generate instances, solve them, and run the benchmark studies.
//!
//! Exit codes: 0 on success, 1 on numerical failure, 2 on usage errors.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lrsdp::format::{load_problem, save_problem};
use lrsdp::ipm::{solve, IpmOptions, SolveStatus};
use lrsdp::newton::{KrylovMethod, KrylovSettings, DEFAULT_BETA};
use lrsdp::problems::gen_rmc;
use lrsdp::studies::{condition_study, krylov_compare, loglog_slope, scaling_study, ConditionConfig, MMode, ScalingConfig};
use lrsdp::symlin::svec_len;

use config::{Config, List};
use output::{fmt_f, Csv};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl From<lrsdp::Error> for CliError {
    fn from(e: lrsdp::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "lrsdp", version, about = "Low-rank SDP interior-point solver and benchmark studies")]
struct Cli {
    /// key=value file supplying defaults for the subcommand's flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a robust matrix completion instance.
    Generate(GenerateArgs),
    /// Solve a problem file.
    Solve(SolveArgs),
    /// Condition numbers of the augmented and KKT systems along centered iterates.
    ConditionStudy(ConditionArgs),
    /// Setup and per-inner-iteration timings over a grid of orders.
    ScalingStudy(ScalingArgs),
    /// PCG against MINRES on the final Newton system for several rank parameters.
    KrylovCompare(KrylovArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: Option<usize>,
    /// Rank of the ground truth.
    #[arg(long)]
    rank: Option<usize>,
    /// Number of sampled svec coordinates.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    outliers: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    method: Option<KrylovMethod>,
    /// Largest rank the decomposition may pick.
    #[arg(long)]
    rhat: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Target duality measure.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Per-iteration log.
    #[arg(long)]
    log_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConditionArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// Comma-separated barrier parameters.
    #[arg(long)]
    mu_grid: Option<List<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[arg(long)]
    n_grid: Option<List<usize>>,
    /// `linear` (m = 20n) or `quadratic` (m = n(n+1)/2).
    #[arg(long)]
    m_mode: Option<MMode>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KrylovArgs {
    #[arg(long)]
    problem: Option<PathBuf>,
    #[arg(long)]
    ranks: Option<List<usize>>,
    /// Residual target relative to the right-hand side.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Generate(a) => cmd_generate(a, &cfg),
        Command::Solve(a) => cmd_solve(a, &cfg),
        Command::ConditionStudy(a) => cmd_condition_study(a, &cfg),
        Command::ScalingStudy(a) => cmd_scaling_study(a, &cfg),
        Command::KrylovCompare(a) => cmd_krylov_compare(a, &cfg),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn cmd_generate(a: GenerateArgs, cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys(&["n", "rank", "m", "outliers", "lambda", "seed", "out"])?;
    let n: usize = cfg.require(a.n, "n")?;
    let rank = cfg.pick(a.rank, "rank", 2)?;
    let m: usize = cfg.require(a.m, "m")?;
    let outliers = cfg.pick(a.outliers, "outliers", 0)?;
    let lambda = cfg.pick(a.lambda, "lambda", 1.0)?;
    let seed = cfg.pick(a.seed, "seed", 1)?;
    let out: PathBuf = cfg.require(a.out, "out")?;
    if n == 0 || rank == 0 || rank > n {
        return Err(usage(format!("need 1 <= rank <= n, got n = {n}, rank = {rank}")));
    }
    if m == 0 || m > svec_len(n) {
        return Err(usage(format!("--m {m} must lie in 1..={} for n = {n}", svec_len(n))));
    }
    if outliers > m {
        return Err(usage(format!("--outliers {outliers} exceeds --m {m}")));
    }
    if !(lambda > 0.0) {
        return Err(usage("--lambda must be positive"));
    }
    let (prog, inst) = gen_rmc(n, rank, m, outliers, lambda, seed)?;
    save_problem(&out, &prog, Some(&inst.g))?;
    println!(
        "wrote {}: n = {n}, rank = {rank}, m = {m}, outliers = {outliers}, lambda = {lambda}, seed = {seed}",
        out.display()
    );
    println!("variables: {} LP + svec order {}, constraints: {}", prog.layout().lp_dim, n, prog.m());
    Ok(())
}

fn solver_options(
    cfg: &Config,
    method: Option<KrylovMethod>,
    rhat: Option<usize>,
    beta: Option<f64>,
) -> Result<IpmOptions, CliError> {
    let base = IpmOptions::default();
    let method = cfg.pick(method, "method", KrylovMethod::Pcg)?;
    let r_hat = cfg.pick(rhat, "rhat", base.r_hat)?;
    let beta = cfg.pick(beta, "beta", DEFAULT_BETA)?;
    if r_hat == 0 {
        return Err(usage("--rhat must be at least 1"));
    }
    if !(beta > 0.0) {
        return Err(usage("--beta must be positive"));
    }
    Ok(IpmOptions { r_hat, beta, krylov: KrylovSettings { method, ..base.krylov }, ..base })
}

fn cmd_solve(a: SolveArgs, cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys(&["problem", "method", "rhat", "beta", "tol", "max-outer", "log-csv"])?;
    let path: PathBuf = cfg.require(a.problem, "problem")?;
    let mut opts = solver_options(cfg, a.method, a.rhat, a.beta)?;
    let tol = cfg.pick(a.tol, "tol", opts.tol_mu)?;
    if !(tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    opts.tol_mu = tol;
    opts.tol_feas = opts.tol_feas.max(tol);
    opts.max_outer = cfg.pick(a.max_outer, "max-outer", opts.max_outer)?;
    let log_csv: Option<PathBuf> = match a.log_csv {
        Some(p) => Some(p),
        None => cfg.get("log-csv")?,
    };

    let pf = load_problem(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let res = solve(&pf.program, &opts)?;

    if let Some(p) = &log_csv {
        write_solve_log(p, &res.log)?;
    }
    let status = match &res.status {
        SolveStatus::Solved => "solved".to_string(),
        SolveStatus::MaxIterations => "max-iterations".to_string(),
        SolveStatus::NumericalFailure(msg) => format!("numerical-failure ({msg})"),
    };
    println!("status: {status}");
    println!("outer iterations: {}", res.log.records.len().saturating_sub(1));
    println!("cumulative inner iterations: {}", res.log.cumulative_inner());
    println!("objective: {} (dual {})", fmt_f(res.primal_objective), fmt_f(res.dual_objective));
    println!("mu: {}", fmt_f(res.mu));
    if let Some(g) = &pf.truth {
        if g.nrows() == res.x.psd.order() {
            let err = (res.x.psd.as_matrix() - g * g.transpose()).norm();
            println!("reconstruction error: {}", fmt_f(err));
        }
    }
    match res.status {
        SolveStatus::Solved => Ok(()),
        _ => Err(CliError::Failure(format!("solver stopped with status {status}"))),
    }
}

fn write_solve_log(path: &Path, log: &lrsdp::ipm::IterationLog) -> Result<(), CliError> {
    let mut csv = Csv::new(
        "solve",
        &[
            "iter", "mu", "centrality", "r", "tau", "inner_iters", "cum_inner_iters", "setup_s", "krylov_s", "feas_p",
            "feas_d",
        ],
    );
    for r in &log.records {
        csv.row(&[
            r.iter.to_string(),
            fmt_f(r.mu),
            fmt_f(r.centrality),
            r.r.to_string(),
            fmt_f(r.tau),
            r.inner_iters.to_string(),
            r.cum_inner_iters.to_string(),
            fmt_f(r.setup_s),
            fmt_f(r.krylov_s),
            fmt_f(r.feas_p),
            fmt_f(r.feas_d),
        ]);
    }
    csv.save(path)
}

fn default_mu_grid() -> Vec<f64> {
    (2..=10).map(|k| 10f64.powi(-k)).collect()
}

fn cmd_condition_study(a: ConditionArgs, cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys(&["n", "m", "rank", "mu-grid", "seed", "out"])?;
    let n = cfg.pick(a.n, "n", 30)?;
    if n == 0 || n > 60 {
        return Err(usage(format!("--n {n} must lie in 1..=60 (dense condition numbers)")));
    }
    let seed = cfg.pick(a.seed, "seed", 1)?;
    let mut cc = ConditionConfig::new(n, seed);
    cc.m = cfg.pick(a.m, "m", cc.m)?;
    cc.r_star = cfg.pick(a.rank, "rank", cc.r_star)?;
    if cc.m == 0 || cc.m > svec_len(n) {
        return Err(usage(format!("--m {} must lie in 1..={}", cc.m, svec_len(n))));
    }
    if cc.r_star == 0 || cc.r_star >= n.max(2) {
        return Err(usage(format!("--rank {} must lie in 1..n", cc.r_star)));
    }
    let mus = cfg.pick(a.mu_grid, "mu-grid", List(default_mu_grid()))?.0;
    if mus.iter().any(|m| !(*m > 0.0)) {
        return Err(usage("--mu-grid entries must be positive"));
    }
    let out: PathBuf = cfg.require(a.out, "out")?;

    let rows = condition_study(&cc, &mus)?;
    let mut csv = Csv::new("condition-study", &["mu", "cond_augmented", "cond_kkt", "delta", "l_x", "l_s", "chi2", "r", "tau"]);
    for r in &rows {
        csv.row(&[
            fmt_f(r.mu),
            fmt_f(r.cond_augmented),
            fmt_f(r.cond_kkt),
            fmt_f(r.delta),
            fmt_f(r.l_x),
            fmt_f(r.l_s),
            fmt_f(r.chi2),
            r.r.to_string(),
            fmt_f(r.tau),
        ]);
        println!("mu {:>9}  cond_augmented {:>10}  cond_kkt {:>10}", fmt_f(r.mu), fmt_f(r.cond_augmented), fmt_f(r.cond_kkt));
    }
    csv.save(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_scaling_study(a: ScalingArgs, cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys(&["n-grid", "m-mode", "reps", "iters", "seed", "out"])?;
    let grid = cfg.pick(a.n_grid, "n-grid", List(vec![50, 100, 200, 400]))?.0;
    if grid.iter().any(|&n| n < 3) {
        return Err(usage("--n-grid entries must be at least 3"));
    }
    let mode = cfg.pick(a.m_mode, "m-mode", MMode::Linear)?;
    let seed = cfg.pick(a.seed, "seed", 1)?;
    let mut sc = ScalingConfig::new(mode, seed);
    sc.reps = cfg.pick(a.reps, "reps", sc.reps)?;
    sc.iters = cfg.pick(a.iters, "iters", sc.iters)?;
    if sc.reps == 0 || sc.iters == 0 {
        return Err(usage("--reps and --iters must be positive"));
    }
    let out: PathBuf = cfg.require(a.out, "out")?;

    let rows = scaling_study(&grid, &sc)?;
    let mut csv = Csv::new("scaling-study", &["n", "m", "r", "d", "setup_s", "per_iter_s"]);
    for r in &rows {
        csv.row(&[r.n.to_string(), r.m.to_string(), r.r.to_string(), r.d.to_string(), fmt_f(r.setup_s), fmt_f(r.per_iter_s)]);
        println!("n {:>4}  m {:>6}  d {:>5}  setup {:>10} s  per-iteration {:>10} s", r.n, r.m, r.d, fmt_f(r.setup_s), fmt_f(r.per_iter_s));
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let setup: Vec<f64> = rows.iter().map(|r| r.setup_s).collect();
    let iter: Vec<f64> = rows.iter().map(|r| r.per_iter_s).collect();
    for (name, ys) in [("setup_s", &setup), ("per_iter_s", &iter)] {
        let line = match loglog_slope(&ns, ys) {
            Some(s) => format!("slope {name} {}", fmt_f(s)),
            None => format!("slope {name} n/a"),
        };
        println!("{line} ({mode})");
        csv.comment(&line);
    }
    csv.save(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_krylov_compare(a: KrylovArgs, cfg: &Config) -> Result<(), CliError> {
    cfg.check_keys(&["problem", "ranks", "tol", "max-iter", "beta", "out"])?;
    let path: PathBuf = cfg.require(a.problem, "problem")?;
    let ranks = cfg.pick(a.ranks, "ranks", List(vec![2, 5, 10]))?.0;
    let tol = cfg.pick(a.tol, "tol", 1e-10)?;
    let max_iter = cfg.pick(a.max_iter, "max-iter", 5000)?;
    let opts = solver_options(cfg, None, None, a.beta)?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(usage("--tol and --max-iter must be positive"));
    }
    let out: PathBuf = cfg.require(a.out, "out")?;
    let pf = load_problem(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let n = pf.program.layout().psd_order;
    if let Some(&r) = ranks.iter().find(|&&r| r == 0 || r >= n) {
        return Err(usage(format!("rank {r} must lie in 1..{n}")));
    }

    let runs = krylov_compare(&pf.program, &opts, &ranks, tol, max_iter)?;
    let mut csv = Csv::new("krylov-compare", &["rank", "method", "iteration", "rel_residual", "converged"]);
    for run in &runs {
        for (k, h) in run.history.iter().enumerate() {
            csv.row(&[run.rank.to_string(), run.method.to_string(), k.to_string(), fmt_f(*h), run.converged.to_string()]);
        }
        println!(
            "rank {:>3}  {:<6}  iterations {:>5}  {}",
            run.rank,
            run.method,
            run.iterations,
            if run.converged { "converged" } else { "unconverged" }
        );
    }
    csv.save(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
