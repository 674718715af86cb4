//! Instance generators: robust matrix completion and centered iterates near a known solution.
//!
//! Measurements are taken in svec coordinates, so a sampled off-diagonal entry observes
//! `√2·X_ij` rather than `X_ij`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::cones::{psd_centrality, ConeLayout};
use crate::error::{dim_err, Error, Result};
use crate::ipm::ConicProgram;
use crate::operator::SparseOperator;
use crate::symlin::{eig_sym, svec_len, SymMatrix};

/// Standard deviation of outlier noise (variance `1e4`).
pub const OUTLIER_STD: f64 = 100.0;

#[derive(Debug, Clone)]
pub struct RmcInstance {
    pub n: usize,
    pub r_star: usize,
    pub m: usize,
    pub m_outliers: usize,
    pub seed: u64,
    /// `n × r★` factor of the ground truth.
    pub g: DMatrix<f64>,
    pub x_star: SymMatrix,
    /// The svec coordinate observed by each constraint.
    pub sample_index: Vec<usize>,
    /// Constraint rows carrying outlier noise, sorted.
    pub outlier_index: Vec<usize>,
    pub b: Vec<f64>,
    pub lambda: f64,
}

/// Builds `min 𝟙ᵀv + 𝟙ᵀw + λ·tr(X)  s.t.  v − w + P_m svec(X) = b`, `v, w ≥ 0`, `X ⪰ 0`.
///
/// The primal vector is `[v (m) | w (m) | svec X]`.
pub fn gen_rmc(n: usize, r_star: usize, m: usize, m_outliers: usize, lambda: f64, seed: u64) -> Result<(ConicProgram, RmcInstance)> {
    let big_n = svec_len(n);
    if n == 0 || m == 0 || m > big_n {
        return dim_err(format!("need 1 <= m <= n(n+1)/2 = {big_n}, got m = {m}"));
    }
    if m_outliers > m {
        return dim_err(format!("{m_outliers} outliers exceed {m} measurements"));
    }
    if r_star == 0 || r_star > n {
        return dim_err(format!("rank {r_star} outside 1..={n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, r_star, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x_star = SymMatrix::from_matrix(&g * g.transpose())?;

    let mut perm: Vec<usize> = (0..big_n).collect();
    perm.shuffle(&mut rng);
    let sample_index = perm[..m].to_vec();
    let mut rows: Vec<usize> = (0..m).collect();
    rows.shuffle(&mut rng);
    let mut outlier_index = rows[..m_outliers].to_vec();
    outlier_index.sort_unstable();

    let sx = x_star.to_svec();
    let mut b: Vec<f64> = sample_index.iter().map(|&k| sx.as_slice()[k]).collect();
    let noise = Normal::new(0.0, OUTLIER_STD).expect("valid normal");
    for &k in &outlier_index {
        b[k] += noise.sample(&mut rng);
    }

    let layout = ConeLayout::new(2 * m, n)?;
    let mut triplets = Vec::with_capacity(3 * m);
    for (k, &col) in sample_index.iter().enumerate() {
        triplets.push((k, k, 1.0));
        triplets.push((k, m + k, -1.0));
        triplets.push((k, 2 * m + col, 1.0));
    }
    let op = SparseOperator::from_triplets(layout, m, &triplets)?;
    let mut cost = vec![1.0; 2 * m];
    cost.extend(SymMatrix::identity(n).scale(lambda).to_svec().into_vec());
    let prog = ConicProgram::new(Arc::new(op), b.clone(), cost)?;
    let inst = RmcInstance { n, r_star, m, m_outliers, seed, g, x_star, sample_index, outlier_index, b, lambda };
    Ok((prog, inst))
}

/// PSD-only map `X ↦ P_m svec(X)` that observes `m` distinct svec coordinates.
pub fn sampling_operator(n: usize, m: usize, seed: u64) -> Result<SparseOperator> {
    let big_n = svec_len(n);
    if n == 0 || m == 0 || m > big_n {
        return dim_err(format!("need 1 <= m <= n(n+1)/2 = {big_n}, got m = {m}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..big_n).collect();
    perm.shuffle(&mut rng);
    let triplets: Vec<_> = perm[..m].iter().enumerate().map(|(k, &c)| (k, c, 1.0)).collect();
    SparseOperator::from_triplets(ConeLayout::new(0, n)?, m, &triplets)
}

/// `‖X − X★‖_F`.
pub fn reconstruction_error(x: &SymMatrix, inst: &RmcInstance) -> f64 {
    (x.as_matrix() - inst.x_star.as_matrix()).norm()
}

/// Random complementary pair: `X★` of rank `r` and `S★` on the orthogonal complement,
/// with nonzero eigenvalues drawn from `[0.5, 1]`.
pub fn complementary_pair(n: usize, r: usize, seed: u64) -> Result<(SymMatrix, SymMatrix)> {
    if r > n || n == 0 {
        return dim_err(format!("rank {r} outside 0..={n}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = a.qr().q();
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=1.0)).collect();
    let part = |range: std::ops::Range<usize>| {
        let mut m = DMatrix::zeros(n, n);
        for k in range {
            let c = q.column(k);
            m += c * c.transpose() * d[k];
        }
        SymMatrix::from_matrix(m)
    };
    Ok((part(0..r)?, part(r..n)?))
}

/// One member of a centered-iterate sweep.
#[derive(Debug, Clone)]
pub struct CenteredIterate {
    pub x: SymMatrix,
    pub s: SymMatrix,
    pub mu: f64,
}

/// Interior pairs near `(X★, S★)` at each `μ` with `psd_centrality(X, S, μ) ≤ delta_target`.
///
/// In the common eigenbasis of `X★` and `S★` with `a = x★ − s★`, the exactly centered pair is
/// `x = (a + √(a² + 4μ))/2`, `s = x − a`; `S` then receives a fixed random symmetric
/// perturbation `μ·P` with `‖P‖₂` sized so the centrality bound holds.
pub fn gen_centered_iterates(
    x_star: &SymMatrix,
    s_star: &SymMatrix,
    mu_list: &[f64],
    delta_target: f64,
    seed: u64,
) -> Result<Vec<CenteredIterate>> {
    let n = x_star.order();
    if s_star.order() != n {
        return dim_err("X★ and S★ differ in order");
    }
    let scale = x_star.frobenius_norm().max(s_star.frobenius_norm()).max(1.0);
    let prod = x_star.as_matrix() * s_star.as_matrix();
    if prod.norm() > 1e-10 * scale * scale {
        return Err(Error::GenerationFailure("X★S★ is not zero".into()));
    }
    let diff = eig_sym(&x_star.add_scaled(-1.0, s_star))?;
    let sum_min = eig_sym(&x_star.add_scaled(1.0, s_star))?.min_value();
    if !(sum_min > 1e-12 * scale) {
        return Err(Error::GenerationFailure("X★ + S★ is not positive definite".into()));
    }
    if !(delta_target >= 0.0) {
        return Err(Error::GenerationFailure(format!("delta_target {delta_target} is negative")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p0 = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let p0 = SymMatrix::from_matrix(&p0 + p0.transpose())?;
    let p_norm = eig_sym(&p0)?.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let v = &diff.vectors;
    let mut out = Vec::with_capacity(mu_list.len());
    for &mu in mu_list {
        if !(mu > 0.0) {
            return Err(Error::GenerationFailure(format!("mu = {mu} is not positive")));
        }
        let xd: Vec<f64> = diff.values.iter().map(|a| 0.5 * (a + (a * a + 4.0 * mu).sqrt())).collect();
        let sd: Vec<f64> = diff.values.iter().zip(&xd).map(|(a, x)| x - a).collect();
        let x = SymMatrix::from_diagonal(&xd).congruence(v);
        let s0 = SymMatrix::from_diagonal(&sd).congruence(v);
        let x_norm = xd.iter().fold(0.0f64, |a, b| a.max(*b));
        let mut coef = if p_norm > 0.0 { 0.99 * delta_target / (x_norm * p_norm) } else { 0.0 };
        let mut done = None;
        for _ in 0..60 {
            let s = s0.add_scaled(mu * coef, &p0);
            let interior = eig_sym(&s)?.min_value() > 0.0;
            if interior {
                let c = psd_centrality(&x, &s, mu)?;
                if c <= delta_target + 1e-12 {
                    done = Some(s);
                    break;
                }
            }
            coef *= 0.5;
        }
        let s = done.ok_or_else(|| Error::GenerationFailure(format!("centrality {delta_target} unreachable at mu = {mu:e}")))?;
        out.push(CenteredIterate { x, s, mu });
    }
    Ok(out)
}
