//! Mixed cone (nonnegative orthant ⊕ one PSD block) and Nesterov–Todd scaling.

use crate::error::{dim_err, Error, Result};
use crate::symlin::{eig_sym, smat_from, svec_into, svec_len, EigenDecomposition, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeLayout {
    pub lp_dim: usize,
    pub psd_order: usize,
}

impl ConeLayout {
    pub fn new(lp_dim: usize, psd_order: usize) -> Result<Self> {
        if psd_order == 0 {
            return dim_err("PSD block must have order at least 1");
        }
        Ok(ConeLayout { lp_dim, psd_order })
    }

    pub fn psd_len(&self) -> usize {
        svec_len(self.psd_order)
    }

    /// Length of the stacked primal vector `[lp | svec(psd)]`.
    pub fn dim(&self) -> usize {
        self.lp_dim + self.psd_len()
    }

    /// Barrier degree `ℓ + n`.
    pub fn degree(&self) -> usize {
        self.lp_dim + self.psd_order
    }
}

/// A point of the mixed cone; primal iterates and dual slacks share this type.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePoint {
    pub lp: Vec<f64>,
    pub psd: SymMatrix,
}

impl ConePoint {
    pub fn new(lp: Vec<f64>, psd: SymMatrix) -> Self {
        ConePoint { lp, psd }
    }

    pub fn layout(&self) -> ConeLayout {
        ConeLayout { lp_dim: self.lp.len(), psd_order: self.psd.order() }
    }

    /// `ρ·e`, with `e` the identity of the cone.
    pub fn identity(layout: ConeLayout, rho: f64) -> Self {
        ConePoint {
            lp: vec![rho; layout.lp_dim],
            psd: SymMatrix::identity(layout.psd_order).scale(rho),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let l = self.lp.len();
        let mut out = vec![0.0; l + svec_len(self.psd.order())];
        out[..l].copy_from_slice(&self.lp);
        svec_into(self.psd.as_matrix(), &mut out[l..]);
        out
    }

    pub fn from_vec(layout: ConeLayout, v: &[f64]) -> Result<Self> {
        if v.len() != layout.dim() {
            return dim_err(format!("vector of length {} for cone of dimension {}", v.len(), layout.dim()));
        }
        let l = layout.lp_dim;
        Ok(ConePoint {
            lp: v[..l].to_vec(),
            psd: SymMatrix::symmetrize(smat_from(&v[l..], layout.psd_order)),
        })
    }

    /// `self + a·d`.
    pub fn add_scaled(&self, a: f64, d: &ConePoint) -> ConePoint {
        ConePoint {
            lp: self.lp.iter().zip(&d.lp).map(|(x, y)| x + a * y).collect(),
            psd: self.psd.add_scaled(a, &d.psd),
        }
    }

    pub fn inner(&self, other: &ConePoint) -> f64 {
        crate::symlin::dot(&self.lp, &other.lp) + self.psd.inner(&other.psd)
    }

    /// Smallest eigenvalue of the PSD block and smallest LP entry (`+∞` if `ℓ = 0`).
    pub fn interior_margin(&self) -> Result<(f64, f64)> {
        let e = eig_sym(&self.psd)?;
        let lp_min = self.lp.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((e.min_value(), lp_min))
    }

    pub fn is_interior(&self) -> bool {
        matches!(self.interior_margin(), Ok((a, b)) if a > 0.0 && b > 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct NtScaling {
    pub w_lp: Vec<f64>,
    pub w: SymMatrix,
    pub eig: EigenDecomposition,
}

impl NtScaling {
    /// `W^p` through the cached eigendecomposition.
    pub fn w_pow(&self, p: f64) -> SymMatrix {
        self.eig.spectral_map(|x| x.powf(p))
    }
}

fn check_layouts(x: &ConePoint, s: &ConePoint) -> Result<()> {
    if x.layout() != s.layout() {
        return dim_err(format!("cone layouts {:?} and {:?} differ", x.layout(), s.layout()));
    }
    Ok(())
}

fn interior_eig(m: &SymMatrix, what: &str) -> Result<EigenDecomposition> {
    let e = eig_sym(m)?;
    if !(e.min_value() > 0.0) {
        return Err(Error::NotInteriorPoint(format!(
            "{what} has smallest eigenvalue {:e}",
            e.min_value()
        )));
    }
    Ok(e)
}

fn check_lp(v: &[f64], what: &str) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::NotInteriorPoint(format!("{what} has LP entry {x:e}")));
    }
    Ok(())
}

/// Eigenvalues of `X^{1/2} S X^{1/2}` together with `X^{1/2}`.
fn scaled_product(x: &SymMatrix, s: &SymMatrix) -> Result<(SymMatrix, EigenDecomposition)> {
    let ex = interior_eig(x, "X")?;
    let xh = ex.spectral_map(f64::sqrt);
    let m = s.congruence(xh.as_matrix());
    let em = interior_eig(&m, "X^{1/2} S X^{1/2}")?;
    Ok((xh, em))
}

pub fn nt_scaling(x: &ConePoint, s: &ConePoint) -> Result<NtScaling> {
    check_layouts(x, s)?;
    check_lp(&x.lp, "X")?;
    check_lp(&s.lp, "S")?;
    interior_eig(&s.psd, "S")?;
    let (xh, em) = scaled_product(&x.psd, &s.psd)?;
    let m_isqrt = em.spectral_map(|v| 1.0 / v.sqrt());
    let w = m_isqrt.congruence(xh.as_matrix());
    let eig = eig_sym(&w)?;
    let w_lp = x.lp.iter().zip(&s.lp).map(|(a, b)| (a / b).sqrt()).collect();
    Ok(NtScaling { w_lp, w, eig })
}

pub fn duality_mu(x: &ConePoint, s: &ConePoint) -> Result<f64> {
    check_layouts(x, s)?;
    Ok(x.inner(s) / x.layout().degree() as f64)
}

/// PSD-block centrality `‖μ⁻¹X^{1/2}SX^{1/2} − I‖₂`.
pub fn psd_centrality(x: &SymMatrix, s: &SymMatrix, mu: f64) -> Result<f64> {
    let (_, em) = scaled_product(x, s)?;
    Ok(em.values.iter().map(|v| (v / mu - 1.0).abs()).fold(0.0, f64::max))
}

pub fn centrality(x: &ConePoint, s: &ConePoint, mu: f64) -> Result<f64> {
    check_layouts(x, s)?;
    if !(mu > 0.0) {
        return Err(Error::NumericalFailure(format!("centrality needs mu > 0, got {mu:e}")));
    }
    check_lp(&x.lp, "X")?;
    check_lp(&s.lp, "S")?;
    interior_eig(&s.psd, "S")?;
    let psd = psd_centrality(&x.psd, &s.psd, mu)?;
    let lp = x.lp.iter().zip(&s.lp).map(|(a, b)| (a * b / mu - 1.0).abs()).fold(0.0, f64::max);
    Ok(psd.max(lp))
}

/// `μ` at which the PSD-block centrality equals `target`, if it exists.
///
/// With `v` the eigenvalues of `X^{1/2}SX^{1/2}`, centrality is
/// `max(v_max/μ − 1, 1 − v_min/μ)`; the smallest `μ` achieving `target`
/// is `v_max/(1 + target)`, valid when `1 − v_min/μ ≤ target` there.
pub fn mu_for_centrality(x: &SymMatrix, s: &SymMatrix, target: f64) -> Result<Option<f64>> {
    let (_, em) = scaled_product(x, s)?;
    let mu = em.max_value() / (1.0 + target);
    Ok((1.0 - em.min_value() / mu <= target * (1.0 + 1e-12)).then_some(mu))
}
