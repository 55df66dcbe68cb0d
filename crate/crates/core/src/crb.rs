//! Deterministic Cramér–Rao bound for SH-domain DOA estimation.
//!
//! With `b(t) = Y(Ψ)ᵀ s(t) + z(t)`, `z ~ N(0, C_b)` and known `C_b`, the
//! Fisher blocks over `Θ = [θᵀ, φᵀ]ᵀ` are `F_αβ = S_s ⊙ (Ẏ_α C_b⁻¹ Ẏ_βᵀ)` with
//! `S_s = Σ_t s(t) s(t)ᵀ`. Bounds come from Schur complements of `F`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scene::{NoiseSpec, Scene};
use crate::sh::{sph_harm_dphi_vector, sph_harm_dtheta_vector, Direction, ShBasis};

/// Eigenvalue ratio below which a block counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Theta,
    Phi,
}

/// `(Ẏ_θ, Ẏ_φ)`: row `r` holds `∂y(Ψ_r)/∂θ_r` and `∂y(Ψ_r)/∂φ_r`.
pub fn sh_derivative_matrices(basis: ShBasis, doas: &[Direction]) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = basis.dim();
    let mut dt = DMatrix::zeros(doas.len(), p);
    let mut dp = DMatrix::zeros(doas.len(), p);
    for (r, d) in doas.iter().enumerate() {
        for (c, v) in sph_harm_dtheta_vector(basis, *d).into_iter().enumerate() {
            dt[(r, c)] = v;
        }
        for (c, v) in sph_harm_dphi_vector(basis, *d).into_iter().enumerate() {
            dp[(r, c)] = v;
        }
    }
    (dt, dp)
}

/// `Ẏ_a C_b⁻¹ Ẏ_bᵀ`. Diagonal `C_b` is divided out directly; otherwise both
/// sides are whitened with the Cholesky factor.
fn weighted_gram(cb: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = cb.nrows();
    let diagonal = (0..p).all(|i| (0..p).all(|j| i == j || cb[(i, j)] == 0.0));
    if diagonal {
        let q = cb.diagonal();
        if q.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Singular { block: "C_b" });
        }
        let mut scaled = b.clone();
        for mut row in scaled.row_iter_mut() {
            for (v, qi) in row.iter_mut().zip(q.iter()) {
                *v /= qi;
            }
        }
        return Ok(a * scaled.transpose());
    }
    let chol = cb.clone().cholesky().ok_or(Error::Singular { block: "C_b" })?;
    let l = chol.l();
    let wa = l
        .solve_lower_triangular(&a.transpose())
        .ok_or(Error::Singular { block: "C_b" })?;
    let wb = l
        .solve_lower_triangular(&b.transpose())
        .ok_or(Error::Singular { block: "C_b" })?;
    Ok(wa.transpose() * wb)
}

fn check_inputs(ss: &DMatrix<f64>, cb: &DMatrix<f64>, basis: ShBasis, doas: &[Direction]) -> Result<()> {
    let l = doas.len();
    let p = basis.dim();
    if ss.shape() != (l, l) {
        return Err(Error::DimensionMismatch(format!(
            "S_s is {:?}, expected {l}×{l}",
            ss.shape()
        )));
    }
    if cb.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!(
            "C_b is {:?}, expected {p}×{p}",
            cb.shape()
        )));
    }
    Ok(())
}

/// One Fisher block `S_s ⊙ (Ẏ_α C_b⁻¹ Ẏ_βᵀ)`.
pub fn fisher_block(
    alpha: Axis,
    beta: Axis,
    ss: &DMatrix<f64>,
    cb: &DMatrix<f64>,
    basis: ShBasis,
    doas: &[Direction],
) -> Result<DMatrix<f64>> {
    check_inputs(ss, cb, basis, doas)?;
    let (dt, dp) = sh_derivative_matrices(basis, doas);
    let pick = |a: Axis| if a == Axis::Theta { &dt } else { &dp };
    let g = weighted_gram(cb, pick(alpha), pick(beta))?;
    Ok(ss.component_mul(&g))
}

/// The four `L × L` blocks of the Fisher matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherBlocks {
    pub tt: DMatrix<f64>,
    pub tp: DMatrix<f64>,
    pub pt: DMatrix<f64>,
    pub pp: DMatrix<f64>,
}

impl FisherBlocks {
    /// `[F_θθ F_θφ; F_φθ F_φφ]`.
    pub fn full(&self) -> DMatrix<f64> {
        let l = self.tt.nrows();
        let mut f = DMatrix::zeros(2 * l, 2 * l);
        f.view_mut((0, 0), (l, l)).copy_from(&self.tt);
        f.view_mut((0, l), (l, l)).copy_from(&self.tp);
        f.view_mut((l, 0), (l, l)).copy_from(&self.pt);
        f.view_mut((l, l), (l, l)).copy_from(&self.pp);
        f
    }
}

pub fn fisher_blocks(ss: &DMatrix<f64>, cb: &DMatrix<f64>, basis: ShBasis, doas: &[Direction]) -> Result<FisherBlocks> {
    check_inputs(ss, cb, basis, doas)?;
    let (dt, dp) = sh_derivative_matrices(basis, doas);
    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    let tp = ss.component_mul(&weighted_gram(cb, &dt, &dp)?);
    Ok(FisherBlocks {
        tt: sym(ss.component_mul(&weighted_gram(cb, &dt, &dt)?)),
        pt: tp.transpose(),
        tp,
        pp: sym(ss.component_mul(&weighted_gram(cb, &dp, &dp)?)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbResult {
    /// Diagonal of `C₁`, rad².
    pub theta_bounds: Vec<f64>,
    /// Diagonal of `C₂`, rad².
    pub phi_bounds: Vec<f64>,
    pub blocks: FisherBlocks,
}

fn spd_inverse(m: &DMatrix<f64>, block: &'static str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || !(min > SINGULAR_TOL * max) {
        return Err(Error::Singular { block });
    }
    sym.lu().try_inverse().ok_or(Error::Singular { block })
}

/// `C₁ = (F_θθ − F_θφ F_φφ⁻¹ F_φθ)⁻¹`, `C₂ = (F_φφ − F_φθ F_θθ⁻¹ F_θφ)⁻¹`.
pub fn crb_bounds(blocks: FisherBlocks) -> Result<CrbResult> {
    let pp_inv = spd_inverse(&blocks.pp, "F_phiphi")?;
    let tt_inv = spd_inverse(&blocks.tt, "F_thetatheta")?;
    let c1 = spd_inverse(
        &(&blocks.tt - &blocks.tp * &pp_inv * &blocks.pt),
        "theta Schur complement",
    )?;
    let c2 = spd_inverse(
        &(&blocks.pp - &blocks.pt * &tt_inv * &blocks.tp),
        "phi Schur complement",
    )?;
    Ok(CrbResult {
        theta_bounds: c1.diagonal().iter().copied().collect(),
        phi_bounds: c2.diagonal().iter().copied().collect(),
        blocks,
    })
}

/// Bound for the scene's true DOAs and realized waveforms with SH noise
/// covariance `cb`.
pub fn crb_with_covariance(scene: &Scene, cb: &DMatrix<f64>, basis: ShBasis) -> Result<CrbResult> {
    let ss = scene.signal_gram();
    crb_bounds(fisher_blocks(&ss, cb, basis, &scene.doas)?)
}

/// [`crb_with_covariance`] with `C_b` taken from an SH-domain noise model.
pub fn crb_for_scene(scene: &Scene, noise: &NoiseSpec, basis: ShBasis) -> Result<CrbResult> {
    noise.validate()?;
    let q = noise.sh_variances(basis)?;
    crb_with_covariance(scene, &DMatrix::from_diagonal(&q.into()), basis)
}

/// `√bound` in degrees.
pub fn bound_to_rmse_deg(bound: f64) -> f64 {
    bound.sqrt().to_degrees()
}
