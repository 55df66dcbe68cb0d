//! Concentrated ML objectives and their building blocks.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{fit, row_energies};
use crate::array::sh_matrix_rows;
use crate::error::{Error, Result};
use crate::scene::HoaSignal;
use crate::sh::{sph_harm_vector, Direction, ShBasis};

/// Row residual energies below this are clamped before taking logs.
pub const RESIDUAL_FLOOR: f64 = 1e-300;

/// `ŝ(t) = (Y Yᵀ)⁻¹ Y b(t)` for every snapshot.
pub fn ls_source_estimate(y: &DMatrix<f64>, b: &HoaSignal) -> Result<DMatrix<f64>> {
    check_cols(y, b)?;
    Ok(fit(y, &b.frames)?.0)
}

fn check_cols(y: &DMatrix<f64>, b: &HoaSignal) -> Result<()> {
    if y.ncols() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Y has {} columns, signal has {} channels",
            y.ncols(),
            b.dim()
        )));
    }
    if y.nrows() == 0 || y.nrows() > y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "need 1 ≤ L ≤ P, got L={} P={}",
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

fn residual(doas: &[Direction], data: &DMatrix<f64>, basis: ShBasis) -> Result<DMatrix<f64>> {
    let y = sh_matrix_rows(basis, doas);
    if doas.is_empty() || doas.len() > basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "need 1 ≤ L ≤ P, got L={} P={}",
            doas.len(),
            basis.dim()
        )));
    }
    Ok(fit(&y, data)?.1)
}

/// `Σ_t ‖b(t) − Yᵀ ŝ(t)‖²`.
pub fn uniform_ml_objective(doas: &[Direction], b: &HoaSignal) -> Result<f64> {
    uniform_on(doas, &b.frames, b.basis)
}

pub(crate) fn uniform_on(doas: &[Direction], data: &DMatrix<f64>, basis: ShBasis) -> Result<f64> {
    Ok(residual(doas, data, basis)?.norm_squared())
}

/// `q̂_p = (1/Ns) Σ_t g_p(t)²`.
pub fn noise_variance_estimate(g: &DMatrix<f64>) -> Vec<f64> {
    let ns = g.ncols().max(1) as f64;
    row_energies(g).into_iter().map(|e| e / ns).collect()
}

/// `‖ĝ_j‖²` for each SH channel `j`.
pub fn residual_row_energies(doas: &[Direction], b: &HoaSignal) -> Result<Vec<f64>> {
    Ok(row_energies(&residual(doas, &b.frames, b.basis)?))
}

/// `Σ_j ln ‖ĝ_j‖²`.
pub fn nonuniform_ml_objective(doas: &[Direction], b: &HoaSignal) -> Result<f64> {
    Ok(nonuniform_ml_objective_flagged(doas, b)?.0)
}

/// As [`nonuniform_ml_objective`], also reporting whether the floor was hit.
pub fn nonuniform_ml_objective_flagged(doas: &[Direction], b: &HoaSignal) -> Result<(f64, bool)> {
    Ok(log_sum(&residual_row_energies(doas, b)?))
}

pub(crate) fn nonuniform_on(doas: &[Direction], data: &DMatrix<f64>, basis: ShBasis) -> Result<f64> {
    Ok(log_sum(&row_energies(&residual(doas, data, basis)?)).0)
}

pub(crate) fn log_sum(energies: &[f64]) -> (f64, bool) {
    let mut floored = false;
    let v = energies
        .iter()
        .map(|&e| {
            if e < RESIDUAL_FLOOR {
                floored = true;
                RESIDUAL_FLOOR.ln()
            } else {
                e.ln()
            }
        })
        .sum();
    (v, floored)
}

/// `Σ_j ln ‖ĝ_j^(l)‖²` for one source with projector `yᵀy/‖y‖²`.
pub fn single_source_objective(doa: Direction, b_l: &HoaSignal) -> f64 {
    single_on(doa, &b_l.frames, b_l.basis)
}

pub(crate) fn single_residual(doa: Direction, data: &DMatrix<f64>, basis: ShBasis) -> DMatrix<f64> {
    let y = nalgebra::DVector::from_vec(sph_harm_vector(basis, doa));
    let coeff = (y.transpose() * data) / y.norm_squared();
    data - &y * coeff
}

pub(crate) fn single_on(doa: Direction, data: &DMatrix<f64>, basis: ShBasis) -> f64 {
    let g = single_residual(doa, data, basis);
    let mut v = 0.0;
    for r in g.row_iter() {
        v += r.norm_squared().max(RESIDUAL_FLOOR).ln();
    }
    v
}

/// Gaussian log-likelihood with diagonal covariance `q`, given the row
/// residual energies over `ns` snapshots. Variances are clamped at
/// [`RESIDUAL_FLOOR`].
pub fn log_likelihood(energies: &[f64], q: &[f64], ns: usize) -> f64 {
    let p = energies.len() as f64;
    let ns = ns as f64;
    let mut v = -0.5 * p * ns * (2.0 * PI).ln();
    for (&e, &qi) in energies.iter().zip(q) {
        let qi = qi.max(RESIDUAL_FLOOR);
        v -= 0.5 * ns * qi.ln() + 0.5 * e / qi;
    }
    v
}
