//! SH-domain narrow-band MUSIC baseline.

use nalgebra::{DMatrix, DVector};

use super::{check_grid_step, check_source_count, fit, nelder_mead_2d, EstimationResult, NelderMeadConfig};
use crate::array::sh_matrix_rows;
use crate::error::{Error, Result};
use crate::scene::HoaSignal;
use crate::sh::{sph_harm_vector, Direction};

/// Spectrum values are capped here (the noiseless projection is zero).
pub const MUSIC_CAP: f64 = 1e15;
const GAP_WARNING: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicConfig {
    pub grid_step_deg: f64,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self { grid_step_deg: 1.0 }
    }
}

/// Regular `(θ, φ)` lattice including both poles; point `(i, j)` sits at
/// `θ = i·step`, `φ = j·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicGrid {
    pub step_deg: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub points: Vec<Direction>,
}

impl MusicGrid {
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_phi + j
    }
}

pub fn music_grid(step_deg: f64) -> Result<MusicGrid> {
    check_grid_step(step_deg)?;
    let n_theta = (180.0 / step_deg).round() as usize + 1;
    let n_phi = (360.0 / step_deg).round() as usize;
    let mut points = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        for j in 0..n_phi {
            points.push(Direction::from_degrees(i as f64 * step_deg, j as f64 * step_deg));
        }
    }
    Ok(MusicGrid {
        step_deg,
        n_theta,
        n_phi,
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MusicSpectrum {
    pub values: Vec<f64>,
    /// Ascending eigenvalues of the sample covariance.
    pub eigenvalues: Vec<f64>,
    /// Signal and noise eigenvalues are not separated.
    pub rank_warning: bool,
}

struct Subspace {
    en: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    rank_warning: bool,
}

/// `ŷ E_n E_nᵀ ŷᵀ`, the normalized projection onto the noise subspace.
fn null_projection(en: &DMatrix<f64>, basis: crate::sh::ShBasis, d: Direction) -> f64 {
    let y = DVector::from_vec(sph_harm_vector(basis, d));
    (en.transpose() * &y).norm_squared() / y.norm_squared()
}

fn capped(denom: f64) -> f64 {
    if denom * MUSIC_CAP <= 1.0 {
        MUSIC_CAP
    } else {
        1.0 / denom
    }
}

fn subspace(b: &HoaSignal, l: usize) -> Result<Subspace> {
    check_source_count(b.basis, l)?;
    let p = b.dim();
    if b.num_snapshots() < p {
        return Err(Error::DimensionMismatch(format!(
            "MUSIC needs at least {p} snapshots, got {}",
            b.num_snapshots()
        )));
    }
    let cov = b.gram() / b.num_snapshots() as f64;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let noise_dim = p - l;
    let en = DMatrix::from_fn(p, noise_dim, |r, c| eig.eigenvectors[(r, order[c])]);

    let top = eigenvalues[p - 1].abs().max(f64::MIN_POSITIVE);
    let gap = (eigenvalues[noise_dim] - eigenvalues[noise_dim - 1]) / top;
    Ok(Subspace {
        en,
        eigenvalues,
        rank_warning: gap < GAP_WARNING,
    })
}

/// `1 / (ŷ E_n E_nᵀ ŷᵀ)` with `ŷ = y/‖y‖` at every grid point.
pub fn music_spectrum(b: &HoaSignal, l: usize, grid: &[Direction]) -> Result<MusicSpectrum> {
    let sub = subspace(b, l)?;
    let values = grid
        .iter()
        .map(|d| capped(null_projection(&sub.en, b.basis, *d)))
        .collect();
    Ok(MusicSpectrum {
        values,
        eigenvalues: sub.eigenvalues,
        rank_warning: sub.rank_warning,
    })
}

/// The `l` highest local maxima of `values` on `grid`, each polished by
/// Nelder–Mead on the noise-subspace projection `refine`.
fn pick_peaks(grid: &MusicGrid, values: &[f64], l: usize, refine: &dyn Fn(Direction) -> Direction) -> Vec<Direction> {
    let (nt, np) = (grid.n_theta, grid.n_phi);
    let mut peaks: Vec<(usize, usize)> = Vec::new();
    for i in 0..nt {
        for j in 0..np {
            let v = values[grid.index(i, j)];
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                let ii = i as i64 + di;
                if ii < 0 || ii >= nt as i64 {
                    continue;
                }
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let jj = (j as i64 + dj).rem_euclid(np as i64) as usize;
                    if values[grid.index(ii as usize, jj)] > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push((i, j));
            }
        }
    }
    peaks.sort_by(|a, b| values[grid.index(b.0, b.1)].total_cmp(&values[grid.index(a.0, a.1)]));

    let step = grid.step_deg;
    let min_sep = (2.0 * step).to_radians();
    let mut out: Vec<Direction> = Vec::new();
    for (i, j) in peaks {
        let d = refine(grid.points[grid.index(i, j)]);
        if out.iter().all(|o| o.angle_to(&d) > min_sep) {
            out.push(d);
        }
        if out.len() == l {
            break;
        }
    }
    out
}

/// MUSIC DOAs with least-squares waveforms.
pub fn music_estimate(b: &HoaSignal, l: usize, cfg: &MusicConfig) -> Result<EstimationResult> {
    let grid = music_grid(cfg.grid_step_deg)?;
    let spec = music_spectrum(b, l, &grid.points)?;
    let en = subspace(b, l)?.en;
    let nm = NelderMeadConfig {
        initial_step: cfg.grid_step_deg.to_radians(),
        ..NelderMeadConfig::default()
    };
    let refine = |start: Direction| {
        let r = nelder_mead_2d(|d| null_projection(&en, b.basis, d), start, &nm);
        if r.value <= null_projection(&en, b.basis, start) {
            r.best
        } else {
            start
        }
    };
    let doas = pick_peaks(&grid, &spec.values, l, &refine);
    if doas.len() < l {
        return Err(Error::Domain(format!(
            "MUSIC spectrum has {} separated peaks, {l} requested",
            doas.len()
        )));
    }
    let y = sh_matrix_rows(b.basis, &doas);
    let (s, _) = fit(&y, &b.frames)?;
    let p = b.dim();
    let noise_dim = p - l;
    let sigma2 = spec.eigenvalues[..noise_dim].iter().sum::<f64>() / noise_dim as f64;
    let peak_sum: f64 = music_spectrum(b, l, &doas)?.values.iter().sum();
    let mut warnings = Vec::new();
    if spec.rank_warning {
        warnings.push("signal and noise eigenvalues not separated".into());
    }
    Ok(EstimationResult {
        doas,
        source_estimates: s,
        noise_covariances: Vec::new(),
        aggregate_noise: vec![sigma2.max(0.0); p],
        objective_trace: vec![peak_sum],
        iterations_used: 1,
        converged: true,
        floored: false,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{synth_hoa_noiseless, synth_source_signals, Scene, SignalKind};
    use crate::sh::ShBasis;

    #[test]
    fn grid_layout() {
        let g = music_grid(1.0).unwrap();
        assert_eq!(g.points.len(), 181 * 360);
        assert_eq!(g.points[g.index(90, 45)], Direction::from_degrees(90.0, 45.0));
    }

    #[test]
    fn noiseless_single_source_peaks_at_truth() {
        let truth = Direction::from_degrees(50.0, 120.0);
        let s = synth_source_signals(1, 50, SignalKind::Gaussian, 8).unwrap();
        let scene = Scene::new(vec![truth], 1.0, s, 8).unwrap();
        let b = synth_hoa_noiseless(&scene, ShBasis::new(2)).unwrap();
        let grid = music_grid(1.0).unwrap();
        let spec = music_spectrum(&b, 1, &grid.points).unwrap();
        let imax = (0..spec.values.len())
            .max_by(|&a, &c| spec.values[a].total_cmp(&spec.values[c]))
            .unwrap();
        assert_eq!(grid.points[imax], truth);
        assert!(spec.values[imax] > 1e12);
        let r = music_estimate(&b, 1, &MusicConfig::default()).unwrap();
        assert!(r.doas[0].angle_to(&truth).to_degrees() < 0.5);
    }

    #[test]
    fn too_few_snapshots_rejected() {
        let b = HoaSignal::new(DMatrix::from_element(9, 4, 1.0), ShBasis::new(2)).unwrap();
        assert!(music_spectrum(&b, 1, &[Direction::new(1.0, 1.0)]).is_err());
    }
}
