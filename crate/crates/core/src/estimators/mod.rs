//! DOA estimators operating on HOA observations.
//!
//! All estimators take the source count `L` as an input. The iterative ones
//! only depend on the data through `Σ_t b(t) b(t)ᵀ`, so they run on a `P × P`
//! square root of that Gram matrix instead of the raw snapshots; source
//! waveforms are recovered from the full data afterwards.

mod em;
mod music;
mod nelder_mead;
mod objectives;
mod uniform;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scene::{rng_for, HoaSignal};
use crate::sh::{Direction, ShBasis};

pub use em::{
    em_expectation, em_maximization, em_maximization_from, estimate_em, estimate_em_from, Expectation, MStep,
};
pub use music::{music_estimate, music_grid, music_spectrum, MusicConfig, MusicGrid, MusicSpectrum};
pub use nelder_mead::{nelder_mead_2d, NelderMeadConfig, NelderMeadResult};
pub use objectives::{
    log_likelihood, ls_source_estimate, noise_variance_estimate, nonuniform_ml_objective,
    nonuniform_ml_objective_flagged, residual_row_energies, single_source_objective, uniform_ml_objective,
    RESIDUAL_FLOOR,
};
pub use uniform::{estimate_uniform_ml, estimate_uniform_ml_from};

/// Smallest accepted eigenvalue ratio of `Y Yᵀ`.
pub const RANK_TOL: f64 = 1e-10;

/// Inner minimizer for each 2-D search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    /// Coarse grid followed by Nelder–Mead refinement.
    NelderMead,
    /// Coarse grid only.
    GridOnly,
}

/// How starting DOAs are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Best coarse-grid point for the first source, then each further source
    /// on the grid with the earlier ones held fixed.
    Sequential,
    /// The `L` best mutually non-adjacent local minima of the single-source
    /// objective on the coarse grid.
    GridMinima,
    /// Uniformly random directions.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub max_iters: usize,
    /// Relative objective-change threshold.
    pub t_thr: f64,
    pub grid_step_deg: f64,
    pub multistart: usize,
    pub optimizer: Optimizer,
    pub init: InitStrategy,
    pub nelder_mead: NelderMeadConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            t_thr: 1e-6,
            grid_step_deg: 10.0,
            multistart: 1,
            optimizer: Optimizer::NelderMead,
            init: InitStrategy::Sequential,
            nelder_mead: NelderMeadConfig::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_thr > 0.0) || !self.t_thr.is_finite() {
            return Err(Error::Config(format!("t_thr must be > 0, got {}", self.t_thr)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.multistart == 0 {
            return Err(Error::Config("multistart must be at least 1".into()));
        }
        check_grid_step(self.grid_step_deg)
    }
}

pub(crate) fn check_grid_step(step: f64) -> Result<()> {
    if !(step > 0.0) || step > 180.0 {
        return Err(Error::Config(format!("grid step {step}° out of range")));
    }
    let n = 360.0 / step;
    if (n - n.round()).abs() > 1e-9 {
        return Err(Error::Config(format!("grid step {step}° does not divide 360")));
    }
    Ok(())
}

/// Output of every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub doas: Vec<Direction>,
    /// `L × Ns` least-squares waveforms at the final DOAs.
    pub source_estimates: DMatrix<f64>,
    /// Per-source diagonal noise estimates `Q̂^(l)`; empty for estimators
    /// without a per-source noise model.
    pub noise_covariances: Vec<Vec<f64>>,
    /// Diagonal of the aggregate `Q̂`.
    pub aggregate_noise: Vec<f64>,
    /// Objective per iteration, starting with the initial point. Residual
    /// energy for uniform ML (decreasing), log-likelihood for EM.
    pub objective_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// A row residual energy hit [`RESIDUAL_FLOOR`].
    pub floored: bool,
    pub warnings: Vec<String>,
}

/// `P × K` matrix whose Gram equals that of `b`, with `K ≤ P`.
pub(crate) fn compress(b: &HoaSignal) -> DMatrix<f64> {
    let p = b.dim();
    if b.num_snapshots() <= p {
        return b.frames.clone();
    }
    let r = b.frames.transpose().qr().r();
    r.transpose()
}

/// Least-squares fit of `data` on the rows of `Y`: returns `(Ŝ, residual)`.
pub(crate) fn fit(y: &DMatrix<f64>, data: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let yyt = y * y.transpose();
    let eig = yyt.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let ratio = if max > 0.0 { min / max } else { 0.0 };
    if !(ratio >= RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }
    let chol = yyt.cholesky().ok_or(Error::RankDeficient { ratio })?;
    let s = chol.solve(&(y * data));
    let resid = data - y.transpose() * &s;
    Ok((s, resid))
}

pub(crate) fn row_energies(m: &DMatrix<f64>) -> Vec<f64> {
    m.row_iter().map(|r| r.norm_squared()).collect()
}

/// Coarse grid over the sphere: one point per pole, `step`-spaced rings.
pub fn coarse_grid(step_deg: f64) -> Result<Vec<Direction>> {
    check_grid_step(step_deg)?;
    let n_theta = (180.0 / step_deg).round() as usize;
    let n_phi = (360.0 / step_deg).round() as usize;
    let mut out = vec![Direction::new(0.0, 0.0)];
    for i in 1..n_theta {
        let theta = (i as f64 * step_deg).to_radians();
        for j in 0..n_phi {
            out.push(Direction::new(theta, (j as f64 * step_deg).to_radians()));
        }
    }
    if n_theta >= 1 {
        out.push(Direction::new(std::f64::consts::PI, 0.0));
    }
    Ok(out)
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Local minima of `values` over `grid`, best first, no two closer than
/// 1.5 grid steps.
fn separated_minima(grid: &[Direction], values: &[f64], step: f64) -> Vec<usize> {
    let radius = 1.5 * step;
    let mut minima: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            values[i].is_finite()
                && (0..grid.len()).all(|j| j == i || grid[i].angle_to(&grid[j]) > radius || values[j] >= values[i])
        })
        .collect();
    minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut chosen: Vec<usize> = Vec::new();
    for i in minima {
        if chosen.iter().all(|&c| grid[c].angle_to(&grid[i]) > radius) {
            chosen.push(i);
        }
    }
    chosen
}

/// Starting DOAs for one multistart attempt.
///
/// `single` scores one direction; `joint` scores a full DOA set and is used
/// for sequential completion.
pub(crate) fn initial_doas(
    l: usize,
    cfg: &EstimatorConfig,
    attempt: usize,
    single: &dyn Fn(Direction) -> f64,
    joint: &dyn Fn(&[Direction]) -> f64,
) -> Result<Vec<Direction>> {
    let step = cfg.grid_step_deg.to_radians();
    match cfg.init {
        InitStrategy::Random { seed } => {
            let mut rng = rng_for(seed.wrapping_add(attempt as u64), 0);
            Ok((0..l)
                .map(|_| {
                    let z: f64 = rng.random_range(-1.0..1.0);
                    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    Direction::new(z.acos(), phi)
                })
                .collect())
        }
        InitStrategy::Sequential | InitStrategy::GridMinima => {
            let grid = coarse_grid(cfg.grid_step_deg)?;
            let values: Vec<f64> = grid.iter().map(|d| single(*d)).collect();
            let minima = separated_minima(&grid, &values, step);
            let first = minima
                .get(attempt)
                .or(minima.first())
                .copied()
                .unwrap_or_else(|| argmin(&values));
            let mut doas = vec![grid[first]];
            if cfg.init == InitStrategy::GridMinima {
                for &i in minima.iter().filter(|&&i| i != first) {
                    if doas.len() == l {
                        break;
                    }
                    doas.push(grid[i]);
                }
            }
            while doas.len() < l {
                let mut best: Option<(f64, Direction)> = None;
                for d in &grid {
                    if doas.iter().any(|e| e.angle_to(d) < 0.5 * step) {
                        continue;
                    }
                    let mut trial = doas.clone();
                    trial.push(*d);
                    let v = joint(&trial);
                    if best.is_none_or(|(bv, _)| v < bv) {
                        best = Some((v, *d));
                    }
                }
                let (_, d) =
                    best.ok_or_else(|| Error::Config("coarse grid too small for the requested source count".into()))?;
                doas.push(d);
            }
            if cfg.init == InitStrategy::Sequential {
                refine_on_grid(&mut doas, &grid, step, joint);
            }
            Ok(doas)
        }
    }
}

const MAX_GRID_PASSES: usize = 10;

/// Alternating grid passes: each source moves to its best grid point with the
/// others fixed, until a pass changes nothing.
fn refine_on_grid(doas: &mut [Direction], grid: &[Direction], step: f64, joint: &dyn Fn(&[Direction]) -> f64) {
    if doas.len() < 2 {
        return;
    }
    let mut current = joint(doas);
    for _ in 0..MAX_GRID_PASSES {
        let mut moved = false;
        for l in 0..doas.len() {
            let mut best = (current, doas[l]);
            for d in grid {
                if doas
                    .iter()
                    .enumerate()
                    .any(|(k, e)| k != l && e.angle_to(d) < 0.5 * step)
                {
                    continue;
                }
                let mut trial = doas.to_vec();
                trial[l] = *d;
                let v = joint(&trial);
                if v < best.0 {
                    best = (v, *d);
                }
            }
            if best.1 != doas[l] {
                doas[l] = best.1;
                current = best.0;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Permutation sorting DOAs by `(θ, φ)`, so that reordered inputs run the
/// same floating-point sequence.
pub(crate) fn canonical_order(doas: &[Direction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..doas.len()).collect();
    order.sort_by(|&a, &b| {
        doas[a]
            .theta
            .total_cmp(&doas[b].theta)
            .then(doas[a].phi.total_cmp(&doas[b].phi))
    });
    order
}

pub(crate) fn check_source_count(basis: ShBasis, l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::Config("source count must be at least 1".into()));
    }
    if l >= basis.dim() {
        return Err(Error::Config(format!(
            "{l} sources cannot be resolved with {} SH channels",
            basis.dim()
        )));
    }
    Ok(())
}
