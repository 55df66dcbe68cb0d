//! EM for multiple sources under nonuniform (diagonal) SH-domain noise.
//!
//! Each iteration splits the data into per-source HOA signals, then solves `L`
//! independent single-source problems, each a 2-D search.

use nalgebra::DMatrix;

use super::objectives::{log_likelihood, nonuniform_on, single_on, single_residual};
use super::{
    canonical_order, check_source_count, coarse_grid, compress, fit, initial_doas, nelder_mead_2d, row_energies,
    EstimationResult, EstimatorConfig, Optimizer,
};
use crate::array::sh_matrix_rows;
use crate::error::{Error, Result};
use crate::scene::HoaSignal;
use crate::sh::{Direction, ShBasis};

/// Per-source signal estimates from one E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub signals: Vec<HoaSignal>,
    /// `γ^(l) = tr Q^(l) / tr Q`.
    pub gammas: Vec<f64>,
    /// Some `Q^(l)` had zero trace and all were reset to `I/P`.
    pub reinitialized: bool,
}

/// Result of one M-step for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub doa: Direction,
    /// Diagonal of `Q̂^(l)`.
    pub q: Vec<f64>,
    pub objective: f64,
    /// Refinement failed and the best coarse-grid point was returned.
    pub fell_back: bool,
}

/// `b̂^(l)(t) = y(Ψ_l)ᵀ ŝ_l(t) + γ^(l) (b(t) − Y(Ψ)ᵀ ŝ(t))`.
pub fn em_expectation(b: &HoaSignal, doas: &[Direction], q_prev: &[Vec<f64>]) -> Result<Expectation> {
    if doas.len() != q_prev.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} DOAs but {} noise vectors",
            doas.len(),
            q_prev.len()
        )));
    }
    if q_prev.iter().any(|q| q.len() != b.dim()) {
        return Err(Error::DimensionMismatch("noise vector length differs from P".into()));
    }
    let (frames, gammas, reinitialized) = expectation_on(&b.frames, b.basis, doas, q_prev)?;
    let signals = frames
        .into_iter()
        .map(|f| HoaSignal::new(f, b.basis))
        .collect::<Result<Vec<_>>>()?;
    Ok(Expectation {
        signals,
        gammas,
        reinitialized,
    })
}

fn expectation_on(
    data: &DMatrix<f64>,
    basis: ShBasis,
    doas: &[Direction],
    q_prev: &[Vec<f64>],
) -> Result<(Vec<DMatrix<f64>>, Vec<f64>, bool)> {
    let l = doas.len();
    if l == 1 {
        return Ok((vec![data.clone()], vec![1.0], false));
    }
    let mut traces: Vec<f64> = q_prev.iter().map(|q| q.iter().sum()).collect();
    let reinitialized = traces.iter().any(|&t| !(t > 0.0));
    if reinitialized {
        traces = vec![1.0; l];
    }
    let total: f64 = traces.iter().sum();
    let gammas: Vec<f64> = traces.iter().map(|t| t / total).collect();

    let y = sh_matrix_rows(basis, doas);
    let (s, resid) = fit(&y, data)?;
    let frames = (0..l)
        .map(|i| y.row(i).transpose() * s.row(i) + &resid * gammas[i])
        .collect();
    Ok((frames, gammas, reinitialized))
}

/// Minimizes the single-source objective over direction and estimates the
/// source's noise variances from the residual.
pub fn em_maximization(b_l: &HoaSignal, cfg: &EstimatorConfig) -> Result<MStep> {
    cfg.validate()?;
    maximization_on(&compress(b_l), b_l.num_snapshots(), b_l.basis, None, cfg)
}

/// [`em_maximization`] that also refines from a previous estimate and keeps it
/// if it scores better.
pub fn em_maximization_from(b_l: &HoaSignal, prev: Direction, cfg: &EstimatorConfig) -> Result<MStep> {
    cfg.validate()?;
    maximization_on(&compress(b_l), b_l.num_snapshots(), b_l.basis, Some(prev), cfg)
}

fn maximization_on(
    data: &DMatrix<f64>,
    ns: usize,
    basis: ShBasis,
    prev: Option<Direction>,
    cfg: &EstimatorConfig,
) -> Result<MStep> {
    let f = |d: Direction| single_on(d, data, basis);
    let grid = coarse_grid(cfg.grid_step_deg)?;
    let mut best = (grid[0], f(grid[0]));
    for d in &grid[1..] {
        let v = f(*d);
        if v < best.1 {
            best = (*d, v);
        }
    }
    let mut fell_back = false;
    if cfg.optimizer == Optimizer::NelderMead {
        let r = nelder_mead_2d(f, best.0, &cfg.nelder_mead);
        if r.value.is_finite() && r.value <= best.1 {
            best = (r.best, r.value);
        } else {
            fell_back = true;
        }
        if let Some(p) = prev {
            let fp = f(p);
            if fp < best.1 {
                let r = nelder_mead_2d(f, p, &cfg.nelder_mead);
                best = if r.value < fp { (r.best, r.value) } else { (p, fp) };
            }
        }
    }
    let g = single_residual(best.0, data, basis);
    let q = row_energies(&g).into_iter().map(|e| e / ns as f64).collect();
    Ok(MStep {
        doa: best.0,
        q,
        objective: best.1,
        fell_back,
    })
}

/// EM estimation of `l` DOAs.
pub fn estimate_em(b: &HoaSignal, l: usize, cfg: &EstimatorConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    check_source_count(b.basis, l)?;
    let data = compress(b);
    let basis = b.basis;
    let single = |d: Direction| single_on(d, &data, basis);
    let joint = |ds: &[Direction]| nonuniform_on(ds, &data, basis).unwrap_or(f64::INFINITY);

    let mut best: Option<Run> = None;
    for attempt in 0..cfg.multistart {
        let init = initial_doas(l, cfg, attempt, &single, &joint)?;
        let run = iterate(&data, b.num_snapshots(), basis, init, cfg)?;
        if best.as_ref().is_none_or(|b| run.value() > b.value()) {
            best = Some(run);
        }
    }
    finish(b, best.expect("multistart ≥ 1"))
}

/// [`estimate_em`] from given starting DOAs.
pub fn estimate_em_from(b: &HoaSignal, init: &[Direction], cfg: &EstimatorConfig) -> Result<EstimationResult> {
    cfg.validate()?;
    check_source_count(b.basis, init.len())?;
    let data = compress(b);
    let order = canonical_order(init);
    let sorted: Vec<Direction> = order.iter().map(|&i| init[i]).collect();
    let mut run = iterate(&data, b.num_snapshots(), b.basis, sorted, cfg)?;
    let mut doas = run.doas.clone();
    let mut q = run.q.clone();
    for (k, &i) in order.iter().enumerate() {
        doas[i] = run.doas[k];
        q[i] = run.q[k].clone();
    }
    run.doas = doas;
    run.q = q;
    finish(b, run)
}

struct Run {
    doas: Vec<Direction>,
    q: Vec<Vec<f64>>,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    reinitialized: bool,
}

impl Run {
    fn value(&self) -> f64 {
        *self.trace.last().expect("trace starts non-empty")
    }
}

fn joint_log_likelihood(
    data: &DMatrix<f64>,
    ns: usize,
    basis: ShBasis,
    doas: &[Direction],
    q: &[Vec<f64>],
) -> Result<f64> {
    let y = sh_matrix_rows(basis, doas);
    let (_, resid) = fit(&y, data)?;
    Ok(log_likelihood(&row_energies(&resid), &aggregate(q, basis.dim()), ns))
}

fn aggregate(q: &[Vec<f64>], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for ql in q {
        for (o, v) in out.iter_mut().zip(ql) {
            *o += v;
        }
    }
    out
}

fn iterate(
    data: &DMatrix<f64>,
    ns: usize,
    basis: ShBasis,
    mut doas: Vec<Direction>,
    cfg: &EstimatorConfig,
) -> Result<Run> {
    let p = basis.dim();
    let l = doas.len();
    let mut q = vec![vec![1.0 / p as f64; p]; l];
    let mut prev_ll = joint_log_likelihood(data, ns, basis, &doas, &[vec![1.0; p]])?;
    let mut trace = vec![prev_ll];
    let mut converged = false;
    let mut reinitialized = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        iterations += 1;
        let (parts, _, reinit) = expectation_on(data, basis, &doas, &q)?;
        reinitialized |= reinit;
        for (i, part) in parts.iter().enumerate() {
            let m = maximization_on(part, ns, basis, Some(doas[i]), cfg)?;
            doas[i] = m.doa;
            q[i] = m.q;
        }
        let ll = joint_log_likelihood(data, ns, basis, &doas, &q)?;
        trace.push(ll);
        if (ll - prev_ll).abs() <= cfg.t_thr * ll.abs() {
            converged = true;
            break;
        }
        prev_ll = ll;
    }
    Ok(Run {
        doas,
        q,
        trace,
        iterations,
        converged,
        reinitialized,
    })
}

fn finish(b: &HoaSignal, run: Run) -> Result<EstimationResult> {
    let y = sh_matrix_rows(b.basis, &run.doas);
    let (s, resid) = fit(&y, &b.frames)?;
    let floored = row_energies(&resid).iter().any(|&e| e < super::RESIDUAL_FLOOR);
    let mut warnings = Vec::new();
    if !run.converged {
        warnings.push(format!("no convergence after {} iterations", run.iterations));
    }
    if run.reinitialized {
        warnings.push("zero-trace noise estimate; weights re-initialized".into());
    }
    Ok(EstimationResult {
        doas: run.doas,
        source_estimates: s,
        aggregate_noise: aggregate(&run.q, b.dim()),
        noise_covariances: run.q,
        iterations_used: run.iterations,
        converged: run.converged,
        objective_trace: run.trace,
        floored,
        warnings,
    })
}
