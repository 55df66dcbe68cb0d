//! Monte-Carlo sweeps.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::array::{make_encoder, ArrayGeometry, Encoder};
use crate::crb::{bound_to_rmse_deg, crb_for_scene, crb_with_covariance, CrbResult};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_em, estimate_uniform_ml, music_estimate, EstimationResult, EstimatorConfig, MusicConfig,
};
use crate::scene::{
    diagonal_noise_for_snr, element_sigma2_for_snr, mode_strength_noise_profile, synth_hoa_direct, synth_hoa_element,
    synth_source_signals, uniform_sigma2_for_snr, HoaSignal, NoiseSpec, RoomSpec, Scene,
};
use crate::sh::Direction;

use super::config::{EstimatorKind, NoiseModel, ScenarioConfig};
use super::score::{best_assignment, score_assigned, trial_seed};

#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

/// One estimator run on one synthesized trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub scenario: String,
    pub snr_db: f64,
    pub ns: usize,
    pub trial: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub status: TrialStatus,
    pub iterations: usize,
    pub converged: bool,
    pub truth: Vec<Direction>,
    /// Estimates reordered to match `truth`; empty on failure.
    pub estimates: Vec<Direction>,
    /// Per-source squared errors, deg²; empty on failure.
    pub sq_err_theta: Vec<f64>,
    pub sq_err_phi: Vec<f64>,
    /// Per-source CRB, deg²; NaN where the bound is singular.
    pub crb_theta: Vec<f64>,
    pub crb_phi: Vec<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub estimator: EstimatorKind,
    pub snr_db: f64,
    pub ns: usize,
    /// `√(mean sq_err)` pooled over successful trials and sources; NaN if none.
    pub rmse_theta_deg: f64,
    pub rmse_phi_deg: f64,
    /// `√(mean CRB deg²)` pooled the same way over finite bounds.
    pub crb_theta_deg: f64,
    pub crb_phi_deg: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub scenario: String,
    pub num_sources: usize,
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    /// Record wall time per estimator run (makes output non-reproducible).
    pub timings: bool,
    pub estimator: EstimatorConfig,
    pub music: MusicConfig,
}

/// Everything that does not change between trials.
struct Prepared {
    name: String,
    doas: Vec<Direction>,
    basis: crate::sh::ShBasis,
    wavenumber: f64,
    geometry: ArrayGeometry,
    encoder: Option<Encoder>,
    room: Option<RoomSpec>,
    profile: Option<Vec<f64>>,
}

impl Prepared {
    fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let basis = cfg.basis();
        let wavenumber = cfg.wavenumber()?;
        let geometry = cfg.geometry()?;
        let kr = wavenumber * geometry.radius();
        let encoder = if cfg.uses_element_path() {
            Some(make_encoder(&geometry, basis, wavenumber)?)
        } else {
            None
        };
        let profile = match (cfg.noise.model, &cfg.noise.profile) {
            (NoiseModel::ModeStrength, _) => Some(mode_strength_noise_profile(basis, kr)),
            (NoiseModel::Diagonal, Some(profile)) => {
                let mean = profile.iter().sum::<f64>() / profile.len() as f64;
                Some(profile.iter().map(|v| v / mean).collect())
            }
            _ => None,
        };
        Ok(Self {
            name: cfg.name.clone(),
            doas: cfg.doas(),
            basis,
            wavenumber,
            geometry,
            encoder,
            room: cfg.room_spec()?,
            profile,
        })
    }

    fn noise(&self, snr_db: f64) -> NoiseSpec {
        let l = self.doas.len();
        if let Some(enc) = &self.encoder {
            NoiseSpec::ElementDomain {
                sigma2: element_sigma2_for_snr(enc, l, snr_db),
            }
        } else if let Some(p) = &self.profile {
            diagonal_noise_for_snr(p, l, snr_db)
        } else {
            NoiseSpec::Uniform {
                sigma2: uniform_sigma2_for_snr(l, snr_db),
            }
        }
    }

    fn scene(&self, cfg: &ScenarioConfig, ns: usize, seed: u64) -> Result<Scene> {
        let s = synth_source_signals(self.doas.len(), ns, cfg.signal.kind, seed)?;
        Scene::new(self.doas.clone(), self.wavenumber, s, seed)
    }

    fn observe(&self, scene: &Scene, noise: &NoiseSpec) -> Result<HoaSignal> {
        match &self.encoder {
            Some(enc) => synth_hoa_element(scene, &self.geometry, enc, noise, self.room.as_ref()),
            None => synth_hoa_direct(scene, self.basis, noise),
        }
    }

    /// Free-field bound for the scene; reflections are not modelled.
    fn crb(&self, scene: &Scene, noise: &NoiseSpec) -> Result<CrbResult> {
        match (&self.encoder, noise) {
            (Some(enc), NoiseSpec::ElementDomain { sigma2 }) => {
                let cb: DMatrix<f64> = enc.induced_noise_covariance(*sigma2);
                crb_with_covariance(scene, &cb, self.basis)
            }
            _ => crb_for_scene(scene, noise, self.basis),
        }
    }
}

fn deg2(bound: f64) -> f64 {
    bound_to_rmse_deg(bound).powi(2)
}

fn run_estimator(kind: EstimatorKind, b: &HoaSignal, l: usize, opts: &RunOptions) -> Result<EstimationResult> {
    match kind {
        EstimatorKind::Em => estimate_em(b, l, &opts.estimator),
        EstimatorKind::UniformMl => estimate_uniform_ml(b, l, &opts.estimator),
        EstimatorKind::Music => music_estimate(b, l, &opts.music),
    }
}

struct Job {
    ns_idx: usize,
    snr_idx: usize,
    trial: usize,
}

fn run_job(cfg: &ScenarioConfig, prep: &Prepared, opts: &RunOptions, job: &Job) -> Vec<TrialRecord> {
    let ns = cfg.signal.snapshots[job.ns_idx];
    let snr_db = cfg.noise.snr_db[job.snr_idx];
    let seed = trial_seed(cfg.base_seed, &cfg.name, job.trial);
    let l = prep.doas.len();
    let base = |estimator| TrialRecord {
        scenario: prep.name.clone(),
        snr_db,
        ns,
        trial: job.trial,
        seed,
        estimator,
        status: TrialStatus::Ok,
        iterations: 0,
        converged: false,
        truth: prep.doas.clone(),
        estimates: Vec::new(),
        sq_err_theta: Vec::new(),
        sq_err_phi: Vec::new(),
        crb_theta: vec![f64::NAN; l],
        crb_phi: vec![f64::NAN; l],
        wall_ms: None,
    };
    let noise = prep.noise(snr_db);
    let data = prep.scene(cfg, ns, seed).and_then(|scene| {
        let b = prep.observe(&scene, &noise)?;
        let crb = prep.crb(&scene, &noise).ok();
        Ok((b, crb))
    });
    let (b, crb) = match data {
        Ok(v) => v,
        Err(e) => {
            return cfg
                .estimators
                .iter()
                .map(|&k| TrialRecord {
                    status: TrialStatus::Failed(format!("synthesis: {e}")),
                    ..base(k)
                })
                .collect()
        }
    };
    let (crb_theta, crb_phi) = match &crb {
        Some(c) => (
            c.theta_bounds.iter().map(|&v| deg2(v)).collect(),
            c.phi_bounds.iter().map(|&v| deg2(v)).collect(),
        ),
        None => (vec![f64::NAN; l], vec![f64::NAN; l]),
    };
    cfg.estimators
        .iter()
        .map(|&kind| {
            let mut rec = TrialRecord {
                crb_theta: crb_theta.clone(),
                crb_phi: crb_phi.clone(),
                ..base(kind)
            };
            let start = opts.timings.then(Instant::now);
            let out = run_estimator(kind, &b, l, opts);
            rec.wall_ms = start.map(|t| t.elapsed().as_secs_f64() * 1e3);
            match out.and_then(|r| {
                let perm = best_assignment(&prep.doas, &r.doas)?;
                Ok((r, perm))
            }) {
                Ok((r, perm)) => {
                    let errs = score_assigned(&prep.doas, &r.doas, &perm);
                    rec.iterations = r.iterations_used;
                    rec.converged = r.converged;
                    rec.estimates = perm.iter().map(|&j| r.doas[j]).collect();
                    rec.sq_err_theta = errs.iter().map(|e| e.theta_deg.powi(2)).collect();
                    rec.sq_err_phi = errs.iter().map(|e| e.phi_deg.powi(2)).collect();
                }
                Err(e) => rec.status = TrialStatus::Failed(e.to_string()),
            }
            rec
        })
        .collect()
}

/// Runs every (snapshots, SNR, trial) cell of the sweep. Each cell is
/// synthesized once and shared by all estimators. Records come out ordered by
/// (snapshots, SNR, estimator, trial) whatever the worker count.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<BenchReport> {
    opts.estimator.validate()?;
    let prep = Prepared::new(cfg)?;
    let mut jobs = Vec::new();
    for ns_idx in 0..cfg.signal.snapshots.len() {
        for snr_idx in 0..cfg.noise.snr_db.len() {
            for trial in 0..cfg.trials {
                jobs.push(Job { ns_idx, snr_idx, trial });
            }
        }
    }
    let exec = || -> Vec<Vec<TrialRecord>> { jobs.par_iter().map(|j| run_job(cfg, &prep, opts, j)).collect() };
    let per_job = match opts.workers {
        Some(0) => return Err(Error::Config("workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(exec),
        None => exec(),
    };
    let n_est = cfg.estimators.len();
    let mut keyed: Vec<((usize, usize, usize, usize), TrialRecord)> = Vec::with_capacity(jobs.len() * n_est);
    for (job, recs) in jobs.iter().zip(per_job) {
        for (e, rec) in recs.into_iter().enumerate() {
            keyed.push(((job.ns_idx, job.snr_idx, e, job.trial), rec));
        }
    }
    keyed.sort_by_key(|(k, _)| *k);
    let records: Vec<TrialRecord> = keyed.into_iter().map(|(_, r)| r).collect();
    let summary = summarize(cfg, &records);
    Ok(BenchReport {
        scenario: cfg.name.clone(),
        num_sources: prep.doas.len(),
        records,
        summary,
        timings: opts.timings,
    })
}

fn pooled_root_mean<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let (sum, n) = values
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        (sum / n as f64).sqrt()
    }
}

/// One row per (snapshots, SNR, estimator), in record order.
pub fn summarize(cfg: &ScenarioConfig, records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &ns in &cfg.signal.snapshots {
        for &snr in &cfg.noise.snr_db {
            for &est in &cfg.estimators {
                let group: Vec<&TrialRecord> = records
                    .iter()
                    .filter(|r| r.ns == ns && r.snr_db == snr && r.estimator == est)
                    .collect();
                let ok = || group.iter().filter(|r| r.status == TrialStatus::Ok);
                rows.push(SummaryRow {
                    scenario: cfg.name.clone(),
                    estimator: est,
                    snr_db: snr,
                    ns,
                    rmse_theta_deg: pooled_root_mean(ok().flat_map(|r| r.sq_err_theta.iter())),
                    rmse_phi_deg: pooled_root_mean(ok().flat_map(|r| r.sq_err_phi.iter())),
                    crb_theta_deg: pooled_root_mean(group.iter().flat_map(|r| r.crb_theta.iter())),
                    crb_phi_deg: pooled_root_mean(group.iter().flat_map(|r| r.crb_phi.iter())),
                    failures: group.iter().filter(|r| r.status != TrialStatus::Ok).count(),
                });
            }
        }
    }
    rows
}

/// Pooled CRB, degrees RMSE, per (snapshots, SNR).
#[derive(Debug, Clone, PartialEq)]
pub struct CrbRow {
    pub snr_db: f64,
    pub ns: usize,
    pub crb_theta_deg: f64,
    pub crb_phi_deg: f64,
    pub singular: usize,
}

/// Bounds alone, over the same trial signals `run_scenario` would draw.
pub fn crb_sweep(cfg: &ScenarioConfig) -> Result<Vec<CrbRow>> {
    let prep = Prepared::new(cfg)?;
    let mut rows = Vec::new();
    for &ns in &cfg.signal.snapshots {
        for &snr_db in &cfg.noise.snr_db {
            let noise = prep.noise(snr_db);
            let results: Vec<Result<CrbResult>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let scene = prep.scene(cfg, ns, trial_seed(cfg.base_seed, &cfg.name, t))?;
                    prep.crb(&scene, &noise)
                })
                .collect();
            let ok: Vec<&CrbResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
            let theta: Vec<f64> = ok
                .iter()
                .flat_map(|c| c.theta_bounds.iter().map(|&v| deg2(v)))
                .collect();
            let phi: Vec<f64> = ok.iter().flat_map(|c| c.phi_bounds.iter().map(|&v| deg2(v))).collect();
            rows.push(CrbRow {
                snr_db,
                ns,
                crb_theta_deg: pooled_root_mean(theta.iter()),
                crb_phi_deg: pooled_root_mean(phi.iter()),
                singular: results.len() - ok.len(),
            });
        }
    }
    Ok(rows)
}
