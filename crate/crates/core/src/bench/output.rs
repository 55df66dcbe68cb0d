//! CSV writers.
//!
//! `<path>.trials.csv` columns: `scenario, snr_db, ns, trial, seed, estimator,
//! status, iterations, converged`, then for each source `l = 1..L`:
//! `true_theta_deg_l, true_phi_deg_l, est_theta_deg_l, est_phi_deg_l,
//! sq_err_theta_deg2_l, sq_err_phi_deg2_l, crb_theta_deg2_l, crb_phi_deg2_l`,
//! then `message` and, with timings on, `wall_ms`. Missing values are empty.
//!
//! `<path>.summary.csv` columns: `scenario, estimator, snr_db, ns,
//! rmse_theta_deg, rmse_phi_deg, crb_theta_deg, crb_phi_deg, failures`.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::run::{BenchReport, CrbRow, TrialStatus};

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn trials_header(num_sources: usize, timings: bool) -> Vec<String> {
    let mut h: Vec<String> = [
        "scenario",
        "snr_db",
        "ns",
        "trial",
        "seed",
        "estimator",
        "status",
        "iterations",
        "converged",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for l in 1..=num_sources {
        for col in [
            "true_theta_deg",
            "true_phi_deg",
            "est_theta_deg",
            "est_phi_deg",
            "sq_err_theta_deg2",
            "sq_err_phi_deg2",
            "crb_theta_deg2",
            "crb_phi_deg2",
        ] {
            h.push(format!("{col}_{l}"));
        }
    }
    h.push("message".into());
    if timings {
        h.push("wall_ms".into());
    }
    h
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "scenario",
    "estimator",
    "snr_db",
    "ns",
    "rmse_theta_deg",
    "rmse_phi_deg",
    "crb_theta_deg",
    "crb_phi_deg",
    "failures",
];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_trials<W: Write>(report: &BenchReport, out: W, path: &Path) -> Result<()> {
    let e = csv_err(path);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trials_header(report.num_sources, report.timings))
        .map_err(&e)?;
    for r in &report.records {
        let (status, message) = match &r.status {
            TrialStatus::Ok => ("ok", String::new()),
            TrialStatus::Failed(m) => ("failed", m.clone()),
        };
        let mut row = vec![
            r.scenario.clone(),
            num(r.snr_db),
            r.ns.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.estimator.name().to_string(),
            status.to_string(),
            r.iterations.to_string(),
            r.converged.to_string(),
        ];
        for l in 0..report.num_sources {
            let est = r.estimates.get(l);
            row.push(num(r.truth[l].theta_deg()));
            row.push(num(r.truth[l].phi_deg()));
            row.push(est.map_or(String::new(), |d| num(d.theta_deg())));
            row.push(est.map_or(String::new(), |d| num(d.phi_deg())));
            row.push(r.sq_err_theta.get(l).map_or(String::new(), |v| num(*v)));
            row.push(r.sq_err_phi.get(l).map_or(String::new(), |v| num(*v)));
            row.push(num(r.crb_theta[l]));
            row.push(num(r.crb_phi[l]));
        }
        row.push(message);
        if report.timings {
            row.push(r.wall_ms.map_or(String::new(), num));
        }
        w.write_record(&row).map_err(&e)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_summary<W: Write>(report: &BenchReport, out: W, path: &Path) -> Result<()> {
    let e = csv_err(path);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(&e)?;
    for s in &report.summary {
        w.write_record([
            s.scenario.clone(),
            s.estimator.name().to_string(),
            num(s.snr_db),
            s.ns.to_string(),
            num(s.rmse_theta_deg),
            num(s.rmse_phi_deg),
            num(s.crb_theta_deg),
            num(s.crb_phi_deg),
            s.failures.to_string(),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<std::fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<path>.trials.csv` and `<path>.summary.csv`; returns both paths.
pub fn emit_csv(report: &BenchReport, path: &Path) -> Result<(PathBuf, PathBuf)> {
    let trials = with_suffix(path, ".trials.csv");
    let summary = with_suffix(path, ".summary.csv");
    write_trials(report, create(&trials)?, &trials)?;
    write_summary(report, create(&summary)?, &summary)?;
    Ok((trials, summary))
}

pub fn write_crb<W: Write>(scenario: &str, rows: &[CrbRow], out: W, path: &Path) -> Result<()> {
    let e = csv_err(path);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario", "snr_db", "ns", "crb_theta_deg", "crb_phi_deg", "singular"])
        .map_err(&e)?;
    for r in rows {
        w.write_record([
            scenario.to_string(),
            num(r.snr_db),
            r.ns.to_string(),
            num(r.crb_theta_deg),
            num(r.crb_phi_deg),
            r.singular.to_string(),
        ])
        .map_err(&e)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<path>.crb.csv`.
pub fn emit_crb_csv(scenario: &str, rows: &[CrbRow], path: &Path) -> Result<PathBuf> {
    let file = with_suffix(path, ".crb.csv");
    write_crb(scenario, rows, create(&file)?, &file)?;
    Ok(file)
}
