use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shdoa::bench::{
    builtin_names, builtin_scenario, crb_sweep, emit_crb_csv, emit_csv, load_scenario, run_scenario, write_crb,
    EstimatorKind, RunOptions, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "shdoa", version, about = "Spherical-harmonic DOA estimation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo scenario and write trials and summary CSVs.
    Run(RunArgs),
    /// Compute the CRB sweep of a scenario without running estimators.
    Crb(CommonArgs),
    /// List builtin scenarios.
    ListScenarios,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario TOML file or builtin name.
    scenario: String,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix; `.trials.csv` etc. are appended.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated subset of em, uniform_ml, music.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    /// Add a wall_ms column (output is then not reproducible).
    #[arg(long)]
    timings: bool,
}

fn load(args: &CommonArgs) -> shdoa::Result<ScenarioConfig> {
    let mut cfg = load_scenario(&args.scenario)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_prefix(cfg: &ScenarioConfig) -> PathBuf {
    cfg.output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("results/{}", cfg.name)))
}

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "-".into()
    }
}

fn run(args: RunArgs) -> shdoa::Result<()> {
    let mut cfg = load(&args.common)?;
    if let Some(list) = &args.estimators {
        cfg.estimators = list
            .iter()
            .map(|s| EstimatorKind::parse(s))
            .collect::<shdoa::Result<_>>()?;
        cfg.validate()?;
    }
    let opts = RunOptions {
        workers: args.workers,
        timings: args.timings,
        ..Default::default()
    };
    let report = run_scenario(&cfg, &opts)?;
    let (trials, summary) = emit_csv(&report, &output_prefix(&cfg))?;
    println!(
        "{:<12} {:>7} {:>6} {:>10} {:>10} {:>10} {:>10} {:>5}",
        "estimator", "snr_db", "ns", "rmse_θ°", "rmse_φ°", "crb_θ°", "crb_φ°", "fail"
    );
    for s in &report.summary {
        println!(
            "{:<12} {:>7} {:>6} {:>10} {:>10} {:>10} {:>10} {:>5}",
            s.estimator.name(),
            s.snr_db,
            s.ns,
            fmt(s.rmse_theta_deg),
            fmt(s.rmse_phi_deg),
            fmt(s.crb_theta_deg),
            fmt(s.crb_phi_deg),
            s.failures
        );
    }
    eprintln!("wrote {} and {}", trials.display(), summary.display());
    Ok(())
}

fn crb(args: CommonArgs) -> shdoa::Result<()> {
    let cfg = load(&args)?;
    let rows = crb_sweep(&cfg)?;
    if cfg.output.is_some() {
        let path = emit_crb_csv(&cfg.name, &rows, &output_prefix(&cfg))?;
        eprintln!("wrote {}", path.display());
    } else {
        write_crb(
            &cfg.name,
            &rows,
            std::io::stdout().lock(),
            std::path::Path::new("<stdout>"),
        )?;
    }
    Ok(())
}

fn list() {
    for name in builtin_names() {
        let cfg = builtin_scenario(name).expect("builtin");
        let kinds: Vec<&str> = cfg.estimators.iter().map(|e| e.name()).collect();
        println!(
            "{name:<20} sources={} trials={} snr_db={:?} estimators={}",
            cfg.sources.len(),
            cfg.trials,
            cfg.noise.snr_db,
            kinds.join(",")
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Crb(a) => crb(a),
        Command::ListScenarios => {
            list();
            Ok(())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
