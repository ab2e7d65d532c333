use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cvshape::experiment::{render, run, Construction, ExperimentConfig, OutputFormat, Scenario};
use cvshape::{Error, Result};

/// Simulate shaping of a four-mode CV cluster and check the entanglement criteria.
///
/// Exits 0 when every criterion passes, 1 when any fails, 2 on error.
#[derive(Debug, Parser)]
#[command(name = "cvshape", version)]
struct Cli {
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Key/value configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Monte Carlo trials (0 = analytic only).
    #[arg(long)]
    trials: Option<usize>,
    /// RNG seed; falls back to CVSHAPE_SEED, then the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "trials")]
    analytic_only: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    #[arg(long, value_enum)]
    construction: Option<Construction>,
    /// Ignore all loss and calibration.
    #[arg(long)]
    lossless: bool,
    /// Record wall time in the report.
    #[arg(long)]
    timing: bool,
}

fn configure(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Ok(s) = std::env::var("CVSHAPE_SEED") {
        cfg.seed = s.trim().parse().map_err(|_| Error::Config(format!("CVSHAPE_SEED `{s}` is not an integer")))?;
    }
    if let Some(s) = cli.scenario {
        cfg.scenario = s;
    }
    if let Some(c) = cli.construction {
        cfg.construction = c;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if cli.analytic_only {
        cfg.trials = 0;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    if cli.lossless {
        cfg.loss = cvshape::experiment::LossSetting::Lossless;
    }
    cfg.timing |= cli.timing;
    Ok(cfg)
}

fn main_inner(cli: &Cli) -> Result<bool> {
    let cfg = configure(cli)?;
    let report = run(&cfg)?;
    let text = render(&report, cfg.format)?;
    match &cfg.output {
        Some(path) => std::fs::write(path, &text)?,
        None => print!("{text}"),
    }
    for (stage, r) in [("initial", &report.initial), ("final", &report.final_report)] {
        for c in &r.nullifiers {
            eprintln!(
                "{stage:>7}  {:<14} {:.6}  {:+.2} dB  {}",
                c.form,
                c.variance,
                c.db,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
        for s in &r.residual_squeezing {
            eprintln!("{stage:>7}  mode {} squeezed {:+.2} dB, anti-squeezed {:+.2} dB", s.node, s.squeezed_db, s.antisqueezed_db);
        }
    }
    Ok(report.all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
