//! `spinorlab`: command-line runner for the positive-mass experiments.

mod config;
mod report;
mod runner;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ConfigError, Experiment, ExperimentConfig, Format, GridSection, MetricSection, OutputSection, SolverSection};
use runner::Runner;

#[derive(Parser)]
#[command(name = "spinorlab", version, about = "Witten spinor experiments on asymptotically flat 3-metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs every experiment of a TOML configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Compares chart curvature with a finite-difference oracle.
    CurvatureAudit(Single),
    /// ADM mass by Richardson extrapolation of sphere integrals.
    AdmMass(Single),
    /// Clifford and spin-connection certificates.
    SpinCertify(Single),
    /// Solves the Witten boundary problem and checks the mass identity.
    Witten(Single),
    /// Pointwise estimate at every interior node.
    Lemma1(Single),
    /// Both sides of the weighted curvature estimate.
    Theorem1(Single),
    /// Mass sweep over the regularized family.
    Sweep(Single),
}

#[derive(Args, Clone)]
struct ExecArgs {
    /// Experiments run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats (overrides the configuration).
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

#[derive(Args, Clone)]
struct Single {
    /// Metric family.
    #[arg(long, default_value = "regularized")]
    metric: String,
    /// Mass parameter.
    #[arg(long)]
    m: Option<f64>,
    /// Regularization length.
    #[arg(long)]
    eps: Option<f64>,
    /// Extra family parameter as `key=value`.
    #[arg(long = "param", value_parser = parse_param)]
    params: Vec<(String, f64)>,
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    h: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    rmax: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rmin: f64,
    /// Truncation radii (default `{R, 1.5R, 2R}`).
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20000)]
    max_iters: usize,
    #[command(flatten)]
    exec: ExecArgs,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Single {
    fn into_config(self, name: &str) -> Result<(ExperimentConfig, ExecArgs), ConfigError> {
        let mut params: BTreeMap<String, f64> = self.params.into_iter().collect();
        if let Some(m) = self.m {
            params.insert("m".into(), m);
        }
        if let Some(e) = self.eps {
            params.insert("eps".into(), e);
        }
        let cfg = ExperimentConfig {
            metric: MetricSection {
                family: self.metric,
                params,
            },
            grid: GridSection {
                h: self.h,
                r_max: self.rmax,
                sweep: self.sweep,
                r_min: self.rmin,
                ..GridSection::default()
            },
            solver: SolverSection {
                tol: self.tol,
                max_iters: self.max_iters,
            },
            experiments: vec![Experiment::from_name(name)?],
            output: OutputSection::default(),
        };
        Ok((cfg, self.exec))
    }
}

fn load(command: Command) -> Result<(ExperimentConfig, ExecArgs), ConfigError> {
    let (name, single) = match command {
        Command::Run { config, exec } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| ConfigError::Parse(format!("{}: {e}", config.display())))?;
            return Ok((ExperimentConfig::parse(&text)?, exec));
        }
        Command::CurvatureAudit(s) => ("curvature_audit", s),
        Command::AdmMass(s) => ("adm_mass", s),
        Command::SpinCertify(s) => ("spin_certify", s),
        Command::Witten(s) => ("witten", s),
        Command::Lemma1(s) => ("lemma1", s),
        Command::Theorem1(s) => ("theorem1", s),
        Command::Sweep(s) => ("sweep", s),
    };
    let (cfg, exec) = single.into_config(name)?;
    cfg.validate()?;
    Ok((cfg, exec))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut cfg, exec) = match load(cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = exec.out {
        cfg.output.dir = out;
    }
    if let Some(formats) = exec.format {
        cfg.output.formats = formats;
    }
    if let Err(e) = cfg.memory_cap() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let manifest = match Runner::new(&cfg).and_then(|r| r.run_all(exec.jobs.max(1))) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    for e in &manifest.experiments {
        let status = if e.passed() { "PASS" } else { "FAIL" };
        println!("{status} {} ({:.1} s)", e.experiment, e.wall_seconds);
        for c in &e.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            println!("    {mark} {}: {} ({})", c.name, report::fmt17(c.value), c.limit);
        }
        if let Some(err) = &e.error {
            println!("    error: {err}");
        }
        if let Some(h) = &e.residual_history {
            println!("    residual history: {h}");
        }
    }
    println!("manifest: {}", cfg.output.dir.join("manifest.json").display());
    if manifest.solver_failure {
        ExitCode::from(3)
    } else if manifest.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
