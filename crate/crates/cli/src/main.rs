use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use blowup_core::config::{parse_config, Format, RunConfig};
use blowup_core::constants::{Gamma3Variant, QuadMethod};
use blowup_core::report::emit_reports;
use blowup_core::runner::{run_subcommand, SUBCOMMANDS};
use clap::{Parser, ValueEnum};

/// Environment variable that overrides the output directory.
const OUT_ENV: &str = "BLOWUP_LAB_OUT";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Without,
    WithAlpha,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Gauss,
    Mc,
}

/// Numerical checks for boundary-concentrating solutions of the weighted
/// critical biharmonic problem on a ball.
#[derive(Debug, Parser)]
#[command(name = "blowup-lab", version)]
struct Cli {
    /// One of: constants, bubble-check, green-check, projection-scan,
    /// asymptotics, critical-points, residual-scan, energy-check.
    subcommand: String,
    /// TOML run configuration. Without it a minimal configuration in
    /// dimension `--dim` is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory; the BLOWUP_LAB_OUT environment variable takes
    /// precedence.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated list of json and csv.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Which normalisation of `γ₃` to use.
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Boundary depth of the projection scan.
    #[arg(long)]
    depth: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Points of the `0 ≤ PU ≤ U` check.
    #[arg(long)]
    points: Option<usize>,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => {
            let n = cli.dim.context("either --config or --dim is required")?;
            RunConfig::minimal(n)?
        }
    };
    if let Some(n) = cli.dim {
        if n != cfg.dim() {
            cfg.domain.dim = n;
            cfg.domain.center = None;
            cfg.weight.g = None;
            cfg.anchor = Default::default();
        }
    }
    if let Some(s) = cli.seed {
        cfg.quadrature.seed = Some(s);
    }
    if let Some(m) = cli.samples {
        cfg.quadrature.samples = m;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.display().to_string();
    }
    if let Some(f) = &cli.format {
        cfg.output.formats = f
            .iter()
            .map(|s| match s.trim() {
                "json" => Ok(Format::Json),
                "csv" => Ok(Format::Csv),
                other => anyhow::bail!("unknown format `{other}`; expected json or csv"),
            })
            .collect::<Result<_>>()?;
    }
    if let Some(v) = cli.variant {
        cfg.sigma.gamma3_variant = match v {
            Variant::Without => Gamma3Variant::Without,
            Variant::WithAlpha => Gamma3Variant::WithExtraAlphaFactor,
        };
    }
    if let Some(m) = cli.method {
        cfg.quadrature.method = match m {
            Method::Gauss => QuadMethod::RadialGauss,
            Method::Mc => QuadMethod::MonteCarlo,
        };
    }
    if let Some(d) = cli.depth {
        cfg.projection.depth = d;
    }
    if let Some(d) = &cli.deltas {
        cfg.projection.deltas = d.clone();
    }
    if let Some(p) = cli.points {
        cfg.projection.sandwich_points = p;
    }
    Ok(cfg.validated()?)
}

fn run(cli: &Cli) -> Result<bool> {
    if !SUBCOMMANDS.contains(&cli.subcommand.as_str()) {
        return Err(blowup_core::Error::UnknownSubcommand(cli.subcommand.clone()).into());
    }
    let cfg = load(cli)?;
    let env = run_subcommand(&cli.subcommand, &cfg).with_context(|| format!("running {}", cli.subcommand))?;
    let dir = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let files = emit_reports(&env, &dir, &cfg.output.formats)?;
    for c in &env.checks {
        println!("{:<8} {:<20} {}", format!("{:?}", c.status).to_uppercase(), c.id, c.detail);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    let failed = env.failed_checks();
    if !failed.is_empty() {
        eprintln!("failed checks: {}", failed.join(", "));
    }
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
