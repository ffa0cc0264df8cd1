use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser};
use krein::BoundaryCondition;
use krein_cli::{render, run, validate, CliError, ExperimentConfig, Format, Severity, Subcommand};
use serde_json::json;

/// Spectra of Krein strings built from random walks.
#[derive(Debug, Parser)]
#[command(name = "krein", version)]
enum Cli {
    /// Lowest eigenvalues of one string.
    Eig(Common),
    /// Rescaled eigenvalues over a list of lattice sizes, against the limit.
    Converge(Common),
    /// Eigenvalue counts at thresholds, or bracketing rows when `cuts` is set.
    Count(Common),
    /// Disorder-averaged Dirichlet counting function of trap or barrier strings.
    Anneal(Common),
    /// Fundamental solution psi at the right end, optionally with its series.
    Psi(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (standard output if absent). A `<out>.run.json` sidecar holds the timestamp.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Spectral method: sturm or shooting.
    #[arg(long)]
    solver: Option<String>,
    /// ssrw, trap, barrier, explicit-string or explicit-rates.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated lattice sizes for `converge`.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    bc: Option<BoundaryCondition>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated thresholds for `count` and `anneal`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    /// Comma-separated spectral parameters for `psi`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
    /// Print validation diagnostics as JSON and exit.
    #[arg(long)]
    check: bool,
}

fn load(sub: Subcommand, c: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cfg.subcommand {
        if s != sub {
            return Err(CliError::Config {
                field: "subcommand".into(),
                message: format!("config is for `{}`, not `{}`", s.as_str(), sub.as_str()),
            });
        }
    }
    cfg.subcommand = Some(sub);
    macro_rules! over {
        ($($f:ident),*) => { $( if c.$f.is_some() { cfg.$f = c.$f.clone(); } )* };
    }
    over!(seed, out, workers, format, solver, model, n, ns, k, bc, alpha, epsilon, samples, x, lambda);
    Ok(cfg)
}

fn write(path: &PathBuf, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn execute(sub: Subcommand, c: &Common) -> Result<(), CliError> {
    let cfg = load(sub, c)?;
    let diags = validate(&cfg);
    if c.check {
        println!("{}", serde_json::to_string_pretty(&diags).expect("diagnostics serialize"));
        return Ok(());
    }
    for d in diags.iter().filter(|d| d.severity == Severity::Warning) {
        eprintln!("{}", json!({"warning": d}));
    }
    let art = run(&cfg)?;
    let text = render(&cfg, &art)?;
    match &cfg.out {
        None => print!("{text}"),
        Some(path) => {
            write(path, &text)?;
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            let sidecar = json!({
                "timestamp_unix": stamp,
                "config_hash": cfg.hash(),
                "seed": cfg.seed_or_default(),
                "workers": cfg.workers,
                "version": env!("CARGO_PKG_VERSION"),
            });
            let mut side = path.clone().into_os_string();
            side.push(".run.json");
            write(&PathBuf::from(side), &format!("{sidecar:#}\n"))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (sub, common) = match Cli::parse() {
        Cli::Eig(c) => (Subcommand::Eig, c),
        Cli::Converge(c) => (Subcommand::Converge, c),
        Cli::Count(c) => (Subcommand::Count, c),
        Cli::Anneal(c) => (Subcommand::Anneal, c),
        Cli::Psi(c) => (Subcommand::Psi, c),
    };
    match execute(sub, &common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
