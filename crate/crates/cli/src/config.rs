//! Experiment configuration: JSON file plus flag overrides, and validation.
use std::path::PathBuf;

use krein::disorder::CompensationMode;
use krein::registry::{MethodRegistry, ModelParams, ModelRegistry};
use krein::{BoundaryCondition, KreinString, RateField};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Eig,
    Converge,
    Count,
    Anneal,
    Psi,
}

impl Subcommand {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Eig => "eig",
            Subcommand::Converge => "converge",
            Subcommand::Count => "count",
            Subcommand::Anneal => "anneal",
            Subcommand::Psi => "psi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Log-spaced grid `points` values from `min` to `max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

/// Everything a run depends on. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: Option<Subcommand>,
    pub model: Option<String>,
    /// Lattice size for `eig`, `count` and `psi`.
    pub n: Option<usize>,
    /// Lattice sizes for `converge`.
    pub ns: Option<Vec<usize>>,
    /// Number of eigenvalues; all of them when absent (`eig` only).
    pub k: Option<usize>,
    pub bc: Option<BoundaryCondition>,
    /// Explicit thresholds for `count` and `anneal`.
    pub x: Option<Vec<f64>>,
    pub x_grid: Option<GridSpec>,
    /// Partition points; `count` then reports bracketing rows.
    pub cuts: Option<Vec<f64>>,
    /// Spectral parameters for `psi`.
    pub lambda: Option<Vec<f64>>,
    /// Adds the truncated series and its tail bound to `psi`.
    pub j_max: Option<usize>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub mode: Option<CompensationMode>,
    pub string: Option<KreinString>,
    pub rates: Option<RateField>,
    pub gauge: Option<f64>,
    pub samples: Option<usize>,
    pub n_atoms_cap: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub solver: Option<String>,
    pub workers: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn error(field: &str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, field: field.into(), message: message.into() }
    }
    fn warning(field: &str, message: impl Into<String>) -> Self {
        Self { severity: Severity::Warning, field: field.into(), message: message.into() }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            let message = e.to_string();
            // serde names the offending key between backticks.
            let field = message.split('`').nth(1).unwrap_or("config").to_string();
            CliError::Config { field, message }
        })
    }

    pub fn model_name(&self) -> &str {
        self.model.as_deref().unwrap_or(match self.subcommand {
            Some(Subcommand::Anneal) => "trap",
            _ => "ssrw",
        })
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn solver_name(&self) -> &str {
        self.solver.as_deref().unwrap_or("sturm")
    }

    pub fn bc_or_default(&self) -> BoundaryCondition {
        self.bc.unwrap_or(BoundaryCondition::Dirichlet)
    }

    pub fn tol_or_default(&self) -> f64 {
        self.tol.unwrap_or(krein::eigensolver::DEFAULT_TOL)
    }

    pub fn model_params(&self) -> ModelParams {
        ModelParams {
            alpha: self.alpha,
            epsilon: self.epsilon,
            seed: Some(self.seed_or_default()),
            mode: self.mode,
            string: self.string.clone(),
            rates: self.rates.clone(),
            gauge: self.gauge,
        }
    }

    /// Thresholds from `x`, else from `x_grid`.
    pub fn thresholds(&self) -> Option<Vec<f64>> {
        self.x.clone().or_else(|| {
            self.x_grid
                .as_ref()
                .map(|g| krein::numeric::log_grid(g.min, g.max, g.points))
        })
    }

    /// SHA-256 of the canonical JSON of the config with the seed filled in.
    /// `out` and `workers` are left out: they do not change any output byte.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.seed = Some(self.seed_or_default());
        canon.out = None;
        canon.workers = None;
        let text = serde_json::to_string(&canon).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn positive_finite(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

/// Problems with `cfg`. It can run iff no entry has `Severity::Error`;
/// a fully specified valid config gives an empty list.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    let Some(sub) = cfg.subcommand else {
        d.push(Diagnostic::error("subcommand", "no subcommand given"));
        return d;
    };
    if cfg.seed.is_none() {
        d.push(Diagnostic::warning("seed", format!("seed not set; using default {DEFAULT_SEED}")));
    }
    let models = ModelRegistry::with_defaults();
    let model = match models.get(cfg.model_name()) {
        Ok(m) => Some(m),
        Err(_) => {
            d.push(Diagnostic::error(
                "model",
                format!("unknown model {:?}; known: {:?}", cfg.model_name(), models.names()),
            ));
            None
        }
    };
    let methods = MethodRegistry::with_defaults();
    if methods.get(cfg.solver_name()).is_err() {
        d.push(Diagnostic::error(
            "solver",
            format!("unknown solver {:?}; known: {:?}", cfg.solver_name(), methods.names()),
        ));
    }
    let needs_alpha = matches!(cfg.model_name(), "trap" | "barrier") || sub == Subcommand::Anneal;
    match cfg.alpha {
        Some(a) if !(a > 0.0 && a < 1.0) => {
            d.push(Diagnostic::error("alpha", format!("alpha must lie in (0, 1), got {a}")))
        }
        None if needs_alpha => d.push(Diagnostic::error("alpha", "alpha is required for this model")),
        _ => {}
    }
    if let Some(e) = cfg.epsilon {
        if !(e > 0.0 && e < 1.0) {
            d.push(Diagnostic::error("epsilon", format!("epsilon must lie in (0, 1), got {e}")));
        }
    }
    if let Some(g) = cfg.gauge {
        if !positive_finite(g) {
            d.push(Diagnostic::error("gauge", format!("gauge must be positive, got {g}")));
        }
    }
    if let Some(t) = cfg.tol {
        if !(t > 0.0 && t <= 1e-3) {
            d.push(Diagnostic::error("tol", format!("tol must lie in (0, 1e-3], got {t}")));
        }
    }
    if cfg.workers == Some(0) {
        d.push(Diagnostic::error("workers", "workers must be >= 1"));
    }
    if cfg.k == Some(0) {
        d.push(Diagnostic::error("k", "k must be >= 1"));
    }
    if cfg.model_name() == "explicit-string" && cfg.string.is_none() {
        d.push(Diagnostic::error("string", "explicit-string model needs `string`"));
    }
    if cfg.model_name() == "explicit-rates" && cfg.rates.is_none() {
        d.push(Diagnostic::error("rates", "explicit-rates model needs `rates`"));
    }
    let uses_n = model.map(|m| m.uses_n()).unwrap_or(true);
    let check_n = |d: &mut Vec<Diagnostic>| match cfg.n {
        Some(n) if n < 2 => d.push(Diagnostic::error("n", format!("n must be >= 2, got {n}"))),
        None if uses_n => d.push(Diagnostic::error("n", "n is required for this model")),
        _ => {}
    };
    let check_x = |d: &mut Vec<Diagnostic>, strict: bool| {
        if let Some(g) = &cfg.x_grid {
            if !(positive_finite(g.min) && positive_finite(g.max) && g.max > g.min && g.points >= 2) {
                d.push(Diagnostic::error("x_grid", "need 0 < min < max and points >= 2"));
            }
        }
        match &cfg.x {
            Some(xs) if xs.is_empty() => d.push(Diagnostic::error("x", "x must be non-empty")),
            Some(xs) if xs.iter().any(|x| !(x.is_finite() && (*x > 0.0 || (!strict && *x == 0.0)))) => {
                let bound = if strict { "> 0" } else { ">= 0" };
                d.push(Diagnostic::error("x", format!("every x must be finite and {bound}")))
            }
            None if cfg.x_grid.is_none() => d.push(Diagnostic::error("x", "give `x` or `x_grid`")),
            _ => {}
        }
    };
    match sub {
        Subcommand::Eig => check_n(&mut d),
        Subcommand::Psi => {
            check_n(&mut d);
            match &cfg.lambda {
                None => d.push(Diagnostic::error("lambda", "lambda values are required")),
                Some(ls) if ls.is_empty() || ls.iter().any(|l| !l.is_finite()) => {
                    d.push(Diagnostic::error("lambda", "lambda must be non-empty and finite"))
                }
                _ => {}
            }
        }
        Subcommand::Count => {
            check_n(&mut d);
            check_x(&mut d, false);
        }
        Subcommand::Converge => {
            if !uses_n {
                d.push(Diagnostic::error("model", "converge needs a model indexed by n"));
            }
            match &cfg.ns {
                None => d.push(Diagnostic::error("ns", "ns is required")),
                Some(ns) if ns.is_empty() => d.push(Diagnostic::error("ns", "ns must be non-empty")),
                Some(ns) if ns.iter().any(|n| *n < 2) => {
                    d.push(Diagnostic::error("ns", "every n must be >= 2"))
                }
                _ => {}
            }
        }
        Subcommand::Anneal => {
            if !matches!(cfg.model_name(), "trap" | "barrier") {
                d.push(Diagnostic::error("model", "anneal supports the trap and barrier models"));
            }
            check_x(&mut d, true);
            if let Some(s) = cfg.samples {
                if s < 30 {
                    d.push(Diagnostic::error("samples", format!("samples must be >= 30, got {s}")));
                }
            }
        }
    }
    d
}
