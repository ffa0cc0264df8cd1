//! Dispatch of a validated config to the library, producing one artifact.
use krein::analytic::{psi, psi_series};
use krein::bracketing::bracket_report;
use krein::disorder::{annealed_counting_with, AnnealSpec, DisorderVariant, DEFAULT_EPSILON};
use krein::registry::{MethodRegistry, ModelRegistry};
use krein::{count_leq, KreinString};
use serde_json::{json, Value};

use crate::config::{validate, ExperimentConfig, Format, Severity, Subcommand};
use crate::error::CliError;

/// A table plus its JSON form, before provenance is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# key: value` lines for the CSV header.
    pub notes: Vec<(String, String)>,
    pub json: Value,
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Validates, then runs on a pool of `workers` threads (all cores if unset).
pub fn run(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let diags = validate(cfg);
    if diags.iter().any(|d| d.severity == Severity::Error) {
        return Err(CliError::Invalid(diags));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Config {
        field: "workers".into(),
        message: e.to_string(),
    })?;
    pool.install(|| dispatch(cfg))
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    match cfg.subcommand.expect("validated") {
        Subcommand::Eig => eig(cfg),
        Subcommand::Converge => converge(cfg),
        Subcommand::Count => count(cfg),
        Subcommand::Anneal => anneal(cfg),
        Subcommand::Psi => psi_table(cfg),
    }
}

fn build(cfg: &ExperimentConfig, n: usize) -> Result<KreinString, CliError> {
    let models = ModelRegistry::with_defaults();
    Ok(models.get(cfg.model_name())?.build(&cfg.model_params(), n)?)
}

fn lowest(cfg: &ExperimentConfig, s: &KreinString, k: Option<usize>) -> Result<Vec<f64>, CliError> {
    let methods = MethodRegistry::with_defaults();
    let method = methods.get(cfg.solver_name())?;
    let dim = s.len();
    Ok(method.eigenvalues(s, cfg.bc_or_default(), k.unwrap_or(dim).max(1), cfg.tol_or_default())?)
}

fn eig(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let n = cfg.n.unwrap_or(0);
    let s = build(cfg, n)?;
    let models = ModelRegistry::with_defaults();
    let scale = models.get(cfg.model_name())?.eigen_scale(&cfg.model_params(), n);
    let lambdas = lowest(cfg, &s, cfg.k)?;
    let rows = lambdas
        .iter()
        .enumerate()
        .map(|(i, l)| vec![(i + 1).to_string(), num(*l), num(scale * l)])
        .collect();
    let scaled: Vec<f64> = lambdas.iter().map(|l| scale * l).collect();
    Ok(Artifact {
        columns: vec!["k", "lambda", "scaled_lambda"],
        rows,
        notes: vec![],
        json: json!({
            "bc": cfg.bc_or_default().as_str(),
            "solver": cfg.solver_name(),
            "eigenvalues": lambdas,
            "scaled_eigenvalues": scaled,
        }),
    })
}

fn converge(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let models = ModelRegistry::with_defaults();
    let model = models.get(cfg.model_name())?;
    let params = cfg.model_params();
    let k = cfg.k.unwrap_or(3);
    let limit = model.limit_eigenvalues(&params, k)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &n in cfg.ns.as_deref().unwrap_or_default() {
        let s = build(cfg, n)?;
        let scale = model.eigen_scale(&params, n);
        let lambdas = lowest(cfg, &s, Some(k))?;
        for (i, l) in lambdas.iter().enumerate() {
            let target = limit.as_ref().and_then(|v| v.get(i)).copied();
            rows.push(vec![
                n.to_string(),
                (i + 1).to_string(),
                num(*l),
                num(scale * l),
                target.map(num).unwrap_or_default(),
                target.map(|t| num((scale * l - t).abs())).unwrap_or_default(),
            ]);
        }
        points.push(json!({"n": n, "eigenvalues": lambdas, "scaled": lambdas.iter().map(|l| scale * l).collect::<Vec<_>>()}));
    }
    Ok(Artifact {
        columns: vec!["n", "k", "lambda", "scaled_lambda", "limit", "abs_gap"],
        rows,
        notes: vec![],
        json: json!({"limit": limit, "points": points}),
    })
}

fn count(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let s = build(cfg, cfg.n.unwrap_or(0))?;
    let xs = cfg.thresholds().unwrap_or_default();
    if let Some(cuts) = &cfg.cuts {
        let report = bracket_report(&s, cuts, &xs)?;
        let rows = report
            .rows
            .iter()
            .map(|r| {
                vec![
                    num(r.x),
                    r.n_d.to_string(),
                    r.n_n.to_string(),
                    r.cell_sum_d.to_string(),
                    r.cell_sum_n.to_string(),
                    r.ok_dn.to_string(),
                    r.ok_super.to_string(),
                    r.ok_sub.to_string(),
                    r.ok_crude.to_string(),
                ]
            })
            .collect();
        let json = serde_json::to_value(&report).map_err(krein::KreinError::from)?;
        return Ok(Artifact {
            columns: vec!["x", "N_D", "N_N", "cell_sum_d", "cell_sum_n", "ok_dn", "ok_super", "ok_sub", "ok_crude"],
            rows,
            notes: vec![("violations".into(), report.violations.len().to_string())],
            json,
        });
    }
    let bc = cfg.bc_or_default();
    let counts = xs.iter().map(|x| count_leq(&s, bc, *x)).collect::<krein::Result<Vec<_>>>()?;
    Ok(Artifact {
        columns: vec!["x", "count"],
        rows: xs.iter().zip(&counts).map(|(x, c)| vec![num(*x), c.to_string()]).collect(),
        notes: vec![],
        json: json!({"bc": bc.as_str(), "x": xs, "count": counts}),
    })
}

fn anneal(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let variant = match cfg.model_name() {
        "barrier" => DisorderVariant::Barrier,
        _ => DisorderVariant::Trap,
    };
    let curve = annealed_counting_with(&AnnealSpec {
        alpha: cfg.alpha.unwrap_or_default(),
        x_grid: cfg.thresholds().unwrap_or_default(),
        samples: cfg.samples.unwrap_or(200),
        n_atoms_cap: cfg.n_atoms_cap.unwrap_or(1_000_000),
        epsilon: cfg.epsilon.unwrap_or(DEFAULT_EPSILON),
        seed: cfg.seed_or_default(),
        mode: cfg.mode.unwrap_or_default(),
        variant,
    })?;
    let rows = (0..curve.x.len())
        .map(|i| vec![num(curve.x[i]), num(curve.mean[i]), num(curve.stderr[i])])
        .collect();
    let notes = vec![
        ("slope".into(), num(curve.slope)),
        ("slope_ci".into(), num(curve.slope_ci)),
        ("expected_slope".into(), num(curve.expected_slope)),
        ("resampled".into(), curve.resampled.to_string()),
    ];
    let json = serde_json::to_value(&curve).map_err(krein::KreinError::from)?;
    Ok(Artifact { columns: vec!["x", "mean", "stderr"], rows, notes, json })
}

fn psi_table(cfg: &ExperimentConfig) -> Result<Artifact, CliError> {
    let s = build(cfg, cfg.n.unwrap_or(0))?;
    let lambdas = cfg.lambda.clone().unwrap_or_default();
    let mut columns = vec!["lambda", "psi", "dpsi"];
    if cfg.j_max.is_some() {
        columns.extend(["series", "tail_bound", "unreliable"]);
    }
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for &l in &lambdas {
        let (v, dv) = psi(&s, l);
        let mut row = vec![num(l), num(v), num(dv)];
        let mut entry = json!({"lambda": l, "psi": v, "dpsi": dv});
        if let Some(j) = cfg.j_max {
            let sv = psi_series(&s, s.right(), l, j)?;
            row.extend([num(sv.value), num(sv.tail_bound), sv.unreliable.to_string()]);
            entry["series"] = json!(sv.value);
            entry["tail_bound"] = json!(sv.tail_bound);
            entry["unreliable"] = json!(sv.unreliable);
        }
        rows.push(row);
        entries.push(entry);
    }
    Ok(Artifact { columns, rows, notes: vec![], json: json!({"values": entries}) })
}

/// Provenance written with every artifact.
pub fn metadata(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    vec![
        ("version".into(), format!("krein {}", env!("CARGO_PKG_VERSION"))),
        ("subcommand".into(), cfg.subcommand.map(|s| s.as_str()).unwrap_or("").into()),
        ("model".into(), cfg.model_name().into()),
        ("config_hash".into(), cfg.hash()),
        ("seed".into(), cfg.seed_or_default().to_string()),
    ]
}

/// The output file content. Byte-identical for equal configs.
pub fn render(cfg: &ExperimentConfig, art: &Artifact) -> Result<String, CliError> {
    let meta = metadata(cfg);
    match cfg.format.unwrap_or_default() {
        Format::Csv => {
            let mut out = String::new();
            for (k, v) in meta.iter().chain(&art.notes) {
                out.push_str(&format!("# {k}: {v}\n"));
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&art.columns).map_err(krein::KreinError::from)?;
            for r in &art.rows {
                w.write_record(r).map_err(krein::KreinError::from)?;
            }
            let bytes = w.into_inner().map_err(|e| krein::KreinError::Serialization(e.to_string()))?;
            out.push_str(&String::from_utf8(bytes).expect("csv is utf-8"));
            Ok(out)
        }
        Format::Json => {
            let meta: serde_json::Map<String, Value> =
                meta.into_iter().map(|(k, v)| (k, Value::String(v))).collect();
            let doc = json!({"meta": meta, "result": art.json});
            let mut text = serde_json::to_string_pretty(&doc).map_err(krein::KreinError::from)?;
            text.push('\n');
            Ok(text)
        }
    }
}
