//! α-stable subordinators, the trap and barrier strings they couple to, and
//! Monte Carlo estimates over the disorder.
//!
//! Paths are drawn from ChaCha8 seeded with `seed` and switched to stream
//! `path_index`, so every path depends only on `(seed, index)` and results do
//! not depend on the number of worker threads.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::eigensolver::{
    assemble_pencil, eigenvalues, eigenvalues_only, BoundaryCondition, DEFAULT_TOL,
};
use crate::error::{KreinError, Result};
use crate::numeric::{linear_fit, CompensatedSum};
use crate::stats::mean_stderr;
use crate::string::{generalized_inverse, Atom, Jump, KreinString};
use crate::walk_model::{decompose_rates, RateField};

/// Micro-atoms per unit length in grid-compensate mode.
pub const COMPENSATION_GRID: usize = 1000;

/// Default jump cutoff.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CompensationMode {
    /// Jumps below the cutoff are dropped.
    #[default]
    Truncate,
    /// The expected mass of the dropped jumps is spread over a uniform grid.
    GridCompensate,
}

impl std::str::FromStr for CompensationMode {
    type Err = KreinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncate" => Ok(Self::Truncate),
            "grid-compensate" => Ok(Self::GridCompensate),
            other => Err(KreinError::Domain(format!("unknown compensation mode {other:?}"))),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(KreinError::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Lévy density constant `c = α / Γ(1 - α)`, for which `E e^{-λ V(t)} = e^{-t λ^α}`.
pub fn stable_constant(alpha: f64) -> f64 {
    alpha / gamma(1.0 - alpha)
}

/// Expected number of jumps of size `≥ ε` in `(0, T]`.
pub fn expected_jump_count(alpha: f64, horizon: f64, epsilon: f64) -> f64 {
    horizon * stable_constant(alpha) * epsilon.powf(-alpha) / alpha
}

/// Expected mass per unit length of the jumps below `ε`.
pub fn truncated_mass_rate(alpha: f64, epsilon: f64) -> f64 {
    stable_constant(alpha) * epsilon.powf(1.0 - alpha) / (1.0 - alpha)
}

/// A sampled subordinator on `(0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorPath {
    pub alpha: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub mode: CompensationMode,
    pub seed: u64,
    pub stream: u64,
    /// Jumps of size `≥ ε`, strictly increasing in position.
    pub jumps: Vec<Jump>,
    /// Weight of each compensating micro-atom (zero when truncating).
    pub micro_weight: f64,
}

impl SubordinatorPath {
    /// A path with prescribed jumps, for hand-checked constructions.
    pub fn from_jumps(alpha: f64, horizon: f64, mut jumps: Vec<Jump>) -> Result<Self> {
        check_alpha(alpha)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(KreinError::Domain(format!("horizon must be > 0, got {horizon}")));
        }
        jumps.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        for (i, j) in jumps.iter().enumerate() {
            if !(j.pos > 0.0 && j.pos <= horizon && j.size > 0.0 && j.size.is_finite()) {
                return Err(KreinError::Domain(format!("jump {i} ({}, {}) is invalid", j.pos, j.size)));
            }
            if i > 0 && j.pos == jumps[i - 1].pos {
                return Err(KreinError::Domain(format!("two jumps at {}", j.pos)));
            }
        }
        let epsilon = jumps.iter().map(|j| j.size).fold(f64::INFINITY, f64::min);
        Ok(Self {
            alpha,
            horizon,
            epsilon: if epsilon.is_finite() { epsilon } else { 1.0 },
            mode: CompensationMode::Truncate,
            seed: 0,
            stream: 0,
            jumps,
            micro_weight: 0.0,
        })
    }

    /// Compensating micro-atoms at `(j - ½) / 1000`, inside `(0, T]`.
    pub fn micro_atoms(&self) -> Vec<Jump> {
        if self.micro_weight <= 0.0 {
            return Vec::new();
        }
        let h = 1.0 / COMPENSATION_GRID as f64;
        (1..)
            .map(|j| (j as f64 - 0.5) * h)
            .take_while(|p| *p <= self.horizon)
            .map(|p| Jump::new(p, self.micro_weight))
            .collect()
    }

    /// Every point mass of `dV` (jumps and micro-atoms), sorted, with
    /// coincident positions merged.
    pub fn mass_points(&self) -> Vec<Jump> {
        let micro = self.micro_atoms();
        if micro.is_empty() {
            return self.jumps.clone();
        }
        let mut all: Vec<Jump> = self.jumps.iter().copied().chain(micro).collect();
        all.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        let mut merged: Vec<Jump> = Vec::with_capacity(all.len());
        for j in all {
            match merged.last_mut() {
                Some(last) if last.pos == j.pos => last.size += j.size,
                _ => merged.push(j),
            }
        }
        merged
    }

    /// `V(t) = Σ_{u ≤ t} w`, with `V(0) = 0`.
    pub fn value(&self, t: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        for j in self.jumps.iter().take_while(|j| j.pos <= t) {
            acc.add(j.size);
        }
        if self.micro_weight > 0.0 && t > 0.0 {
            let h = 1.0 / COMPENSATION_GRID as f64;
            let count = ((t.min(self.horizon) / h) + 0.5).floor().max(0.0);
            acc.add(count * self.micro_weight);
        }
        acc.value()
    }

    /// Increments `V((k+1)/n) - V(k/n)` for `k = 0..bins`.
    fn increments(&self, n: usize, bins: usize) -> Vec<f64> {
        let nf = n as f64;
        let mut sums = vec![CompensatedSum::new(); bins];
        for j in self.mass_points() {
            let mut k = ((j.pos * nf).ceil() as i64 - 1).max(0) as usize;
            while k > 0 && k as f64 / nf >= j.pos {
                k -= 1;
            }
            while ((k + 1) as f64) / nf < j.pos {
                k += 1;
            }
            if k < bins {
                sums[k].add(j.size);
            }
        }
        sums.iter().map(CompensatedSum::value).collect()
    }
}

fn path_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Jump sizes `ε U^{-1/α}` with `U` uniform on `(0, 1]`.
fn pareto<R: Rng + ?Sized>(rng: &mut R, alpha: f64, epsilon: f64) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    epsilon * u.powf(-1.0 / alpha)
}

fn poisson_count<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> Result<u64> {
    let p = Poisson::new(mean)
        .map_err(|e| KreinError::Domain(format!("Poisson mean {mean}: {e}")))?;
    Ok(p.sample(rng) as u64)
}

fn check_sampling(alpha: f64, horizon: f64, epsilon: f64) -> Result<()> {
    check_alpha(alpha)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(KreinError::Domain(format!("horizon must be > 0, got {horizon}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(KreinError::Domain(format!("epsilon must be > 0, got {epsilon}")));
    }
    Ok(())
}

/// Samples a path on `(0, T]` from stream 0 of `seed`.
pub fn sample_subordinator(
    alpha: f64,
    horizon: f64,
    epsilon: f64,
    seed: u64,
    mode: CompensationMode,
) -> Result<SubordinatorPath> {
    sample_subordinator_stream(alpha, horizon, epsilon, seed, 0, mode)
}

/// Samples a path from stream `stream` of `seed`.
pub fn sample_subordinator_stream(
    alpha: f64,
    horizon: f64,
    epsilon: f64,
    seed: u64,
    stream: u64,
    mode: CompensationMode,
) -> Result<SubordinatorPath> {
    check_sampling(alpha, horizon, epsilon)?;
    let mut rng = path_rng(seed, stream);
    let count = poisson_count(&mut rng, expected_jump_count(alpha, horizon, epsilon))?;
    let mut jumps: Vec<Jump> = (0..count)
        .map(|_| {
            let size = pareto(&mut rng, alpha, epsilon);
            let pos = horizon * (1.0 - rng.random::<f64>());
            Jump::new(pos, size)
        })
        .collect();
    jumps.sort_by(|a, b| a.pos.total_cmp(&b.pos));
    let mut merged: Vec<Jump> = Vec::with_capacity(jumps.len());
    for j in jumps {
        match merged.last_mut() {
            Some(last) if last.pos == j.pos => last.size += j.size,
            _ => merged.push(j),
        }
    }
    let micro_weight = match mode {
        CompensationMode::Truncate => 0.0,
        CompensationMode::GridCompensate => {
            truncated_mass_rate(alpha, epsilon) / COMPENSATION_GRID as f64
        }
    };
    Ok(SubordinatorPath {
        alpha,
        horizon,
        epsilon,
        mode,
        seed,
        stream,
        jumps: merged,
        micro_weight,
    })
}

/// `V(t)` alone, without storing positions.
pub fn sample_value<R: Rng + ?Sized>(
    rng: &mut R,
    alpha: f64,
    t: f64,
    epsilon: f64,
) -> Result<f64> {
    check_sampling(alpha, t, epsilon)?;
    let count = poisson_count(rng, expected_jump_count(alpha, t, epsilon))?;
    let mut acc = CompensatedSum::new();
    for _ in 0..count {
        acc.add(pareto(rng, alpha, epsilon));
    }
    Ok(acc.value())
}

/// Trap string: atoms at `k/n`, `k = 0..=n`, with weights
/// `V((k+1)/n) - V(k/n)` (zero weights dropped), on `[0, 1]`.
pub fn trap_string(path: &SubordinatorPath, n: usize) -> Result<KreinString> {
    if n < 2 {
        return Err(KreinError::Domain(format!("n must be >= 2, got {n}")));
    }
    let need = (n + 1) as f64 / n as f64;
    if path.horizon < need {
        return Err(KreinError::Contract(format!(
            "path horizon {} shorter than {need}",
            path.horizon
        )));
    }
    let atoms = path
        .increments(n, n + 1)
        .into_iter()
        .enumerate()
        .filter(|(_, w)| *w > 0.0)
        .map(|(k, w)| Atom::new(k as f64 / n as f64, w))
        .collect();
    KreinString::new(0.0, 1.0, atoms)
}

/// Barrier string: atoms of weight `1/n` at `V(k/n)`, `k = 1..=n+1`
/// (coincident ones merged), on `[0, V((n+1)/n)]`.
pub fn barrier_string(path: &SubordinatorPath, n: usize) -> Result<KreinString> {
    if n < 2 {
        return Err(KreinError::Domain(format!("n must be >= 2, got {n}")));
    }
    let need = (n + 1) as f64 / n as f64;
    if path.horizon < need {
        return Err(KreinError::Contract(format!(
            "path horizon {} shorter than {need}",
            path.horizon
        )));
    }
    let inc = path.increments(n, n + 1);
    let mut acc = CompensatedSum::new();
    let mut atoms = Vec::with_capacity(n + 1);
    for w in inc {
        acc.add(w);
        atoms.push(Atom::new(acc.value(), 1.0 / n as f64));
    }
    let right = acc.value();
    if !(right > 0.0) {
        return Err(KreinError::Degenerate("path has no mass up to (n+1)/n".into()));
    }
    KreinString::from_unsorted_merging(0.0, right, atoms)
}

fn unit_interval_points(path: &SubordinatorPath) -> Result<Vec<Jump>> {
    if path.horizon < 1.0 {
        return Err(KreinError::Contract(format!(
            "path horizon {} shorter than 1",
            path.horizon
        )));
    }
    Ok(path
        .mass_points()
        .into_iter()
        .filter(|j| j.pos > 0.0 && j.pos < 1.0)
        .collect())
}

/// The jumps of `V` inside `(0, 1)` as a string on `[0, 1]`.
pub fn limit_trap_string(path: &SubordinatorPath) -> Result<KreinString> {
    let pts = unit_interval_points(path)?;
    if pts.is_empty() {
        return Err(KreinError::Degenerate("no jumps in (0, 1)".into()));
    }
    KreinString::new(0.0, 1.0, pts.into_iter().map(|j| Atom::new(j.pos, j.size)).collect())
}

/// String of `dV^{-1}` for `V` restricted to `(0, 1)`, on `[0, V(1)]`.
pub fn limit_barrier_string(path: &SubordinatorPath) -> Result<KreinString> {
    generalized_inverse(&unit_interval_points(path)?, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DisorderVariant {
    #[default]
    Trap,
    Barrier,
}

impl DisorderVariant {
    pub fn limit_string(self, path: &SubordinatorPath) -> Result<KreinString> {
        match self {
            DisorderVariant::Trap => limit_trap_string(path),
            DisorderVariant::Barrier => limit_barrier_string(path),
        }
    }

    pub fn discrete_string(self, path: &SubordinatorPath, n: usize) -> Result<KreinString> {
        match self {
            DisorderVariant::Trap => trap_string(path, n),
            DisorderVariant::Barrier => barrier_string(path, n),
        }
    }
}

/// Annealed counting function with its fitted power law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingCurve {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
    /// Paths redrawn because they had no jumps in `(0, 1)`.
    pub resampled: usize,
    pub slope: f64,
    /// Half-width of the 95% interval on the slope.
    pub slope_ci: f64,
    pub expected_slope: f64,
}

#[derive(Serialize)]
struct CurveSummary {
    slope: f64,
    slope_ci: f64,
    expected_slope: f64,
}

impl CountingCurve {
    /// Columns `x,mean,stderr`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "mean", "stderr"])?;
        for i in 0..self.x.len() {
            w.write_record([
                format!("{:?}", self.x[i]),
                format!("{:?}", self.mean[i]),
                format!("{:?}", self.stderr[i]),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| KreinError::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| KreinError::Serialization(e.to_string()))
    }

    /// `{"slope", "slope_ci", "expected_slope"}`.
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CurveSummary {
            slope: self.slope,
            slope_ci: self.slope_ci,
            expected_slope: self.expected_slope,
        })?)
    }
}

/// Everything that determines an annealed counting estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSpec {
    pub alpha: f64,
    pub x_grid: Vec<f64>,
    pub samples: usize,
    /// Refuse to run when the expected atom count per path exceeds this.
    pub n_atoms_cap: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub mode: CompensationMode,
    pub variant: DisorderVariant,
}

/// Trap-variant annealed counting in truncate mode.
pub fn annealed_counting(
    alpha: f64,
    x_grid: &[f64],
    samples: usize,
    n_atoms_cap: usize,
    epsilon: f64,
    seed: u64,
) -> Result<CountingCurve> {
    annealed_counting_with(&AnnealSpec {
        alpha,
        x_grid: x_grid.to_vec(),
        samples,
        n_atoms_cap,
        epsilon,
        seed,
        mode: CompensationMode::Truncate,
        variant: DisorderVariant::Trap,
    })
}

/// `E N_D(x)` on the limit string of the chosen variant, over i.i.d. paths.
pub fn annealed_counting_with(spec: &AnnealSpec) -> Result<CountingCurve> {
    check_sampling(spec.alpha, 1.0, spec.epsilon)?;
    if spec.samples < 30 {
        return Err(KreinError::Domain(format!(
            "samples must be >= 30, got {}",
            spec.samples
        )));
    }
    if spec.x_grid.is_empty() || spec.x_grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(KreinError::Domain("x grid must be non-empty and positive".into()));
    }
    let expected = expected_jump_count(spec.alpha, 1.0, spec.epsilon);
    if expected > spec.n_atoms_cap as f64 {
        return Err(KreinError::Contract(format!(
            "expected {expected:.0} atoms per path exceeds the cap {}",
            spec.n_atoms_cap
        )));
    }
    let mut xs = spec.x_grid.clone();
    xs.sort_by(f64::total_cmp);
    let samples = spec.samples as u64;
    let per_path: Vec<(Vec<usize>, usize)> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<(Vec<usize>, usize)> {
            let mut redraws = 0;
            loop {
                let stream = i + redraws as u64 * (samples + (1u64 << 32));
                let path = sample_subordinator_stream(
                    spec.alpha, 1.0, spec.epsilon, spec.seed, stream, spec.mode,
                )?;
                match spec.variant.limit_string(&path) {
                    Ok(s) => {
                        let counts = match assemble_pencil(&s, BoundaryCondition::Dirichlet) {
                            Ok(p) => xs.iter().map(|&x| p.count_leq(x)).collect(),
                            Err(KreinError::Degenerate(_)) => vec![0; xs.len()],
                            Err(e) => return Err(e),
                        };
                        return Ok((counts, redraws));
                    }
                    Err(KreinError::Degenerate(_)) => redraws += 1,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let resampled = per_path.iter().map(|(_, r)| r).sum();
    let mut mean = Vec::with_capacity(xs.len());
    let mut stderr = Vec::with_capacity(xs.len());
    for j in 0..xs.len() {
        let col: Vec<f64> = per_path.iter().map(|(c, _)| c[j] as f64).collect();
        let (m, s) = mean_stderr(&col);
        mean.push(m);
        stderr.push(s);
    }
    let (slope, slope_ci) = upper_half_slope(&xs, &mean);
    Ok(CountingCurve {
        x: xs,
        mean,
        stderr,
        samples: spec.samples,
        resampled,
        slope,
        slope_ci,
        expected_slope: spec.alpha / (1.0 + spec.alpha),
    })
}

/// Least-squares slope of `log mean` against `log x` over the upper half of
/// the grid, with a 95% half-width.
fn upper_half_slope(xs: &[f64], mean: &[f64]) -> (f64, f64) {
    let start = xs.len() / 2;
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs[start..]
        .iter()
        .zip(&mean[start..])
        .filter(|(_, m)| **m > 0.0)
        .map(|(x, m)| (x.ln(), m.ln()))
        .unzip();
    if lx.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let (_, slope, se) = linear_fit(&lx, &ly);
    (slope, 1.96 * se)
}

/// Maps a scaled increment `n^{1/α} ΔV` to a waiting time `τ`.
pub trait TauCoupling: Send + Sync {
    fn name(&self) -> &str;
    /// Returns `τ` and whether the lookup had to be clamped.
    fn tau(&self, scaled_increment: f64) -> (f64, bool);
    /// Cutoff to use for the paths this coupling reads.
    fn path_epsilon(&self) -> Option<f64> {
        None
    }
}

/// `τ = n^{1/α} ΔV`: the coupling for stable waiting times.
#[derive(Debug, Clone, Copy, Default)]
pub struct PureStable;

impl TauCoupling for PureStable {
    fn name(&self) -> &str {
        "pure-stable"
    }

    fn tau(&self, v: f64) -> (f64, bool) {
        (v, false)
    }
}

/// `τ = Q_τ(F̂(v))` with `F̂` the empirical CDF of a `V(1)` table and
/// `Q_τ` the quantile function of the target law.
pub struct QuantileCoupling {
    table: Vec<f64>,
    quantile: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl QuantileCoupling {
    pub fn new(table: Vec<f64>, quantile: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if table.is_empty() {
            return Err(KreinError::Domain("empty quantile table".into()));
        }
        if table.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(KreinError::Contract("quantile table must be sorted".into()));
        }
        Ok(Self {
            table,
            quantile: Box::new(quantile),
        })
    }

    /// Empirical CDF of the table, clamped to `[1/(2N), 1 - 1/(2N)]`.
    pub fn cdf(&self, v: f64) -> (f64, bool) {
        let n = self.table.len() as f64;
        let raw = self.table.partition_point(|t| *t <= v) as f64 / n;
        let (lo, hi) = (0.5 / n, 1.0 - 0.5 / n);
        (raw.clamp(lo, hi), raw < lo || raw > hi)
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

impl TauCoupling for QuantileCoupling {
    fn name(&self) -> &str {
        "quantile"
    }

    fn tau(&self, v: f64) -> (f64, bool) {
        let (p, clamped) = self.cdf(v);
        ((self.quantile)(p), clamped)
    }
}

/// Sorted sample of `V(1)` with cutoff `epsilon`, for [`QuantileCoupling`].
pub fn v1_quantile_table(alpha: f64, size: usize, epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    let mut table: Vec<f64> = (0..size as u64)
        .into_par_iter()
        .map(|i| sample_value(&mut path_rng(seed, i), alpha, 1.0, epsilon))
        .collect::<Result<_>>()?;
    table.sort_by(f64::total_cmp);
    Ok(table)
}

/// Waiting times on `Z/n ∩ [0, 1)` with the number of clamped lookups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingOutput {
    pub tau: Vec<f64>,
    pub clamped: usize,
}

/// `τ_n(k/n) = G^{-1}(n^{1/α} (V((k+1)/n) - V(k/n)))` for `k = 0..n`.
pub fn general_coupling(
    path: &SubordinatorPath,
    n: usize,
    coupling: &dyn TauCoupling,
) -> Result<CouplingOutput> {
    if n < 1 {
        return Err(KreinError::Domain("n must be >= 1".into()));
    }
    if path.horizon < 1.0 {
        return Err(KreinError::Contract("path horizon shorter than 1".into()));
    }
    let scale = (n as f64).powf(1.0 / path.alpha);
    let mut clamped = 0;
    let tau = path
        .increments(n, n)
        .into_iter()
        .map(|dv| {
            let (t, c) = coupling.tau(scale * dv);
            clamped += c as usize;
            t
        })
        .collect();
    Ok(CouplingOutput { tau, clamped })
}

/// Law of i.i.d. waiting times for the diffusive regime.
pub trait TauLaw: Send + Sync {
    fn name(&self) -> String;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    /// `E τ`, when known in closed form.
    fn mean(&self) -> Option<f64>;
    /// `E τ^{-a}`, when known in closed form.
    fn negative_moment(&self, a: f64) -> Option<f64>;
}

/// `τ ≡ value`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantTau(pub f64);

impl TauLaw for ConstantTau {
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }

    fn sample(&self, _rng: &mut dyn RngCore) -> f64 {
        self.0
    }

    fn mean(&self) -> Option<f64> {
        Some(self.0)
    }

    fn negative_moment(&self, a: f64) -> Option<f64> {
        Some(self.0.powf(-a))
    }
}

/// `τ ~ Uniform[lo, hi]`.
#[derive(Debug, Clone, Copy)]
pub struct UniformTau {
    pub lo: f64,
    pub hi: f64,
}

impl TauLaw for UniformTau {
    fn name(&self) -> String {
        format!("uniform({}, {})", self.lo, self.hi)
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }

    fn mean(&self) -> Option<f64> {
        Some(0.5 * (self.lo + self.hi))
    }

    fn negative_moment(&self, a: f64) -> Option<f64> {
        let (lo, hi) = (self.lo, self.hi);
        if a == 1.0 {
            Some((hi / lo).ln() / (hi - lo))
        } else {
            Some((hi.powf(1.0 - a) - lo.powf(1.0 - a)) / ((1.0 - a) * (hi - lo)))
        }
    }
}

/// Rescaled eigenvalues for one `k`, against the `π² k²` constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusiveRow {
    pub k: usize,
    /// `n² E(τ^{-a}) E(τ) λ_k` for trap rates `τ(x)^{a-1} τ(y)^a`.
    pub trap: f64,
    /// `n² E(τ^{-a})² E(τ) λ_k`: edge conductances are `τ(x)^a τ(y)^a`, so the
    /// effective scale picks up the negative moment once per endpoint.
    /// Equal to `trap` when `a = 0`.
    pub trap_homogenized: f64,
    /// `n² E(τ) λ_k` for barrier rates `1/τ(x ∨ y)`.
    pub barrier: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusiveTable {
    pub law: String,
    pub a: f64,
    pub n: usize,
    pub seed: u64,
    pub mean_tau: f64,
    pub negative_moment: f64,
    pub rows: Vec<DiffusiveRow>,
}

/// Lowest `k_max` rescaled Dirichlet eigenvalues of the walks on sites
/// `0..=n` with i.i.d. `τ` drawn from `law`.
pub fn diffusive_check(
    law: &dyn TauLaw,
    a: f64,
    n: usize,
    k_max: usize,
    seed: u64,
) -> Result<DiffusiveTable> {
    if !(a >= 0.0) {
        return Err(KreinError::Domain(format!("a must be >= 0, got {a}")));
    }
    if n < 2 || k_max == 0 {
        return Err(KreinError::Domain("need n >= 2 and k_max >= 1".into()));
    }
    let mut rng = path_rng(seed, 0);
    let tau: Vec<f64> = (0..=n).map(|_| law.sample(&mut rng)).collect();
    let count = tau.len() as f64;
    let mean_tau = law.mean().unwrap_or_else(|| tau.iter().sum::<f64>() / count);
    let negative_moment = law
        .negative_moment(a)
        .unwrap_or_else(|| tau.iter().map(|t| t.powf(-a)).sum::<f64>() / count);
    let trap_rates = RateField::from_fn(n, 1.0, |x, y| tau[x].powf(a - 1.0) * tau[y].powf(a))?;
    let barrier_rates = RateField::from_fn(n, 1.0, |x, y| 1.0 / tau[x.max(y)])?;
    let spectrum = |rates: &RateField| -> Result<Vec<f64>> {
        let pair = decompose_rates(rates, 1.0)?;
        let s = crate::string::build_string(&pair)?;
        eigenvalues_only(&s, BoundaryCondition::Dirichlet, Some(k_max), DEFAULT_TOL)
    };
    let trap = spectrum(&trap_rates)?;
    let barrier = spectrum(&barrier_rates)?;
    let n2 = (n as f64).powi(2);
    let rows = (0..k_max.min(trap.len()))
        .map(|i| {
            let k = i + 1;
            DiffusiveRow {
                k,
                trap: n2 * negative_moment * mean_tau * trap[i],
                trap_homogenized: n2 * negative_moment * negative_moment * mean_tau * trap[i],
                barrier: n2 * mean_tau * barrier[i],
                target: PI * PI * (k * k) as f64,
            }
        })
        .collect();
    Ok(DiffusiveTable {
        law: law.name(),
        a,
        n,
        seed,
        mean_tau,
        negative_moment,
        rows,
    })
}

/// Distance of the discrete spectrum at one `n` from the limit spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvalue_gap: Vec<f64>,
    /// Sup-norm distance of sign-aligned, `dm`-normalized eigenfunctions.
    pub function_gap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledConvergence {
    pub variant: DisorderVariant,
    pub limit: Vec<f64>,
    pub points: Vec<ConvergencePoint>,
}

/// Lowest `k_max` Dirichlet pairs of the discrete strings at each `n`
/// against those of the limit string, all driven by the same path.
pub fn coupled_convergence(
    path: &SubordinatorPath,
    variant: DisorderVariant,
    ns: &[usize],
    k_max: usize,
) -> Result<CoupledConvergence> {
    let limit_string = variant.limit_string(path)?;
    let limit = eigenvalues(&limit_string, BoundaryCondition::Dirichlet, Some(k_max), DEFAULT_TOL)?;
    let limit_fns = (0..limit.len())
        .map(|k| limit.eigenfunction(&limit_string, k))
        .collect::<Result<Vec<_>>>()?;
    let points = ns
        .iter()
        .map(|&n| -> Result<ConvergencePoint> {
            let s = variant.discrete_string(path, n)?;
            let spec = eigenvalues(&s, BoundaryCondition::Dirichlet, Some(k_max), DEFAULT_TOL)?;
            let m = spec.len().min(limit.len());
            let mut eigenvalue_gap = Vec::with_capacity(m);
            let mut function_gap = Vec::with_capacity(m);
            for k in 0..m {
                eigenvalue_gap.push((spec.eigenvalues[k] - limit.eigenvalues[k]).abs());
                let f = spec.eigenfunction(&s, k)?;
                function_gap.push(f.sup_distance(&limit_fns[k]));
            }
            Ok(ConvergencePoint {
                n,
                eigenvalues: spec.eigenvalues,
                eigenvalue_gap,
                function_gap,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CoupledConvergence {
        variant,
        limit: limit.eigenvalues,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::eigenvalues_only;

    fn pseudo(jumps: &[(f64, f64)], horizon: f64) -> SubordinatorPath {
        SubordinatorPath::from_jumps(
            0.5,
            horizon,
            jumps.iter().map(|&(p, w)| Jump::new(p, w)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn stable_constant_value() {
        assert!((stable_constant(0.5) - 0.282_094_791_773_878_1).abs() < 1e-12);
        assert!((expected_jump_count(0.5, 1.0, 1e-4) - 56.418_958_354_775_63).abs() < 1e-9);
    }

    #[test]
    fn alpha_is_checked() {
        for a in [0.0, 1.0, 1.5, -0.2, f64::NAN] {
            assert!(matches!(
                sample_subordinator(a, 1.0, 1e-3, 1, CompensationMode::Truncate),
                Err(KreinError::Domain(_))
            ));
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = sample_subordinator(0.6, 2.0, 1e-4, 99, CompensationMode::Truncate).unwrap();
        let b = sample_subordinator(0.6, 2.0, 1e-4, 99, CompensationMode::Truncate).unwrap();
        assert_eq!(a, b);
        let c = sample_subordinator_stream(0.6, 2.0, 1e-4, 99, 1, CompensationMode::Truncate).unwrap();
        assert_ne!(a.jumps, c.jumps);
        assert!(a.jumps.iter().all(|j| j.size >= 1e-4 && j.pos > 0.0 && j.pos <= 2.0));
        assert!(a.jumps.windows(2).all(|w| w[0].pos < w[1].pos));
    }

    #[test]
    fn compensation_mass() {
        let p = sample_subordinator(0.5, 2.0, 1e-4, 3, CompensationMode::GridCompensate).unwrap();
        let micro: f64 = p.micro_atoms().iter().map(|j| j.size).sum();
        let target = truncated_mass_rate(0.5, 1e-4) * 2.0;
        assert!((micro - target).abs() < 1e-12 * target.max(1.0));
        assert_eq!(p.micro_atoms().len(), 2000);
        let total: f64 = p.jumps.iter().map(|j| j.size).sum::<f64>() + micro;
        assert!((p.value(2.0) - total).abs() < 1e-12 * total);
    }

    #[test]
    fn trap_string_examples() {
        let s = trap_string(&pseudo(&[(0.5, 1.0)], 2.0), 2).unwrap();
        assert_eq!(s.atoms(), &[Atom::new(0.0, 1.0)]);
        let s = trap_string(&pseudo(&[(0.25, 1.0), (0.75, 2.0)], 2.0), 2).unwrap();
        assert_eq!(s.atoms(), &[Atom::new(0.0, 1.0), Atom::new(0.5, 2.0)]);
        assert_eq!((s.left(), s.right()), (0.0, 1.0));
        assert!(matches!(
            trap_string(&pseudo(&[(0.5, 1.0)], 1.0), 2),
            Err(KreinError::Contract(_))
        ));
    }

    #[test]
    fn barrier_string_example() {
        let p = pseudo(&[(0.25, 1.0), (0.75, 2.0)], 2.0);
        let s = barrier_string(&p, 2).unwrap();
        assert_eq!(s.atoms(), &[Atom::new(1.0, 0.5), Atom::new(3.0, 1.0)]);
        assert_eq!((s.left(), s.right()), (0.0, 3.0));
        assert_eq!(s.total_mass(), 1.5);
    }

    #[test]
    fn limit_strings() {
        let s = limit_trap_string(&pseudo(&[(0.5, 1.0)], 1.0)).unwrap();
        let l = eigenvalues_only(&s, BoundaryCondition::Dirichlet, None, DEFAULT_TOL).unwrap();
        assert!((l[0] - 4.0).abs() <= 4.0 * DEFAULT_TOL);
        let s = limit_trap_string(&pseudo(&[(1.0 / 3.0, 1.0), (2.0 / 3.0, 1.0)], 1.0)).unwrap();
        let l = eigenvalues_only(&s, BoundaryCondition::Dirichlet, None, DEFAULT_TOL).unwrap();
        assert!((l[0] - 3.0).abs() <= 3.0 * DEFAULT_TOL && (l[1] - 9.0).abs() <= 9.0 * DEFAULT_TOL);
        assert!(matches!(
            limit_trap_string(&pseudo(&[(1.0, 1.0)], 1.0)),
            Err(KreinError::Degenerate(_))
        ));
        let b = limit_barrier_string(&pseudo(&[(0.25, 1.0), (0.75, 2.0)], 1.0)).unwrap();
        assert!((b.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(b.right(), 3.0);
    }

    #[test]
    fn mass_bookkeeping_on_random_path() {
        let p = sample_subordinator(0.7, 2.0, 1e-4, 11, CompensationMode::GridCompensate).unwrap();
        let n = 64;
        let s = trap_string(&p, n).unwrap();
        let want = p.value(1.0 + 1.0 / n as f64) - p.value(0.0);
        assert!((s.total_mass() - want).abs() < 1e-12 * want);
        let b = limit_barrier_string(&p).unwrap();
        assert!((b.total_mass() - 1.0).abs() < 1e-12);
        let bs = barrier_string(&p, n).unwrap();
        assert!((bs.total_mass() - (n + 1) as f64 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn deterministic_table_lookup() {
        let c = QuantileCoupling::new(vec![1.0, 2.0], |p| 10.0 * p).unwrap();
        assert_eq!(c.tau(1.5), (5.0, false));
        assert_eq!(c.tau(0.5), (2.5, true));
        assert_eq!(c.tau(7.0), (7.5, true));
        assert!(QuantileCoupling::new(vec![2.0, 1.0], |p| p).is_err());
    }

    #[test]
    fn pure_stable_is_scaled_increment() {
        let p = pseudo(&[(0.1, 0.25), (0.6, 1.0)], 1.0);
        let out = general_coupling(&p, 4, &PureStable).unwrap();
        // n^{1/α} = 16.
        assert_eq!(out.tau, vec![4.0, 0.0, 16.0, 0.0]);
        assert_eq!(out.clamped, 0);
    }

    #[test]
    fn constant_tau_calibration() {
        let n = 64;
        let t = diffusive_check(&ConstantTau(1.0), 0.0, n, 3, 1).unwrap();
        for r in &t.rows {
            let exact = 2.0 * (n * n) as f64 * (1.0 - (PI * r.k as f64 / n as f64).cos());
            assert!((r.trap - exact).abs() < 1e-9 * exact);
            assert!((r.barrier - exact).abs() < 1e-9 * exact);
            assert!((r.trap - r.target).abs() < 1e-2 * r.target);
        }
    }

    #[test]
    fn uniform_moments() {
        let u = UniformTau { lo: 1.0, hi: 2.0 };
        assert_eq!(u.mean(), Some(1.5));
        assert!((u.negative_moment(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(u.negative_moment(0.0), Some(1.0));
    }
}
