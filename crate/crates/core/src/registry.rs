//! Named, runtime-selectable strategies: spectral methods and string models.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analytic::{dirichlet_zeros, neumann_zeros};
use crate::disorder::{sample_subordinator, CompensationMode, DisorderVariant, DEFAULT_EPSILON};
use crate::eigensolver::{assemble_pencil, eigenvalues_only, BoundaryCondition};
use crate::error::{KreinError, Result};
use crate::string::{build_string, KreinString};
use crate::walk_model::{decompose_rates, RateField};

/// A way of computing the lowest eigenvalues of a string.
pub trait SpectralMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn eigenvalues(
        &self,
        s: &KreinString,
        bc: BoundaryCondition,
        count: usize,
        tol: f64,
    ) -> Result<Vec<f64>>;
}

/// Sturm-count bisection on the tridiagonal pencil.
#[derive(Debug, Default, Clone, Copy)]
pub struct SturmBisection;

impl SpectralMethod for SturmBisection {
    fn name(&self) -> &'static str {
        "sturm"
    }

    fn description(&self) -> &'static str {
        "bisection on pivot-sign counts of K - x M"
    }

    fn eigenvalues(
        &self,
        s: &KreinString,
        bc: BoundaryCondition,
        count: usize,
        tol: f64,
    ) -> Result<Vec<f64>> {
        eigenvalues_only(s, bc, Some(count), tol)
    }
}

/// Zeros of the shooting characteristic functions.
#[derive(Debug, Default, Clone, Copy)]
pub struct ShootingZeros;

impl SpectralMethod for ShootingZeros {
    fn name(&self) -> &'static str {
        "shooting"
    }

    fn description(&self) -> &'static str {
        "zeros of psi(l, .) or of the Neumann mass integral, bracketed by Sturm counts"
    }

    fn eigenvalues(
        &self,
        s: &KreinString,
        bc: BoundaryCondition,
        count: usize,
        tol: f64,
    ) -> Result<Vec<f64>> {
        let pencil = assemble_pencil(s, bc)?;
        let count = count.min(pencil.dim());
        if count == 0 {
            return Ok(Vec::new());
        }
        // Smallest λ_max that encloses the first `count` eigenvalues.
        let mut top = pencil.upper_bound();
        let mut lo = 0.0;
        while top - lo > 1e-3 * top {
            let mid = 0.5 * (lo + top);
            if pencil.count_leq(mid) >= count {
                top = mid;
            } else {
                lo = mid;
            }
        }
        let mut zeros = match bc {
            BoundaryCondition::Dirichlet => dirichlet_zeros(s, top, tol)?,
            BoundaryCondition::Neumann => neumann_zeros(s, top, tol)?,
        };
        zeros.truncate(count);
        Ok(zeros)
    }
}

/// Name → method table.
pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Box<dyn SpectralMethod>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self {
            methods: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SturmBisection));
        r.register(Box::new(ShootingZeros));
        r
    }

    pub fn register(&mut self, m: Box<dyn SpectralMethod>) {
        self.methods.insert(m.name(), m);
    }

    pub fn get(&self, name: &str) -> Result<&dyn SpectralMethod> {
        self.methods
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| KreinError::Domain(format!("unknown solver {name:?}; known: {:?}", self.names())))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

/// Parameters shared by all models; each model reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub mode: Option<CompensationMode>,
    /// Explicit string for `explicit-string`.
    pub string: Option<KreinString>,
    /// Explicit rates for `explicit-rates`.
    pub rates: Option<RateField>,
    /// Gauge `U(1)` for `explicit-rates`.
    pub gauge: Option<f64>,
}

impl ModelParams {
    fn alpha(&self) -> Result<f64> {
        let a = self
            .alpha
            .ok_or_else(|| KreinError::Domain("model needs alpha".into()))?;
        if !(a > 0.0 && a < 1.0) {
            return Err(KreinError::Domain(format!("alpha must lie in (0, 1), got {a}")));
        }
        Ok(a)
    }
}

/// A family of strings indexed by a lattice size `n`.
pub trait StringModel: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn build(&self, p: &ModelParams, n: usize) -> Result<KreinString>;
    /// Factor turning `λ_k` of the size-`n` string into the rescaled value.
    fn eigen_scale(&self, _p: &ModelParams, _n: usize) -> f64 {
        1.0
    }
    /// Limits of the rescaled eigenvalues, when the model has them.
    fn limit_eigenvalues(&self, _p: &ModelParams, _k: usize) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }
    /// Whether `n` changes the string.
    fn uses_n(&self) -> bool {
        true
    }
}

/// Simple symmetric random walk on `{0, ..., n}` (rates ½).
#[derive(Debug, Default, Clone, Copy)]
pub struct SsrwModel;

impl StringModel for SsrwModel {
    fn name(&self) -> &'static str {
        "ssrw"
    }

    fn description(&self) -> &'static str {
        "simple symmetric random walk killed outside {1, ..., n-1}"
    }

    fn build(&self, _p: &ModelParams, n: usize) -> Result<KreinString> {
        if n < 2 {
            return Err(KreinError::Domain(format!("n must be >= 2, got {n}")));
        }
        build_string(&decompose_rates(&RateField::constant(n, 1.0, 0.5)?, 1.0)?)
    }

    fn eigen_scale(&self, _p: &ModelParams, n: usize) -> f64 {
        (n as f64).powi(2)
    }

    fn limit_eigenvalues(&self, _p: &ModelParams, k: usize) -> Result<Option<Vec<f64>>> {
        Ok(Some((1..=k).map(|j| PI * PI * (j * j) as f64 / 2.0).collect()))
    }
}

/// Trap or barrier strings coupled to one subordinator path.
#[derive(Debug, Clone, Copy)]
pub struct SubordinatorModel(pub DisorderVariant);

impl SubordinatorModel {
    fn path(&self, p: &ModelParams, horizon: f64) -> Result<crate::disorder::SubordinatorPath> {
        sample_subordinator(
            p.alpha()?,
            horizon,
            p.epsilon.unwrap_or(DEFAULT_EPSILON),
            p.seed.unwrap_or(0),
            p.mode.unwrap_or_default(),
        )
    }
}

impl StringModel for SubordinatorModel {
    fn name(&self) -> &'static str {
        match self.0 {
            DisorderVariant::Trap => "trap",
            DisorderVariant::Barrier => "barrier",
        }
    }

    fn description(&self) -> &'static str {
        match self.0 {
            DisorderVariant::Trap => "trap string of a stable subordinator path (alpha, epsilon, seed)",
            DisorderVariant::Barrier => "barrier string of a stable subordinator path (alpha, epsilon, seed)",
        }
    }

    fn build(&self, p: &ModelParams, n: usize) -> Result<KreinString> {
        self.0.discrete_string(&self.path(p, 2.0)?, n)
    }

    fn limit_eigenvalues(&self, p: &ModelParams, k: usize) -> Result<Option<Vec<f64>>> {
        let s = self.0.limit_string(&self.path(p, 2.0)?)?;
        Ok(Some(eigenvalues_only(&s, BoundaryCondition::Dirichlet, Some(k), crate::eigensolver::DEFAULT_TOL)?))
    }
}

/// A string given verbatim.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExplicitStringModel;

impl StringModel for ExplicitStringModel {
    fn name(&self) -> &'static str {
        "explicit-string"
    }

    fn description(&self) -> &'static str {
        "string given as {left, right, atoms}"
    }

    fn build(&self, p: &ModelParams, _n: usize) -> Result<KreinString> {
        p.string
            .clone()
            .ok_or_else(|| KreinError::Domain("explicit-string model needs `string`".into()))
    }

    fn uses_n(&self) -> bool {
        false
    }
}

/// A walk given by its rates.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExplicitRatesModel;

impl StringModel for ExplicitRatesModel {
    fn name(&self) -> &'static str {
        "explicit-rates"
    }

    fn description(&self) -> &'static str {
        "nearest-neighbour rates {n, step, left, right}"
    }

    fn build(&self, p: &ModelParams, _n: usize) -> Result<KreinString> {
        let rates = p
            .rates
            .as_ref()
            .ok_or_else(|| KreinError::Domain("explicit-rates model needs `rates`".into()))?;
        build_string(&decompose_rates(rates, p.gauge.unwrap_or(1.0))?)
    }

    fn uses_n(&self) -> bool {
        false
    }
}

/// Name → model table.
pub struct ModelRegistry {
    models: BTreeMap<&'static str, Box<dyn StringModel>>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            models: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SsrwModel));
        r.register(Box::new(SubordinatorModel(DisorderVariant::Trap)));
        r.register(Box::new(SubordinatorModel(DisorderVariant::Barrier)));
        r.register(Box::new(ExplicitStringModel));
        r.register(Box::new(ExplicitRatesModel));
        r
    }

    pub fn register(&mut self, m: Box<dyn StringModel>) {
        self.models.insert(m.name(), m);
    }

    pub fn get(&self, name: &str) -> Result<&dyn StringModel> {
        self.models
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| KreinError::Domain(format!("unknown model {name:?}; known: {:?}", self.names())))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.models.keys().copied().collect()
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
