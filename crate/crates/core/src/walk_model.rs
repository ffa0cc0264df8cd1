//! Nearest-neighbour jump rates and their scale/speed decomposition
//! `c(x, y) = 1 / (H(x) U(x ∨ y))`.

use serde::{Deserialize, Serialize};

use crate::error::{KreinError, Result};
use crate::numeric::compensated_sum;
use crate::string::{KreinString, PiecewiseLinearFunction};

/// Above this many sites the `U` recursion is accumulated in log space.
const LOG_SPACE_THRESHOLD: usize = 1000;

#[derive(Deserialize)]
struct RawRates {
    n: usize,
    step: f64,
    left: Vec<f64>,
    right: Vec<f64>,
}

/// Positive jump rates of a walk on the sites `0..=n`.
///
/// `left[k - 1]` is the rate `c(k, k-1)` for `k = 1..=n` and `right[k]` is
/// `c(k, k+1)` for `k = 0..n`. The two boundary entries `c(0, 1)` and
/// `c(n, n-1)` are never used by the killed generator but fix the boundary
/// speed weights `H(0)` and `H(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRates")]
pub struct RateField {
    n: usize,
    step: f64,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl TryFrom<RawRates> for RateField {
    type Error = KreinError;

    fn try_from(r: RawRates) -> Result<Self> {
        RateField::new(r.n, r.step, r.left, r.right)
    }
}

impl RateField {
    pub fn new(n: usize, step: f64, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(KreinError::Domain(format!("need n >= 2, got {n}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(KreinError::Domain(format!("step must be positive, got {step}")));
        }
        if left.len() != n || right.len() != n {
            return Err(KreinError::Domain(format!(
                "expected {n} left and {n} right rates, got {} and {}",
                left.len(),
                right.len()
            )));
        }
        for (i, &c) in left.iter().chain(&right).enumerate() {
            if !(c > 0.0 && c.is_finite()) {
                return Err(KreinError::Domain(format!("rate #{i} is not positive: {c}")));
            }
        }
        Ok(Self { n, step, left, right })
    }

    /// Same rate `c` to both neighbours at every site.
    pub fn constant(n: usize, step: f64, c: f64) -> Result<Self> {
        Self::new(n, step, vec![c; n], vec![c; n])
    }

    /// Builds the field from a rate function `c(x, y)` on integer sites.
    pub fn from_fn(n: usize, step: f64, c: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let left = (1..=n).map(|k| c(k, k - 1)).collect();
        let right = (0..n).map(|k| c(k, k + 1)).collect();
        Self::new(n, step, left, right)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `c(k, k-1)` for `k = 1..=n`.
    pub fn rate_left(&self, k: usize) -> f64 {
        self.left[k - 1]
    }

    /// `c(k, k+1)` for `k = 0..n`.
    pub fn rate_right(&self, k: usize) -> f64 {
        self.right[k]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// The functions `U` (on sites `1..=n`) and `H` (on sites `0..=n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpeedPair {
    u: Vec<f64>,
    h: Vec<f64>,
    gauge: f64,
    step: f64,
}

impl ScaleSpeedPair {
    /// `u[j-1] = U(j)` for `j = 1..=n`, `h[k] = H(k)` for `k = 0..=n`.
    pub fn new(u: Vec<f64>, h: Vec<f64>, gauge: f64, step: f64) -> Result<Self> {
        if u.len() < 2 || h.len() != u.len() + 1 {
            return Err(KreinError::Domain(format!(
                "need n >= 2 values of U and n + 1 of H (got {} and {})",
                u.len(),
                h.len()
            )));
        }
        if let Some(i) = u.iter().chain(&h).position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(KreinError::Domain(format!("entry #{i} of (U, H) is not positive")));
        }
        if !(gauge > 0.0 && step > 0.0) {
            return Err(KreinError::Domain("gauge and step must be positive".into()));
        }
        Ok(Self { u, h, gauge, step })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    /// `U(1), ..., U(n)`.
    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// `H(0), ..., H(n)`.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn gauge(&self) -> f64 {
        self.gauge
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

/// Solves `U(k+1) = U(k) c(k,k-1)/c(k,k+1)`, `H(k) = 1/(c(k,k-1) U(k))`
/// seeded with `U(1) = gauge`. The boundary weight `H(0)` comes from
/// `c(0,1) = 1/(H(0) U(1))`.
pub fn decompose_rates(rates: &RateField, gauge: f64) -> Result<ScaleSpeedPair> {
    if !(gauge > 0.0 && gauge.is_finite()) {
        return Err(KreinError::Domain(format!("gauge must be positive, got {gauge}")));
    }
    let n = rates.n();
    let mut u = Vec::with_capacity(n);
    u.push(gauge);
    if n > LOG_SPACE_THRESHOLD {
        let mut log_u = gauge.ln();
        for k in 1..n {
            log_u += rates.rate_left(k).ln() - rates.rate_right(k).ln();
            let v = log_u.exp();
            if !(v > 0.0 && v.is_finite()) {
                return Err(KreinError::NumericRange {
                    index: k + 1,
                    detail: format!("log U = {log_u} leaves the f64 range"),
                });
            }
            u.push(v);
        }
    } else {
        for k in 1..n {
            let v = u[k - 1] * rates.rate_left(k) / rates.rate_right(k);
            if !(v > 0.0 && v.is_finite()) {
                return Err(KreinError::NumericRange {
                    index: k + 1,
                    detail: format!("U = {v} leaves the f64 range"),
                });
            }
            u.push(v);
        }
    }
    let mut h = Vec::with_capacity(n + 1);
    h.push(1.0 / (rates.rate_right(0) * u[0]));
    for k in 1..=n {
        h.push(1.0 / (rates.rate_left(k) * u[k - 1]));
    }
    if let Some(k) = h.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(KreinError::NumericRange {
            index: k,
            detail: "H leaves the f64 range".into(),
        });
    }
    Ok(ScaleSpeedPair {
        u,
        h,
        gauge,
        step: rates.step(),
    })
}

/// Rates `c(x, y) = 1/(H(x) U(x ∨ y))`.
pub fn compose_rates(pair: &ScaleSpeedPair) -> RateField {
    let n = pair.n();
    let u = |j: usize| pair.u[j - 1];
    let left = (1..=n).map(|k| 1.0 / (pair.h[k] * u(k))).collect();
    let right = (0..n).map(|k| 1.0 / (pair.h[k] * u(k + 1))).collect();
    RateField {
        n,
        step: pair.step,
        left,
        right,
    }
}

/// `D(f) = Σ_{j=1..n} U(j)^{-1} (f(j) - f(j-1))²` for `f` vanishing at `0` and `n`.
pub fn dirichlet_form(pair: &ScaleSpeedPair, f: &[f64]) -> Result<f64> {
    let n = pair.n();
    if f.len() != n + 1 {
        return Err(KreinError::Contract(format!(
            "lattice function has {} values, expected {}",
            f.len(),
            n + 1
        )));
    }
    if f[0] != 0.0 || f[n] != 0.0 {
        return Err(KreinError::Contract(
            "Dirichlet form needs f(0) = f(n) = 0".into(),
        ));
    }
    Ok(compensated_sum((1..=n).map(|j| {
        let d = f[j] - f[j - 1];
        d * d / pair.u[j - 1]
    })))
}

/// `μ(f²) = Σ_{0<k<n} H(k) f(k)²`.
pub fn speed_norm_sq(pair: &ScaleSpeedPair, f: &[f64]) -> f64 {
    let n = pair.n();
    compensated_sum((1..n).map(|k| pair.h[k] * f[k] * f[k]))
}

/// `-L f` at the interior sites `1..n` for the walk killed outside `(0, n)`.
pub fn negative_generator_apply(rates: &RateField, f: &[f64]) -> Vec<f64> {
    let n = rates.n();
    (1..n)
        .map(|k| {
            rates.rate_left(k) * (f[k] - f[k - 1]) + rates.rate_right(k) * (f[k] - f[k + 1])
        })
        .collect()
}

/// `Φ(F) = ∫ (F')² ds / ∫ F² dm`.
pub fn rayleigh_quotient(s: &KreinString, f: &PiecewiseLinearFunction) -> Result<f64> {
    let den = f.mass_norm_sq(s);
    if den == 0.0 {
        return Err(KreinError::Degenerate(
            "trial function vanishes dm-almost everywhere".into(),
        ));
    }
    Ok(f.energy() / den)
}
