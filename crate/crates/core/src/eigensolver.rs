//! Dirichlet and Neumann spectra of atomic strings through the symmetric
//! tridiagonal pencil `K v = λ M v`.
//!
//! `K` is the weighted path Laplacian of the atoms (conductance `1/gap`
//! between neighbours, plus grounding conductances to the endpoints under
//! Dirichlet conditions) and `M = diag(weights)`. Eigenvalues come from
//! Sturm-count bisection, eigenvectors from inverse iteration.

use serde::{Deserialize, Serialize};

use crate::error::{KreinError, Result};
use crate::string::{Atom, KreinString, PiecewiseLinearFunction};

/// Default relative tolerance of the eigenvalue bisection.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_BISECTION_STEPS: usize = 5000;
const INVERSE_ITERATION_STEPS: usize = 3;
const INVERSE_ITERATION_RESTARTS: usize = 4;
const CLOSE_PAIR_GAP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = KreinError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" | "d" => Ok(Self::Dirichlet),
            "neumann" | "n" => Ok(Self::Neumann),
            other => Err(KreinError::Domain(format!("unknown boundary condition {other:?}"))),
        }
    }
}

/// The pencil `(K, M)` in conductance form.
///
/// `conductance[i]` couples pencil node `i - 1` to node `i`, where node `-1`
/// and node `dim` stand for the left and right endpoints. Under Neumann
/// conditions both end conductances are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Pencil {
    bc: BoundaryCondition,
    conductance: Vec<f64>,
    weight: Vec<f64>,
    position: Vec<f64>,
}

impl Pencil {
    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn dim(&self) -> usize {
        self.weight.len()
    }

    /// Positions of the atoms carried by the pencil.
    pub fn positions(&self) -> &[f64] {
        &self.position
    }

    /// Diagonal of `K`.
    pub fn k_diag(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.conductance[i] + self.conductance[i + 1])
            .collect()
    }

    /// Off-diagonal of `K` (all negative).
    pub fn k_off(&self) -> Vec<f64> {
        (1..self.dim()).map(|i| -self.conductance[i]).collect()
    }

    /// Diagonal of `M`.
    pub fn m_diag(&self) -> &[f64] {
        &self.weight
    }

    pub fn conductances(&self) -> &[f64] {
        &self.conductance
    }

    /// `K v`.
    pub fn apply_k(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let c = &self.conductance;
        (0..n)
            .map(|i| {
                let prev = if i == 0 { 0.0 } else { v[i - 1] };
                let next = if i + 1 == n { 0.0 } else { v[i + 1] };
                c[i] * (v[i] - prev) + c[i + 1] * (v[i] - next)
            })
            .collect()
    }

    /// Number of eigenvalues `≤ x`, read off the signs of the LDLᵀ pivots of
    /// `K - x M`. A vanishing pivot counts as non-positive, so an
    /// eigenvalue equal to `x` is included.
    ///
    /// The pivots are carried in differential form: with `g` the effective
    /// conductance to ground seen from the left, `h = g - x w` and pivot
    /// `d = c + h`, the next `g` is `c h / d`. Nothing here subtracts two
    /// large diagonal terms, which keeps small eigenvalues relatively accurate.
    pub fn count_leq(&self, x: f64) -> usize {
        let n = self.dim();
        let c = &self.conductance;
        let mut g = c[0];
        let mut count = 0;
        for i in 0..n {
            let h = g - x * self.weight[i];
            let cn = c[i + 1];
            let mut d = cn + h;
            if d <= 0.0 {
                count += 1;
                if d == 0.0 {
                    d = -(f64::EPSILON * (cn + h.abs()) + f64::MIN_POSITIVE);
                }
            }
            g = cn * h / d;
        }
        count
    }

    /// Gershgorin bound on the spectrum of `M^{-1} K`.
    pub fn upper_bound(&self) -> f64 {
        let c = &self.conductance;
        let b = (0..self.dim())
            .map(|i| 2.0 * (c[i] + c[i + 1]) / self.weight[i])
            .fold(0.0, f64::max);
        b * (1.0 + 1e-10) + f64::MIN_POSITIVE
    }

    /// The `k`-th eigenvalue (1-based) by bisection on the Sturm count.
    fn bisect(&self, k: usize, mut lo: f64, tol: f64) -> (f64, f64) {
        if self.count_leq(0.0) >= k {
            return (0.0, 0.0);
        }
        let mut hi = self.upper_bound();
        while self.count_leq(hi) < k {
            hi *= 2.0;
        }
        for _ in 0..MAX_BISECTION_STEPS {
            if hi - lo <= tol * hi {
                break;
            }
            let mid = if lo <= 0.0 {
                0.5 * hi
            } else if hi > 2.0 * lo {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_leq(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo, hi)
    }

    /// Brackets `[lo, hi]` around the lowest `count` eigenvalues.
    pub fn lowest_brackets(&self, count: usize, tol: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(count);
        let mut lo = 0.0;
        for k in 1..=count.min(self.dim()) {
            let b = self.bisect(k, lo, tol);
            out.push(b);
            lo = b.0;
        }
        out
    }

    /// The lowest `count` eigenvalues in increasing order.
    pub fn lowest_eigenvalues(&self, count: usize, tol: f64) -> Vec<f64> {
        self.lowest_brackets(count, tol)
            .into_iter()
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// `vᵀ K v / vᵀ M v`, with the energy summed edge by edge.
    pub fn rayleigh(&self, v: &[f64]) -> f64 {
        let n = self.dim();
        let c = &self.conductance;
        let mut energy = c[0] * v[0] * v[0] + c[n] * v[n - 1] * v[n - 1];
        for i in 1..n {
            let d = v[i] - v[i - 1];
            energy += c[i] * d * d;
        }
        energy / v.iter().zip(&self.weight).map(|(x, w)| x * x * w).sum::<f64>()
    }

    /// Solves `(K - λ M) y = rhs` by tridiagonal LU with partial pivoting.
    fn shifted_solve(&self, lambda: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let diag: Vec<f64> = self
            .k_diag()
            .iter()
            .zip(&self.weight)
            .map(|(d, w)| d - lambda * w)
            .collect();
        let off = self.k_off();
        // Pivot floor per row: the matrix may be graded over many decades.
        let tiny_at = |i: usize| {
            let mut r = diag[i].abs();
            if i > 0 {
                r = r.max(off[i - 1].abs());
            }
            if i < off.len() {
                r = r.max(off[i].abs());
            }
            f64::EPSILON * r.max(f64::MIN_POSITIVE)
        };
        // Row-echelon form with up to two super-diagonals after pivoting.
        let mut a = diag.clone(); // pivot row main entry
        let mut b: Vec<f64> = off.clone(); // first super-diagonal
        b.push(0.0);
        let mut s2 = vec![0.0; n]; // second super-diagonal
        let mut l = vec![0.0; n]; // multipliers
        let mut swapped = vec![false; n];
        let mut y = rhs.to_vec();
        let mut cur_diag = a[0];
        let mut cur_up = b[0];
        for i in 0..n {
            if i + 1 == n {
                let tiny = tiny_at(i);
                a[i] = if cur_diag.abs() < tiny { tiny.copysign(cur_diag + 0.0) } else { cur_diag };
                b[i] = 0.0;
                break;
            }
            let sub = off[i];
            let next_diag = diag[i + 1];
            let next_up = if i + 2 < n { off[i + 1] } else { 0.0 };
            if cur_diag.abs() >= sub.abs() {
                let tiny = tiny_at(i);
                let piv = if cur_diag.abs() < tiny { tiny } else { cur_diag };
                let m = sub / piv;
                a[i] = piv;
                b[i] = cur_up;
                s2[i] = 0.0;
                l[i] = m;
                y[i + 1] -= m * y[i];
                cur_diag = next_diag - m * cur_up;
                cur_up = next_up;
            } else {
                let m = cur_diag / sub;
                swapped[i] = true;
                a[i] = sub;
                b[i] = next_diag;
                s2[i] = next_up;
                l[i] = m;
                y.swap(i, i + 1);
                y[i + 1] -= m * y[i];
                cur_diag = cur_up - m * next_diag;
                cur_up = -m * next_up;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = y[i];
            if i + 1 < n {
                acc -= b[i] * x[i + 1];
            }
            if i + 2 < n {
                acc -= s2[i] * x[i + 2];
            }
            x[i] = acc / a[i];
        }
        x
    }

    /// Eigenvector for an accurate eigenvalue `lambda`, normalized to unit
    /// `M`-norm with its first nonzero entry positive.
    pub fn eigenvector(&self, lambda: f64, index: usize) -> Result<(Vec<f64>, f64)> {
        let n = self.dim();
        if self.bc == BoundaryCondition::Neumann && lambda == 0.0 {
            let mass: f64 = self.weight.iter().sum();
            let v = vec![1.0 / mass.sqrt(); n];
            let r = self.residual(&v, 0.0);
            return Ok((v, r));
        }
        let kscale = self.k_diag().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let wscale = self.weight.iter().fold(0.0f64, |m, x| m.max(*x));
        let mut best: Option<(Vec<f64>, f64)> = None;
        for restart in 0..INVERSE_ITERATION_RESTARTS {
            let mut v: Vec<f64> = (0..n)
                .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * (0.7 + restart as f64)).sin())
                .collect();
            for _ in 0..INVERSE_ITERATION_STEPS {
                let rhs: Vec<f64> = v.iter().zip(&self.weight).map(|(x, w)| x * w).collect();
                let y = self.shifted_solve(lambda, &rhs);
                let norm = m_norm(&y, &self.weight);
                if !(norm.is_finite() && norm > 0.0) {
                    break;
                }
                v = y.iter().map(|x| x / norm).collect();
            }
            normalize_sign(&mut v);
            let r = self.residual(&v, lambda);
            let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let ok = r.is_finite() && r <= 1e-8 * (kscale + lambda.abs() * wscale) * vmax;
            if ok {
                return Ok((v, r));
            }
            if best.as_ref().is_none_or(|(_, br)| r < *br) {
                best = Some((v, r));
            }
        }
        match best {
            Some((v, r)) if r.is_finite() => Err(KreinError::NumericFailure {
                index,
                detail: format!("inverse iteration residual {r:e} after restarts (vector of len {})", v.len()),
            }),
            _ => Err(KreinError::NumericFailure {
                index,
                detail: "inverse iteration diverged".into(),
            }),
        }
    }

    /// `max_i |(K v - λ M v)_i|`.
    pub fn residual(&self, v: &[f64], lambda: f64) -> f64 {
        self.apply_k(v)
            .iter()
            .zip(v.iter().zip(&self.weight))
            .map(|(kv, (x, w))| (kv - lambda * w * x).abs())
            .fold(0.0, f64::max)
    }
}

fn m_norm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(x, w)| x * x * w).sum::<f64>().sqrt()
}

fn normalize_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Assembles the pencil of `-D_m D_x` on the string.
///
/// Dirichlet: the interior atoms, grounded to both endpoints. Neumann: all
/// atoms, none of which may sit on an endpoint.
pub fn assemble_pencil(s: &KreinString, bc: BoundaryCondition) -> Result<Pencil> {
    let atoms: &[Atom] = match bc {
        BoundaryCondition::Dirichlet => {
            let inner = s.interior_atoms();
            if inner.is_empty() {
                return Err(KreinError::Degenerate(
                    "Dirichlet pencil needs at least one interior atom".into(),
                ));
            }
            inner
        }
        BoundaryCondition::Neumann => {
            if s.has_boundary_atoms() {
                return Err(KreinError::Unsupported(
                    "Neumann problem with an atom on an endpoint".into(),
                ));
            }
            if s.is_empty() {
                return Err(KreinError::Degenerate("Neumann pencil needs an atom".into()));
            }
            s.atoms()
        }
    };
    let n = atoms.len();
    let mut conductance = Vec::with_capacity(n + 1);
    conductance.push(match bc {
        BoundaryCondition::Dirichlet => 1.0 / (atoms[0].pos - s.left()),
        BoundaryCondition::Neumann => 0.0,
    });
    for w in atoms.windows(2) {
        conductance.push(1.0 / (w[1].pos - w[0].pos));
    }
    conductance.push(match bc {
        BoundaryCondition::Dirichlet => 1.0 / (s.right() - atoms[n - 1].pos),
        BoundaryCondition::Neumann => 0.0,
    });
    if let Some(i) = conductance.iter().position(|c| !c.is_finite()) {
        return Err(KreinError::NumericRange {
            index: i,
            detail: "atom gap too small for a finite conductance".into(),
        });
    }
    Ok(Pencil {
        bc,
        conductance,
        weight: atoms.iter().map(|a| a.weight).collect(),
        position: atoms.iter().map(|a| a.pos).collect(),
    })
}

/// Ordered eigenvalues with `dm`-normalized eigenvectors at the pencil atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bc: BoundaryCondition,
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k][i]`: value of the `k`-th eigenfunction at atom `i`
    /// of the pencil (interior atoms under Dirichlet, all atoms under Neumann).
    pub eigenvectors: Vec<Vec<f64>>,
    pub positions: Vec<f64>,
    /// `max |K v - λ M v|` per pair.
    pub residuals: Vec<f64>,
    /// More eigenvalues were requested than the pencil has.
    pub clipped: bool,
    /// Two computed eigenvalues are closer than the diagnostic gap.
    pub close_pair: bool,
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    bc: BoundaryCondition,
    eigenvalues: &'a [f64],
    residual_max: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn residual_max(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// The `k`-th eigenfunction (0-based) as a piecewise-linear function on
    /// the string's interval.
    pub fn eigenfunction(&self, s: &KreinString, k: usize) -> Result<PiecewiseLinearFunction> {
        match self.bc {
            BoundaryCondition::Dirichlet => {
                PiecewiseLinearFunction::vanishing_at_ends(s, &self.eigenvectors[k])
            }
            BoundaryCondition::Neumann => {
                PiecewiseLinearFunction::flat_at_ends(s, &self.eigenvectors[k])
            }
        }
    }

    /// JSON `{"bc":..., "eigenvalues": [...], "residual_max": ...}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SpectrumSummary {
            bc: self.bc,
            eigenvalues: &self.eigenvalues,
            residual_max: self.residual_max(),
        })?)
    }

    /// CSV with columns `k,lambda,residual` (`k` is 1-based).
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "lambda", "residual"])?;
        for (i, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            w.write_record([(i + 1).to_string(), format!("{l:?}"), format!("{r:?}")])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| KreinError::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| KreinError::Serialization(e.to_string()))
    }
}

/// The lowest `count` eigenvalues (all when `None`) with eigenvectors.
pub fn eigenvalues(
    s: &KreinString,
    bc: BoundaryCondition,
    count: Option<usize>,
    tol: f64,
) -> Result<Spectrum> {
    if !(tol > 0.0) {
        return Err(KreinError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let pencil = assemble_pencil(s, bc)?;
    let requested = count.unwrap_or(pencil.dim());
    let clipped = requested > pencil.dim();
    let brackets = pencil.lowest_brackets(requested, tol);
    let mut values = Vec::with_capacity(brackets.len());
    let mut eigenvectors = Vec::with_capacity(brackets.len());
    let mut residuals = Vec::with_capacity(brackets.len());
    for (k, &(lo, hi)) in brackets.iter().enumerate() {
        let mid = 0.5 * (lo + hi);
        let (v, r) = pencil.eigenvector(mid, k + 1)?;
        // The Rayleigh quotient is kept only when it stays in the bracket.
        let rq = pencil.rayleigh(&v);
        if rq >= lo && rq <= hi && rq != mid {
            values.push(rq);
            residuals.push(pencil.residual(&v, rq));
        } else {
            values.push(mid);
            residuals.push(r);
        }
        eigenvectors.push(v);
    }
    let top = values.last().copied().unwrap_or(0.0);
    let close_pair = values
        .windows(2)
        .any(|w| w[1] - w[0] < CLOSE_PAIR_GAP * top);
    Ok(Spectrum {
        bc,
        eigenvalues: values,
        eigenvectors,
        positions: pencil.positions().to_vec(),
        residuals,
        clipped,
        close_pair,
    })
}

/// Eigenvalues only; cheaper than [`eigenvalues`] when vectors are not needed.
pub fn eigenvalues_only(
    s: &KreinString,
    bc: BoundaryCondition,
    count: Option<usize>,
    tol: f64,
) -> Result<Vec<f64>> {
    let pencil = assemble_pencil(s, bc)?;
    let count = count.unwrap_or(pencil.dim());
    Ok(pencil.lowest_eigenvalues(count, tol))
}

/// `#{λ ≤ x}` by a Sturm count; strings without atoms for the pencil have none.
pub fn count_leq(s: &KreinString, bc: BoundaryCondition, x: f64) -> Result<usize> {
    if !(x >= 0.0) {
        return Err(KreinError::Domain(format!("counting threshold must be >= 0, got {x}")));
    }
    match assemble_pencil(s, bc) {
        Ok(p) => Ok(p.count_leq(x)),
        Err(KreinError::Degenerate(_)) => Ok(0),
        Err(e) => Err(e),
    }
}

/// Dirichlet Green kernel of `-d²/dx²` on `[a, b]`.
pub fn green_kernel(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if y <= x {
        (y - a) * (b - x) / (b - a)
    } else {
        (x - a) * (b - y) / (b - a)
    }
}

/// `sup_x |F(x) - λ Σ_y G(x, y) F(y) w_y|` over the interior atoms, for
/// Dirichlet eigenvector values `f` at those atoms.
pub fn green_residual(s: &KreinString, lambda: f64, f: &[f64]) -> Result<f64> {
    let inner = s.interior_atoms();
    if inner.len() != f.len() {
        return Err(KreinError::Contract(format!(
            "{} interior atoms but {} values",
            inner.len(),
            f.len()
        )));
    }
    let (a, b) = (s.left(), s.right());
    let mut worst: f64 = 0.0;
    for (xi, &fi) in inner.iter().zip(f) {
        let acc: f64 = inner
            .iter()
            .zip(f)
            .map(|(yj, &fj)| green_kernel(a, b, xi.pos, yj.pos) * fj * yj.weight)
            .sum();
        worst = worst.max((fi - lambda * acc).abs());
    }
    Ok(worst)
}
