//! Atomic speed measures on an interval ("strings") and the operations that
//! build, cut, rescale and invert them.

use serde::{Deserialize, Serialize};

use crate::error::{KreinError, Result};
use crate::numeric::{compensated_prefix_sums, compensated_sum};
use crate::walk_model::ScaleSpeedPair;

/// A point mass of the speed measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Atom {
    pub pos: f64,
    pub weight: f64,
}

impl Atom {
    pub fn new(pos: f64, weight: f64) -> Self {
        Self { pos, weight }
    }
}

impl From<(f64, f64)> for Atom {
    fn from((pos, weight): (f64, f64)) -> Self {
        Self { pos, weight }
    }
}

impl From<Atom> for (f64, f64) {
    fn from(a: Atom) -> Self {
        (a.pos, a.weight)
    }
}

/// A jump of a pure-jump nondecreasing function: at `pos` the function
/// increases by `size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub pos: f64,
    pub size: f64,
}

impl Jump {
    pub fn new(pos: f64, size: f64) -> Self {
        Self { pos, size }
    }
}

#[derive(Deserialize)]
struct RawString {
    left: f64,
    right: f64,
    atoms: Vec<Atom>,
}

/// A finite atomic measure `dm` on `[left, right]`.
///
/// Atoms are sorted by strictly increasing position and carry positive
/// weights. Atoms sitting exactly on an endpoint are allowed; the Dirichlet
/// problem ignores them and the Neumann problem rejects them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawString")]
pub struct KreinString {
    left: f64,
    right: f64,
    atoms: Vec<Atom>,
}

impl TryFrom<RawString> for KreinString {
    type Error = KreinError;

    fn try_from(raw: RawString) -> Result<Self> {
        KreinString::new(raw.left, raw.right, raw.atoms)
    }
}

impl KreinString {
    pub fn new(left: f64, right: f64, atoms: Vec<Atom>) -> Result<Self> {
        if !(left.is_finite() && right.is_finite() && right > left) {
            return Err(KreinError::Domain(format!(
                "interval [{left}, {right}] must be finite with right > left"
            )));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(KreinError::Domain(format!(
                    "atom {i} has non-positive weight {}",
                    a.weight
                )));
            }
            if !(a.pos >= left && a.pos <= right) {
                return Err(KreinError::Domain(format!(
                    "atom {i} at {} lies outside [{left}, {right}]",
                    a.pos
                )));
            }
            if i > 0 && a.pos <= atoms[i - 1].pos {
                return Err(KreinError::Domain(format!(
                    "atom positions must be strictly increasing (index {i})"
                )));
            }
        }
        Ok(Self { left, right, atoms })
    }

    /// Builds a string from positions and weights that may contain
    /// coincident positions; coincident atoms are merged by summing weights.
    pub fn from_unsorted_merging(left: f64, right: f64, mut atoms: Vec<Atom>) -> Result<Self> {
        atoms.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(last) if last.pos == a.pos => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        Self::new(left, right, merged)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atoms strictly inside `(left, right)`.
    pub fn interior_atoms(&self) -> &[Atom] {
        let start = self.atoms.iter().take_while(|a| a.pos <= self.left).count();
        let end = self.atoms.len()
            - self.atoms.iter().rev().take_while(|a| a.pos >= self.right).count();
        if start >= end {
            &[]
        } else {
            &self.atoms[start..end]
        }
    }

    pub fn has_boundary_atoms(&self) -> bool {
        self.atoms
            .iter()
            .any(|a| a.pos == self.left || a.pos == self.right)
    }

    /// Total mass `m(right) - m(left-)`, summed with compensation.
    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// CSV with columns `pos,weight`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["pos", "weight"])?;
        for a in &self.atoms {
            w.write_record([format!("{:?}", a.pos), format!("{:?}", a.weight)])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| KreinError::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| KreinError::Serialization(e.to_string()))
    }
}

/// A continuous function on `[knots[0], knots[last]]`, linear between knots.
/// Evaluation outside the knot range returns zero (extension by zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinearFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(KreinError::Contract(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(KreinError::Contract("need at least two knots".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(KreinError::Contract("knots must be strictly increasing".into()));
        }
        Ok(Self { knots, values })
    }

    /// Function on `[s.left, s.right]` through the given values at the
    /// interior atoms and zero at both endpoints.
    pub fn vanishing_at_ends(s: &KreinString, interior_values: &[f64]) -> Result<Self> {
        let inner = s.interior_atoms();
        if inner.len() != interior_values.len() {
            return Err(KreinError::Contract(format!(
                "{} interior atoms but {} values",
                inner.len(),
                interior_values.len()
            )));
        }
        let mut knots = Vec::with_capacity(inner.len() + 2);
        let mut values = Vec::with_capacity(inner.len() + 2);
        knots.push(s.left());
        values.push(0.0);
        for (a, &v) in inner.iter().zip(interior_values) {
            knots.push(a.pos);
            values.push(v);
        }
        knots.push(s.right());
        values.push(0.0);
        Self::new(knots, values)
    }

    /// Function through the given values at all atoms, constant on the
    /// atom-free end segments (the shape of a Neumann eigenfunction).
    pub fn flat_at_ends(s: &KreinString, atom_values: &[f64]) -> Result<Self> {
        if s.atoms().len() != atom_values.len() || atom_values.is_empty() {
            return Err(KreinError::Contract("one value per atom required".into()));
        }
        let mut knots = vec![s.left()];
        let mut values = vec![atom_values[0]];
        for (a, &v) in s.atoms().iter().zip(atom_values) {
            if a.pos > *knots.last().unwrap() {
                knots.push(a.pos);
                values.push(v);
            } else {
                *values.last_mut().unwrap() = v;
            }
        }
        if s.right() > *knots.last().unwrap() {
            knots.push(s.right());
            values.push(*atom_values.last().unwrap());
        }
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let first = self.knots[0];
        let last = *self.knots.last().unwrap();
        if x < first || x > last {
            return 0.0;
        }
        let i = self.knots.partition_point(|&k| k <= x);
        if i == 0 {
            return self.values[0];
        }
        if i >= self.knots.len() {
            return *self.values.last().unwrap();
        }
        let (x0, x1) = (self.knots[i - 1], self.knots[i]);
        let (y0, y1) = (self.values[i - 1], self.values[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// `∫ (F')² ds`, exact for piecewise-linear `F`.
    pub fn energy(&self) -> f64 {
        compensated_sum(self.knots.windows(2).zip(self.values.windows(2)).map(
            |(k, v)| {
                let d = v[1] - v[0];
                d * d / (k[1] - k[0])
            },
        ))
    }

    /// `∫ F² dm` for the given string.
    pub fn mass_norm_sq(&self, s: &KreinString) -> f64 {
        compensated_sum(s.atoms().iter().map(|a| {
            let f = self.eval(a.pos);
            f * f * a.weight
        }))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `sup |F - G|` with both functions extended by zero; the difference is
    /// piecewise linear on the merged knots, so the supremum sits on a knot.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        let mut pts: Vec<f64> = self.knots.iter().chain(other.knots.iter()).copied().collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut best: f64 = 0.0;
        for &x in &pts {
            // Values at a knot that ends one function's support: use the
            // one-sided limits from both sides.
            best = best.max((self.eval(x) - other.eval(x)).abs());
            let lhs = |f: &Self| if x == f.knots[0] { 0.0 } else { f.eval(x) };
            let rhs = |f: &Self| if x == *f.knots.last().unwrap() { 0.0 } else { f.eval(x) };
            best = best.max((lhs(self) - lhs(other)).abs());
            best = best.max((rhs(self) - rhs(other)).abs());
        }
        best
    }
}

/// String of the lattice walk: atoms at the scale points `x_k = U(1)+...+U(k)`
/// (with `x_0 = 0`) carrying weights `H(k)`, on `[0, x_n]`.
pub fn build_string(pair: &ScaleSpeedPair) -> Result<KreinString> {
    let xs = compensated_prefix_sums(0.0, pair.u());
    if let Some(k) = xs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(KreinError::NumericRange {
            index: k + 1,
            detail: format!("scale increment {:e} is below the resolution of position {}", pair.u()[k], xs[k]),
        });
    }
    let atoms = xs
        .iter()
        .zip(pair.h())
        .map(|(&pos, &weight)| Atom { pos, weight })
        .collect();
    let right = *xs.last().unwrap();
    Ok(KreinString {
        left: 0.0,
        right,
        atoms,
    })
}

/// The piecewise-linear interpolation `T f` of a lattice function on the scale points.
pub fn lift(pair: &ScaleSpeedPair, f: &[f64]) -> Result<PiecewiseLinearFunction> {
    if f.len() != pair.n() + 1 {
        return Err(KreinError::Contract(format!(
            "lattice function has {} values, expected {}",
            f.len(),
            pair.n() + 1
        )));
    }
    let xs = compensated_prefix_sums(0.0, pair.u());
    PiecewiseLinearFunction::new(xs, f.to_vec())
}

/// Restriction of `dm` to `[a, b]`: keeps the atoms in `(a, b)`.
pub fn restrict(s: &KreinString, a: f64, b: f64) -> Result<KreinString> {
    if !(s.left <= a && a < b && b <= s.right) {
        return Err(KreinError::Contract(format!(
            "restriction [{a}, {b}] not inside [{}, {}]",
            s.left, s.right
        )));
    }
    if let Some(at) = s.atoms.iter().find(|x| x.pos == a || x.pos == b) {
        return Err(KreinError::CutCollision { position: at.pos });
    }
    let atoms = s
        .atoms
        .iter()
        .filter(|x| x.pos > a && x.pos < b)
        .copied()
        .collect();
    Ok(KreinString { left: a, right: b, atoms })
}

/// The string of `M(x) = γ^{1/β} m(x/γ)`: positions stretched by `γ`,
/// weights multiplied by `γ^{1/β}`.
pub fn rescale(s: &KreinString, gamma: f64, beta: f64) -> Result<KreinString> {
    if !(gamma > 0.0 && gamma.is_finite() && beta > 0.0 && beta.is_finite()) {
        return Err(KreinError::Domain(format!(
            "rescale needs gamma > 0 and beta > 0 (got {gamma}, {beta})"
        )));
    }
    let wf = gamma.powf(1.0 / beta);
    let atoms = s
        .atoms
        .iter()
        .map(|a| Atom {
            pos: a.pos * gamma,
            weight: a.weight * wf,
        })
        .collect();
    Ok(KreinString {
        left: s.left * gamma,
        right: s.right * gamma,
        atoms,
    })
}

/// String of the right-continuous generalized inverse of the pure-jump
/// function `m(t) = Σ_{pos_i ≤ t} size_i` on `[0, horizon]`.
///
/// Each plateau of `m` becomes an atom of `dm^{-1}`: the plateau `[0, u_1)`
/// gives weight `u_1` at level `0`, the plateau `[u_i, u_{i+1})` gives weight
/// `u_{i+1} - u_i` at level `m(u_i)`, and the last one gives `horizon - u_last`
/// at level `m(horizon)`. The string lives on `[0, m(horizon)]`.
pub fn generalized_inverse(jumps: &[Jump], horizon: f64) -> Result<KreinString> {
    if jumps.is_empty() {
        return Err(KreinError::Degenerate("generalized inverse of an empty jump list".into()));
    }
    for (i, j) in jumps.iter().enumerate() {
        if !(j.size > 0.0 && j.size.is_finite()) {
            return Err(KreinError::Domain(format!("jump {i} has size {}", j.size)));
        }
        if !(j.pos > 0.0 && j.pos <= horizon) {
            return Err(KreinError::Domain(format!(
                "jump {i} at {} outside (0, {horizon}]",
                j.pos
            )));
        }
        if i > 0 && j.pos <= jumps[i - 1].pos {
            return Err(KreinError::Domain(format!(
                "jump positions must be strictly increasing (index {i})"
            )));
        }
    }
    let sizes: Vec<f64> = jumps.iter().map(|j| j.size).collect();
    let levels = compensated_prefix_sums(0.0, &sizes);
    let mut atoms = Vec::with_capacity(jumps.len() + 1);
    atoms.push(Atom::new(0.0, jumps[0].pos));
    for i in 0..jumps.len() {
        let next = jumps.get(i + 1).map_or(horizon, |j| j.pos);
        let w = next - jumps[i].pos;
        if w > 0.0 {
            atoms.push(Atom::new(levels[i + 1], w));
        }
    }
    let top = *levels.last().unwrap();
    KreinString::new(0.0, top, atoms)
}
