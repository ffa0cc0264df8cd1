//! Fundamental solutions of `F(x) = a + b x - λ ∫_0^x (x - s) F(s) m(ds)`
//! on an atomic string: shooting, the power-series form of `ψ`, and the
//! characteristic functions whose zeros are the Dirichlet and Neumann
//! eigenvalues.

use serde::Serialize;

use crate::eigensolver::{assemble_pencil, BoundaryCondition};
use crate::error::{KreinError, Result};
use crate::numeric::CompensatedSum;
use crate::string::KreinString;

const MAX_ZERO_BISECTIONS: usize = 400;

/// Solution state just past an atom: value and right derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingState {
    pub position: f64,
    pub value: f64,
    pub slope: f64,
}

/// Terminal value `F(ℓ)` and right derivative `F'_+(ℓ)`, with the state
/// recorded after every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult {
    pub value: f64,
    pub slope: f64,
    pub trace: Vec<ShootingState>,
}

/// Integrates from the left end with `F(left) = a`, `F'_-(left) = b`.
/// Between atoms `F` is linear; at an atom of weight `w` the slope drops by
/// `λ w F`.
pub fn shoot(s: &KreinString, lambda: f64, init: (f64, f64)) -> ShootingResult {
    let (mut value, mut slope) = init;
    let mut at = s.left();
    let mut trace = Vec::with_capacity(s.len());
    for atom in s.atoms() {
        value += slope * (atom.pos - at);
        at = atom.pos;
        slope -= lambda * atom.weight * value;
        trace.push(ShootingState {
            position: at,
            value,
            slope,
        });
    }
    value += slope * (s.right() - at);
    ShootingResult { value, slope, trace }
}

fn shoot_end(s: &KreinString, lambda: f64, init: (f64, f64)) -> (f64, f64) {
    let (mut value, mut slope) = init;
    let mut at = s.left();
    for atom in s.atoms() {
        value += slope * (atom.pos - at);
        at = atom.pos;
        slope -= lambda * atom.weight * value;
    }
    (value + slope * (s.right() - at), slope)
}

/// Terminal value, slope and `∫ F dm` of a shooting solution, all divided
/// by `2^exp2`. The recursion is linear, so rescaling by powers of two keeps
/// the state finite without touching its signs or relative accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledTerminal {
    pub value: f64,
    pub slope: f64,
    pub mass_integral: f64,
    pub exp2: i64,
}

const RESCALE_ABOVE: f64 = 1e150;

/// Overflow-free shooting.
pub fn shoot_scaled(s: &KreinString, lambda: f64, init: (f64, f64)) -> ScaledTerminal {
    let (mut value, mut slope) = init;
    let mut mass = 0.0;
    let mut exp2: i64 = 0;
    let mut at = s.left();
    for atom in s.atoms() {
        value += slope * (atom.pos - at);
        at = atom.pos;
        mass += atom.weight * value;
        slope -= lambda * atom.weight * value;
        let big = value.abs().max(slope.abs()).max(mass.abs());
        if big > RESCALE_ABOVE {
            let e = big.log2().floor() as i32;
            let f = 2f64.powi(-e);
            value *= f;
            slope *= f;
            mass *= f;
            exp2 += e as i64;
        }
    }
    ScaledTerminal {
        value: value + slope * (s.right() - at),
        slope,
        mass_integral: mass,
        exp2,
    }
}

/// `φ(ℓ, λ)`, `φ'(ℓ, λ)` with `φ(0) = 1`, `φ'(0-) = 0`.
pub fn phi(s: &KreinString, lambda: f64) -> (f64, f64) {
    shoot_end(s, lambda, (1.0, 0.0))
}

/// `ψ(ℓ, λ)`, `ψ'(ℓ, λ)` with `ψ(0) = 0`, `ψ'(0-) = 1`.
pub fn psi(s: &KreinString, lambda: f64) -> (f64, f64) {
    shoot_end(s, lambda, (0.0, 1.0))
}

/// `φ ψ' - φ' ψ` at the right end; identically 1.
pub fn wronskian(s: &KreinString, lambda: f64) -> f64 {
    let (p, dp) = phi(s, lambda);
    let (q, dq) = psi(s, lambda);
    p * dq - dp * q
}

/// `∫ φ(x, λ) m(dx)`; its zeros are the Neumann eigenvalues.
pub fn neumann_condition(s: &KreinString, lambda: f64) -> Result<f64> {
    if s.has_boundary_atoms() {
        return Err(KreinError::Unsupported(
            "Neumann condition with an atom on an endpoint".into(),
        ));
    }
    let mut value = 1.0;
    let mut slope = 0.0;
    let mut at = s.left();
    let mut acc = CompensatedSum::new();
    for atom in s.atoms() {
        value += slope * (atom.pos - at);
        at = atom.pos;
        acc.add(atom.weight * value);
        slope -= lambda * atom.weight * value;
    }
    Ok(acc.value())
}

/// Truncated power series for `ψ(x, λ)` with a rigorous tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    /// The bound exceeds a thousand times the value.
    pub unreliable: bool,
}

/// `Σ_{j ≤ j_max} (-λ)^j ψ_j(x)` where `ψ_0(x) = x` and
/// `ψ_{j+1}(x) = ∫_0^x (x - s) ψ_j(s) m(ds)`, all measured from the left end.
///
/// Only the atoms strictly inside `(left, x)` enter, so `ψ_j(x)` vanishes
/// once `j` exceeds their number. The tail bound sums
/// `|λ|^j x c^j / j!` with `c = ∫_0^x (x - s) m(ds)` over the remaining
/// nonzero orders.
pub fn psi_series(s: &KreinString, x: f64, lambda: f64, j_max: usize) -> Result<SeriesValue> {
    let left = s.left();
    if !(x >= left && x <= s.right()) {
        return Err(KreinError::Domain(format!(
            "x = {x} outside [{left}, {}]",
            s.right()
        )));
    }
    let span = x - left;
    let inside: Vec<(f64, f64)> = s
        .atoms()
        .iter()
        .filter(|a| a.pos > left && a.pos < x)
        .map(|a| (a.pos - left, a.weight))
        .collect();
    let mut current: Vec<f64> = inside.iter().map(|(p, _)| *p).collect();
    let mut total = CompensatedSum::new();
    total.add(span);
    let mut power = 1.0;
    for _ in 1..=j_max.min(inside.len()) {
        power *= -lambda;
        // Drift recursion: next(p_i) = Σ_{k<i} (p_i - p_k) cur(p_k) w_k.
        let mut next = Vec::with_capacity(inside.len());
        let mut value = 0.0;
        let mut slope = 0.0;
        let mut at = 0.0;
        for (&(p, w), &c) in inside.iter().zip(&current) {
            value += slope * (p - at);
            at = p;
            next.push(value);
            slope += c * w;
        }
        let at_x = value + slope * (span - at);
        total.add(power * at_x);
        current = next;
    }
    let c: f64 = inside.iter().map(|(p, w)| (span - p) * w).sum();
    let mut term = span;
    let mut tail = 0.0;
    for j in 1..=inside.len() {
        term *= lambda.abs() * c / j as f64;
        if j > j_max {
            tail += term;
        }
    }
    let value = total.value();
    Ok(SeriesValue {
        value,
        tail_bound: tail,
        unreliable: tail > 1e3 * value.abs(),
    })
}

/// Splits `(0, λ_max]` into brackets holding exactly one eigenvalue each.
fn isolate(
    count: &dyn Fn(f64) -> usize,
    lo: f64,
    hi: f64,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut stack = vec![(lo, hi, count(lo), count(hi))];
    while let Some((a, b, ca, cb)) = stack.pop() {
        match cb.saturating_sub(ca) {
            0 => {}
            1 => out.push((a, b)),
            _ => {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    return Err(KreinError::Consistency(format!(
                        "{} eigenvalues not separable near {a:e}",
                        cb - ca
                    )));
                }
                let cm = count(mid);
                stack.push((mid, b, cm, cb));
                stack.push((a, mid, ca, cm));
            }
        }
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(out)
}

fn sign_bisect(
    f: &dyn Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    let fb = f(b);
    if fb == 0.0 {
        return Ok(b);
    }
    // The bracket is half-open: a zero at `a` belongs to the previous one,
    // and just above `a` the function has the sign opposite to `f(b)`.
    let mut fa = f(a);
    if fa == 0.0 {
        fa = -fb;
    }
    if fa.signum() == fb.signum() {
        return Err(KreinError::Consistency(format!(
            "no sign change of the characteristic function on [{a:e}, {b:e}]"
        )));
    }
    for _ in 0..MAX_ZERO_BISECTIONS {
        if b - a <= tol * b {
            break;
        }
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Zeros of `λ ↦ ψ(ℓ, λ)` in `(0, λ_max]`, bracketed by Sturm counts.
pub fn dirichlet_zeros(s: &KreinString, lambda_max: f64, tol: f64) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) {
        return Err(KreinError::Domain(format!("lambda_max must be > 0, got {lambda_max}")));
    }
    let pencil = match assemble_pencil(s, BoundaryCondition::Dirichlet) {
        Ok(p) => p,
        Err(KreinError::Degenerate(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let brackets = isolate(&|x| pencil.count_leq(x), 0.0, lambda_max)?;
    let f = |l: f64| shoot_scaled(s, l, (0.0, 1.0)).value;
    brackets
        .into_iter()
        .map(|(a, b)| sign_bisect(&f, a, b, tol))
        .collect()
}

/// Zeros of `λ ↦ ∫ φ(x, λ) m(dx)` in `[0, λ_max]`, starting with 0.
pub fn neumann_zeros(s: &KreinString, lambda_max: f64, tol: f64) -> Result<Vec<f64>> {
    if !(lambda_max > 0.0) {
        return Err(KreinError::Domain(format!("lambda_max must be > 0, got {lambda_max}")));
    }
    let pencil = match assemble_pencil(s, BoundaryCondition::Neumann) {
        Ok(p) => p,
        Err(KreinError::Degenerate(_)) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let brackets = isolate(&|x| pencil.count_leq(x), 0.0, lambda_max)?;
    let f = |l: f64| shoot_scaled(s, l, (1.0, 0.0)).mass_integral;
    let mut out = vec![0.0];
    for (a, b) in brackets {
        out.push(sign_bisect(&f, a, b, tol)?);
    }
    Ok(out)
}

/// Determinant of a symmetric tridiagonal matrix by the continuant
/// recursion.
pub fn tridiagonal_det(diag: &[f64], off: &[f64]) -> f64 {
    let mut prev = 1.0;
    let mut cur = match diag.first() {
        Some(d) => *d,
        None => return 1.0,
    };
    for i in 1..diag.len() {
        let next = diag[i] * cur - off[i - 1] * off[i - 1] * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `ℓ det(K - λ M) / det K` for the Dirichlet pencil; equals `ψ(ℓ, λ)`.
pub fn psi_from_determinant(s: &KreinString, lambda: f64) -> Result<f64> {
    let p = assemble_pencil(s, BoundaryCondition::Dirichlet)?;
    let kd = p.k_diag();
    let off = p.k_off();
    let shifted: Vec<f64> = kd.iter().zip(p.m_diag()).map(|(d, w)| d - lambda * w).collect();
    Ok(s.length() * tridiagonal_det(&shifted, &off) / tridiagonal_det(&kd, &off))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::{eigenvalues_only, DEFAULT_TOL};
    use crate::string::Atom;

    fn single() -> KreinString {
        KreinString::new(0.0, 1.0, vec![Atom::new(0.5, 1.0)]).unwrap()
    }

    fn two_atoms() -> KreinString {
        KreinString::new(0.0, 1.0, vec![Atom::new(1.0 / 3.0, 1.0), Atom::new(2.0 / 3.0, 1.0)])
            .unwrap()
    }

    #[test]
    fn single_atom_fundamental_solutions() {
        let s = single();
        // ψ(1, λ) = 1 - λ/4, zero at λ = 4.
        for l in [0.0, 1.0, 4.0, 7.5] {
            assert!((psi(&s, l).0 - (1.0 - l / 4.0)).abs() < 1e-15);
            assert!((wronskian(&s, l) - 1.0).abs() < 1e-14);
        }
        assert_eq!(psi(&s, 4.0).0, 0.0);
        let z = dirichlet_zeros(&s, 10.0, 1e-14).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn trace_records_right_derivatives() {
        let r = shoot(&single(), 4.0, (0.0, 1.0));
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.trace[0].value, 0.5);
        assert_eq!(r.trace[0].slope, -1.0);
        assert_eq!(r.slope, -1.0);
    }

    #[test]
    fn two_atom_zeros_match_pencil() {
        let s = two_atoms();
        let z = dirichlet_zeros(&s, 20.0, 1e-14).unwrap();
        assert_eq!(z.len(), 2);
        assert!((z[0] - 3.0).abs() < 1e-12 && (z[1] - 9.0).abs() < 1e-12);
        let nz = neumann_zeros(&s, 20.0, 1e-14).unwrap();
        assert_eq!(nz.len(), 2);
        assert_eq!(nz[0], 0.0);
        assert!((nz[1] - 6.0).abs() < 1e-12);
        assert!(neumann_condition(&s, 6.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn neumann_condition_rejects_boundary_atoms() {
        let s = KreinString::new(0.0, 1.0, vec![Atom::new(1.0, 1.0)]).unwrap();
        assert!(matches!(neumann_condition(&s, 1.0), Err(KreinError::Unsupported(_))));
    }

    #[test]
    fn series_examples() {
        let s = single();
        let v = psi_series(&s, 1.0, 4.0, 1).unwrap();
        assert!(v.value.abs() < 1e-15);
        assert_eq!(v.tail_bound, 0.0);
        assert!(!v.unreliable);
        let v = psi_series(&s, 0.25, 4.0, 0).unwrap();
        assert_eq!(v.value, 0.25);
        let v = psi_series(&s, 1.0, 4.0, 0).unwrap();
        assert_eq!(v.value, 1.0);
        assert!(v.tail_bound >= 1.0);
    }

    #[test]
    fn series_matches_shooting() {
        let atoms: Vec<Atom> = (1..8).map(|k| Atom::new(k as f64 / 8.0, 0.1 * k as f64)).collect();
        let s = KreinString::new(0.0, 1.0, atoms).unwrap();
        for l in [0.3, 2.0, 11.0] {
            let v = psi_series(&s, 1.0, l, 7).unwrap();
            assert!((v.value - psi(&s, l).0).abs() < 1e-12 * (1.0 + l.powi(7)));
            assert_eq!(v.tail_bound, 0.0);
        }
    }

    #[test]
    fn determinant_identity() {
        let s = two_atoms();
        for l in [0.0, 1.0, 3.0, 5.5, 12.0] {
            let a = psi(&s, l).0;
            let b = psi_from_determinant(&s, l).unwrap();
            assert!((a - b).abs() < 1e-13 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn zeros_match_sturm_on_irregular_string() {
        let atoms = vec![
            Atom::new(0.05, 3.0),
            Atom::new(0.2, 0.01),
            Atom::new(0.21, 0.5),
            Atom::new(0.7, 2.0),
            Atom::new(0.95, 0.2),
        ];
        let s = KreinString::new(0.0, 1.0, atoms).unwrap();
        let sturm = eigenvalues_only(&s, BoundaryCondition::Dirichlet, None, DEFAULT_TOL).unwrap();
        let top = sturm.last().unwrap() * 1.01;
        let z = dirichlet_zeros(&s, top, 1e-14).unwrap();
        assert_eq!(z.len(), sturm.len());
        for (a, b) in z.iter().zip(&sturm) {
            assert!((a - b).abs() <= 1e-10 * b);
        }
    }

    #[test]
    fn two_atom_psi_polynomial() {
        let s = two_atoms();
        for l in [0.0, 0.5, 3.0, 7.0, 9.0, 20.0] {
            let exact = 1.0 - 4.0 * l / 9.0 + l * l / 27.0;
            assert!((psi(&s, l).0 - exact).abs() < 1e-13 * (1.0 + exact.abs()));
        }
        let v = psi_series(&s, 1.0, 3.0, 2).unwrap();
        assert!(v.value.abs() <= v.tail_bound + 1e-13);
    }

    #[test]
    fn zero_lambda_is_linear() {
        let s = two_atoms();
        let r = shoot(&s, 0.0, (0.0, 1.0));
        assert!(r.trace.iter().all(|t| (t.value - t.position).abs() < 1e-15));
        assert_eq!(phi(&s, 0.0), (1.0, 0.0));
        let v = psi_series(&s, 0.7, 0.0, 3).unwrap();
        assert_eq!((v.value, v.tail_bound), (0.7, 0.0));
        assert_eq!(neumann_condition(&s, 0.0).unwrap(), 2.0);
    }

    #[test]
    fn ssrw_zeros() {
        let atoms = (0..=4).map(|k| Atom::new(k as f64, 2.0)).collect();
        let s = KreinString::new(0.0, 4.0, atoms).unwrap();
        let z = dirichlet_zeros(&s, 2.0, 1e-14).unwrap();
        assert_eq!(z.len(), 3);
        for (k, l) in z.iter().enumerate() {
            let exact = 1.0 - (std::f64::consts::PI * (k + 1) as f64 / 4.0).cos();
            assert!((l - exact).abs() < 1e-12, "{k} {l} {exact}");
        }
    }

    #[test]
    fn wronskian_along_trace() {
        let s = two_atoms();
        let a = shoot(&s, 2.7, (1.0, 0.0));
        let b = shoot(&s, 2.7, (0.0, 1.0));
        for (p, q) in a.trace.iter().zip(&b.trace) {
            assert!((p.value * q.slope - p.slope * q.value - 1.0).abs() < 1e-12);
        }
    }
}
