//! Dirichlet–Neumann bracketing of eigenvalue counting functions: the
//! `N_D ≤ N_N ≤ N_D + 2` gap, super/subadditivity over a partition, the
//! crude bound, and invariance of counts under rescaling.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::{limit_trap_string, sample_subordinator_stream, CompensationMode};
use crate::eigensolver::{assemble_pencil, count_leq, BoundaryCondition, Pencil};
use crate::error::{KreinError, Result};
use crate::string::{restrict, rescale, Atom, KreinString};

/// Relative offset used to move evaluation points off the spectrum.
pub const JITTER: f64 = 1e-9;

fn require_no_boundary_atoms(s: &KreinString) -> Result<()> {
    if s.has_boundary_atoms() {
        return Err(KreinError::Unsupported(
            "bracketing needs a string without atoms on its endpoints".into(),
        ));
    }
    Ok(())
}

/// `(N_D(x), N_N(x))` for the whole string.
pub fn dn_gap(s: &KreinString, x: f64) -> Result<(usize, usize)> {
    require_no_boundary_atoms(s)?;
    Ok((
        count_leq(s, BoundaryCondition::Dirichlet, x)?,
        count_leq(s, BoundaryCondition::Neumann, x)?,
    ))
}

/// Counts for the whole interval and for each cell of one partition at one
/// threshold, with the inequalities they must satisfy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketRow {
    pub x: f64,
    pub n_d: usize,
    pub n_n: usize,
    pub cells_d: Vec<usize>,
    pub cells_n: Vec<usize>,
    pub cell_sum_d: usize,
    pub cell_sum_n: usize,
    /// `N_D ≤ N_N ≤ N_D + 2`.
    pub ok_dn: bool,
    /// `N_D ≥ Σ cells N_D`.
    pub ok_super: bool,
    /// `N_N ≤ Σ cells N_N`.
    pub ok_sub: bool,
    /// `N_D ≤ 2 (#cells) + Σ cells N_D`.
    pub ok_crude: bool,
}

impl BracketRow {
    pub fn all_ok(&self) -> bool {
        self.ok_dn && self.ok_super && self.ok_sub && self.ok_crude
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.ok_dn {
            out.push(format!("x={:e}: N_D={} N_N={} breaks the D/N gap", self.x, self.n_d, self.n_n));
        }
        if !self.ok_super {
            out.push(format!(
                "x={:e}: Dirichlet superadditivity N_D={} < {}",
                self.x, self.n_d, self.cell_sum_d
            ));
        }
        if !self.ok_sub {
            out.push(format!(
                "x={:e}: Neumann subadditivity N_N={} > {}",
                self.x, self.n_n, self.cell_sum_n
            ));
        }
        if !self.ok_crude {
            out.push(format!(
                "x={:e}: crude bound N_D={} > 2*{} + {}",
                self.x,
                self.n_d,
                self.cells_d.len(),
                self.cell_sum_d
            ));
        }
        out
    }
}

/// Pencils of the cells cut out by `cuts`; `None` marks a cell with no atoms.
struct Partition {
    whole_d: Option<Pencil>,
    whole_n: Option<Pencil>,
    cells_d: Vec<Option<Pencil>>,
    cells_n: Vec<Option<Pencil>>,
}

fn optional_pencil(s: &KreinString, bc: BoundaryCondition) -> Result<Option<Pencil>> {
    match assemble_pencil(s, bc) {
        Ok(p) => Ok(Some(p)),
        Err(KreinError::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn count(p: &Option<Pencil>, x: f64) -> usize {
    p.as_ref().map_or(0, |p| p.count_leq(x))
}

impl Partition {
    fn new(s: &KreinString, cuts: &[f64]) -> Result<Self> {
        require_no_boundary_atoms(s)?;
        for (i, c) in cuts.iter().enumerate() {
            if !(*c > s.left() && *c < s.right()) {
                return Err(KreinError::Contract(format!(
                    "cut {c} not strictly inside ({}, {})",
                    s.left(),
                    s.right()
                )));
            }
            if i > 0 && *c <= cuts[i - 1] {
                return Err(KreinError::Contract("cuts must be strictly increasing".into()));
            }
        }
        let mut ends = Vec::with_capacity(cuts.len() + 2);
        ends.push(s.left());
        ends.extend_from_slice(cuts);
        ends.push(s.right());
        let mut cells_d = Vec::with_capacity(ends.len() - 1);
        let mut cells_n = Vec::with_capacity(ends.len() - 1);
        for w in ends.windows(2) {
            let cell = restrict(s, w[0], w[1])?;
            cells_d.push(optional_pencil(&cell, BoundaryCondition::Dirichlet)?);
            cells_n.push(optional_pencil(&cell, BoundaryCondition::Neumann)?);
        }
        Ok(Self {
            whole_d: optional_pencil(s, BoundaryCondition::Dirichlet)?,
            whole_n: optional_pencil(s, BoundaryCondition::Neumann)?,
            cells_d,
            cells_n,
        })
    }

    fn row(&self, x: f64) -> BracketRow {
        let n_d = count(&self.whole_d, x);
        let n_n = count(&self.whole_n, x);
        let cells_d: Vec<usize> = self.cells_d.iter().map(|p| count(p, x)).collect();
        let cells_n: Vec<usize> = self.cells_n.iter().map(|p| count(p, x)).collect();
        let cell_sum_d: usize = cells_d.iter().sum();
        let cell_sum_n: usize = cells_n.iter().sum();
        BracketRow {
            x,
            n_d,
            n_n,
            ok_dn: n_d <= n_n && n_n <= n_d + 2,
            ok_super: n_d >= cell_sum_d,
            ok_sub: n_n <= cell_sum_n,
            ok_crude: n_d <= 2 * cells_d.len() + cell_sum_d,
            cells_d,
            cells_n,
            cell_sum_d,
            cell_sum_n,
        }
    }
}

/// Whole-interval and per-cell counts at `x` for the partition given by
/// `cuts` (strictly inside the interval, none on an atom).
pub fn partition_counts(s: &KreinString, cuts: &[f64], x: f64) -> Result<BracketRow> {
    check_threshold(x)?;
    Ok(Partition::new(s, cuts)?.row(x))
}

/// `N_D(whole) ≤ 2 (#cells) + Σ N_D(cell)`.
pub fn crude_bound_check(s: &KreinString, cuts: &[f64], x: f64) -> Result<bool> {
    Ok(partition_counts(s, cuts, x)?.ok_crude)
}

fn check_threshold(x: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(KreinError::Domain(format!("threshold must be finite and >= 0, got {x}")));
    }
    Ok(())
}

/// Counts over a grid of thresholds with a log of every violated inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketReport {
    pub cuts: Vec<f64>,
    pub rows: Vec<BracketRow>,
    pub violations: Vec<String>,
}

impl BracketReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Columns `x,N_D,N_N,cell_sum_d,cell_sum_n,ok_dn,ok_super,ok_sub,ok_crude`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "x", "N_D", "N_N", "cell_sum_d", "cell_sum_n", "ok_dn", "ok_super", "ok_sub", "ok_crude",
        ])?;
        for r in &self.rows {
            w.write_record([
                format!("{:?}", r.x),
                r.n_d.to_string(),
                r.n_n.to_string(),
                r.cell_sum_d.to_string(),
                r.cell_sum_n.to_string(),
                r.ok_dn.to_string(),
                r.ok_super.to_string(),
                r.ok_sub.to_string(),
                r.ok_crude.to_string(),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| KreinError::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| KreinError::Serialization(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Rows for every threshold of `xs` (sorted on output).
pub fn bracket_report(s: &KreinString, cuts: &[f64], xs: &[f64]) -> Result<BracketReport> {
    let mut xs = xs.to_vec();
    for x in &xs {
        check_threshold(*x)?;
    }
    xs.sort_by(f64::total_cmp);
    let partition = Partition::new(s, cuts)?;
    let rows: Vec<BracketRow> = xs.par_iter().map(|&x| partition.row(x)).collect();
    let violations = rows.iter().flat_map(BracketRow::violations).collect();
    Ok(BracketReport {
        cuts: cuts.to_vec(),
        rows,
        violations,
    })
}

/// Moves `x` until the closed count no longer changes within a relative
/// window of [`JITTER`], so that `x` is safely off the spectrum.
pub fn jitter_off_spectrum(count: impl Fn(f64) -> usize, x: f64) -> f64 {
    let mut y = x;
    for _ in 0..1000 {
        if count(y * (1.0 - JITTER)) == count(y * (1.0 + JITTER)) {
            return y;
        }
        y *= 1.0 + 3.0 * JITTER;
    }
    y
}

/// `N(x)` on `s` equals `N(x / γ^{1+1/β})` on the rescaled string, for both
/// boundary conditions (Neumann only when it applies).
pub fn scaling_count_check(s: &KreinString, gamma: f64, beta: f64, x: f64) -> Result<bool> {
    check_threshold(x)?;
    let big = rescale(s, gamma, beta)?;
    let factor = gamma.powf(1.0 + 1.0 / beta);
    let mut bcs = vec![BoundaryCondition::Dirichlet];
    if !s.has_boundary_atoms() {
        bcs.push(BoundaryCondition::Neumann);
    }
    for bc in bcs {
        let small = optional_pencil(s, bc)?;
        let large = optional_pencil(&big, bc)?;
        let y = jitter_off_spectrum(|t| count(&small, t), x);
        if count(&small, y) != count(&large, y / factor) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Random test string: 1 to 50 atoms at sorted uniform positions in
/// `(0, 1)`, weights log-uniform in `[1e-2, 1e2]`, interval `[0, 1]`.
pub fn random_string<R: Rng + ?Sized>(rng: &mut R) -> KreinString {
    loop {
        let n = rng.random_range(1..=50);
        let mut pos: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).filter(|p| *p < 1.0).collect();
        pos.sort_by(f64::total_cmp);
        pos.dedup();
        if pos.is_empty() {
            continue;
        }
        let atoms = pos
            .into_iter()
            .map(|p| Atom::new(p, 10f64.powf(rng.random_range(-2.0..=2.0))))
            .collect();
        if let Ok(s) = KreinString::new(0.0, 1.0, atoms) {
            return s;
        }
    }
}

/// One to five uniform cut points avoiding the atoms of `s`.
pub fn random_cuts<R: Rng + ?Sized>(rng: &mut R, s: &KreinString) -> Vec<f64> {
    let k = rng.random_range(1..=5);
    let mut cuts = Vec::with_capacity(k);
    while cuts.len() < k {
        let c = s.left() + s.length() * rng.random::<f64>();
        let clash = c <= s.left()
            || c >= s.right()
            || s.atoms().iter().any(|a| a.pos == c)
            || cuts.contains(&c);
        if !clash {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts
}

/// Monte Carlo estimates of the five quantities ordered by the annealed
/// sandwich on `[0, 1]` trap disorder:
/// `E N_D(1) ≤ E N_D(n^{1+1/α})/n ≤ E N_N(n^{1+1/α})/n ≤ E N_N(1) ≤ E N_D(1) + 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichEstimate {
    pub alpha: f64,
    pub n: usize,
    pub samples: usize,
    pub means: [f64; 5],
    pub stderrs: [f64; 5],
    /// Each consecutive pair is ordered within three combined standard errors.
    pub ordered: bool,
}

pub fn annealed_sandwich(
    alpha: f64,
    n: usize,
    samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<SandwichEstimate> {
    if n < 1 || samples < 2 {
        return Err(KreinError::Domain("sandwich needs n >= 1 and samples >= 2".into()));
    }
    let big_x = (n as f64).powf(1.0 + 1.0 / alpha);
    let rows: Vec<[f64; 4]> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<[f64; 4]> {
            let mut stream = i;
            loop {
                let path = sample_subordinator_stream(alpha, 1.0, epsilon, seed, stream, CompensationMode::Truncate)?;
                match limit_trap_string(&path) {
                    Ok(s) => {
                        let d = assemble_pencil(&s, BoundaryCondition::Dirichlet)?;
                        let nn = assemble_pencil(&s, BoundaryCondition::Neumann)?;
                        return Ok([
                            d.count_leq(1.0) as f64,
                            d.count_leq(big_x) as f64 / n as f64,
                            nn.count_leq(big_x) as f64 / n as f64,
                            nn.count_leq(1.0) as f64,
                        ]);
                    }
                    Err(KreinError::Degenerate(_)) => stream += samples as u64 + (1u64 << 40),
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let m = rows.len() as f64;
    let mut means = [0.0; 5];
    let mut stderrs = [0.0; 5];
    for j in 0..4 {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        means[j] = mean;
        stderrs[j] = (var / m).sqrt();
    }
    means[4] = means[0] + 2.0;
    stderrs[4] = stderrs[0];
    let ordered = (0..4).all(|j| {
        means[j] <= means[j + 1] + 3.0 * (stderrs[j].powi(2) + stderrs[j + 1].powi(2)).sqrt()
    });
    Ok(SandwichEstimate {
        alpha,
        n,
        samples,
        means,
        stderrs,
        ordered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_atoms() -> KreinString {
        KreinString::new(0.0, 1.0, vec![Atom::new(1.0 / 3.0, 1.0), Atom::new(2.0 / 3.0, 1.0)])
            .unwrap()
    }

    fn ssrw(n: usize) -> KreinString {
        let atoms = (1..n).map(|k| Atom::new(k as f64, 2.0)).collect();
        KreinString::new(0.0, n as f64, atoms).unwrap()
    }

    #[test]
    fn dn_gap_examples() {
        assert_eq!(dn_gap(&two_atoms(), 5.0).unwrap(), (1, 1));
        assert_eq!(dn_gap(&two_atoms(), 0.0).unwrap(), (0, 1));
        let edge = KreinString::new(0.0, 1.0, vec![Atom::new(0.0, 1.0)]).unwrap();
        assert!(matches!(dn_gap(&edge, 1.0), Err(KreinError::Unsupported(_))));
    }

    #[test]
    fn ssrw_midpoint_cut() {
        // Halves are SSRW strings of length 4 (after dropping the atom at the
        // cut, the cut must avoid atoms, so shift it slightly).
        let s = ssrw(8);
        let row = partition_counts(&s, &[4.5], 1.0).unwrap();
        assert!(row.all_ok());
        assert!(row.n_d >= row.cell_sum_d);
        // Whole: 1 - cos(πk/8) < 1.1 exactly for k ≤ 4.
        let row = partition_counts(&s, &[4.5], 1.1).unwrap();
        assert_eq!(row.n_d, 4);
        assert!(row.all_ok());
    }

    #[test]
    fn collision_is_reported() {
        let s = ssrw(8);
        assert!(matches!(
            partition_counts(&s, &[4.0], 1.0),
            Err(KreinError::CutCollision { position }) if position == 4.0
        ));
        assert!(matches!(partition_counts(&s, &[9.0], 1.0), Err(KreinError::Contract(_))));
    }

    #[test]
    fn single_cell_is_trivial() {
        let s = two_atoms();
        for x in [0.0, 2.0, 5.0, 100.0] {
            let row = partition_counts(&s, &[], x).unwrap();
            assert_eq!(row.cell_sum_d, row.n_d);
            assert_eq!(row.cell_sum_n, row.n_n);
            assert!(crude_bound_check(&s, &[], x).unwrap());
        }
    }

    #[test]
    fn scaling_examples() {
        let s = KreinString::new(0.0, 1.0, vec![Atom::new(0.5, 1.0)]).unwrap();
        assert!(scaling_count_check(&s, 2.0, 1.0, 5.0).unwrap());
        assert!(scaling_count_check(&two_atoms(), 1.0, 0.7, 9.0).unwrap());
    }

    #[test]
    fn jitter_leaves_eigenvalue() {
        let p = assemble_pencil(&KreinString::new(0.0, 1.0, vec![Atom::new(0.5, 1.0)]).unwrap(), BoundaryCondition::Dirichlet).unwrap();
        let y = jitter_off_spectrum(|t| p.count_leq(t), 4.0);
        assert!(y > 4.0 && y < 4.0 * (1.0 + 1e-6));
        assert_eq!(jitter_off_spectrum(|t| p.count_leq(t), 5.0), 5.0);
    }

    #[test]
    fn random_instances_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let s = random_string(&mut rng);
            let cuts = random_cuts(&mut rng, &s);
            let xs: Vec<f64> = (0..12).map(|i| 10f64.powf(-1.0 + 0.5 * i as f64)).collect();
            let report = bracket_report(&s, &cuts, &xs).unwrap();
            assert!(report.is_clean(), "{:?}", report.violations);
        }
    }

    #[test]
    fn report_csv_header() {
        let r = bracket_report(&two_atoms(), &[0.5], &[5.0, 1.0]).unwrap();
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("x,N_D,N_N,cell_sum_d,cell_sum_n,ok_dn,ok_super,ok_sub,ok_crude\n"));
        assert_eq!(r.rows[0].x, 1.0);
    }
}
