use krein::disorder::{
    barrier_string, coupled_convergence, expected_jump_count, general_coupling, limit_barrier_string,
    limit_trap_string, sample_subordinator, sample_subordinator_stream, stable_constant,
    trap_string, annealed_counting, v1_quantile_table, CompensationMode, DisorderVariant,
    QuantileCoupling,
};
use krein::eigensolver::{eigenvalues_only, BoundaryCondition, DEFAULT_TOL};
use krein::numeric::log_grid;
use krein::stats::{ks_one_sample, ks_two_sample, mean_stderr};
use rayon::prelude::*;

#[test]
fn jump_count_matches_intensity() {
    let counts: Vec<f64> = (0..4000u64)
        .into_par_iter()
        .map(|i| {
            sample_subordinator_stream(0.5, 1.0, 1e-4, 2, i, CompensationMode::Truncate)
                .unwrap()
                .jumps
                .len() as f64
        })
        .collect();
    let (m, se) = mean_stderr(&counts);
    let want = expected_jump_count(0.5, 1.0, 1e-4);
    assert!((want - 56.42).abs() < 0.01);
    assert!((stable_constant(0.5) - 0.28209).abs() < 1e-5);
    assert!((m - want).abs() <= 3.0 * se, "{m} vs {want} (se {se})");
}

#[test]
fn self_similarity_in_law() {
    let (alpha, gamma, eps): (f64, f64, f64) = (0.6, 2.0, 1e-5);
    for x in [0.25, 0.5, 1.0] {
        let a: Vec<f64> = (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                sample_subordinator_stream(alpha, 1.0, eps, 40, i, CompensationMode::Truncate)
                    .unwrap()
                    .value(x)
            })
            .collect();
        let b: Vec<f64> = (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                let p = sample_subordinator_stream(alpha, 1.0, eps, 41, i, CompensationMode::Truncate).unwrap();
                gamma.powf(1.0 / alpha) * p.value(x / gamma)
            })
            .collect();
        let r = ks_two_sample(&a, &b);
        assert!(r.p_value > 0.01, "x={x}: {r:?}");
    }
}

#[test]
fn quantile_coupling_reproduces_target_law() {
    // Small enough that an empty bin (an atom of the increment law at 0) is
    // vanishingly rare.
    let (alpha, n, eps) = (0.5, 16usize, 1e-7);
    let scaled_eps = (n as f64).powf(1.0 / alpha) * eps;
    let table = v1_quantile_table(alpha, 100_000, scaled_eps, 77).unwrap();
    let target_alpha = 0.7;
    let coupling = QuantileCoupling::new(table, move |p| (1.0 - p).powf(-1.0 / target_alpha)).unwrap();
    let taus: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let p = sample_subordinator_stream(alpha, 1.0, eps, 78, i, CompensationMode::Truncate).unwrap();
            general_coupling(&p, n, &coupling).unwrap().tau[0]
        })
        .collect();
    let r = ks_one_sample(&taus, |t| if t < 1.0 { 0.0 } else { 1.0 - t.powf(-target_alpha) });
    assert!(r.p_value > 0.01, "{r:?}");
}

#[test]
fn discrete_strings_converge_to_limits() {
    let path = sample_subordinator(0.5, 2.0, 1e-6, 12, CompensationMode::Truncate).unwrap();
    for variant in [DisorderVariant::Trap, DisorderVariant::Barrier] {
        let limit = variant.limit_string(&path).unwrap();
        let l1 = eigenvalues_only(&limit, BoundaryCondition::Dirichlet, Some(1), DEFAULT_TOL).unwrap()[0];
        let gaps: Vec<f64> = [64usize, 512, 4096, 32768]
            .iter()
            .map(|&n| {
                let s = match variant {
                    DisorderVariant::Trap => trap_string(&path, n).unwrap(),
                    DisorderVariant::Barrier => barrier_string(&path, n).unwrap(),
                };
                (eigenvalues_only(&s, BoundaryCondition::Dirichlet, Some(1), DEFAULT_TOL).unwrap()[0] - l1).abs()
            })
            .collect();
        assert!(gaps[3] < gaps[0], "{variant:?}: {gaps:?}");
        assert!(gaps[3] < 1e-2 * l1, "{variant:?}: {gaps:?} vs {l1}");
    }
    let conv = coupled_convergence(&path, DisorderVariant::Trap, &[64, 4096], 2).unwrap();
    assert_eq!(conv.points.len(), 2);
}

#[test]
fn limit_masses() {
    let p = sample_subordinator(0.3, 1.0, 1e-6, 5, CompensationMode::Truncate).unwrap();
    let t = limit_trap_string(&p).unwrap();
    let want: f64 = p.jumps.iter().filter(|j| j.pos < 1.0).map(|j| j.size).sum();
    assert!((t.total_mass() - want).abs() <= 1e-12 * want);
    let b = limit_barrier_string(&p).unwrap();
    assert!((b.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn annealed_mean_is_monotone() {
    let c = annealed_counting(0.5, &log_grid(1.0, 1e4, 12), 40, 100_000, 1e-4, 3).unwrap();
    assert!(c.mean.windows(2).all(|w| w[0] <= w[1]));
    assert!(c.stderr.iter().all(|s| *s >= 0.0));
    assert_eq!(c.samples, 40);
    assert!(annealed_counting(0.5, &[1.0], 10, 100_000, 1e-4, 3).is_err());
    assert!(annealed_counting(0.5, &[1.0], 40, 10, 1e-4, 3).is_err());
    // Reproducible regardless of thread scheduling.
    let again = annealed_counting(0.5, &log_grid(1.0, 1e4, 12), 40, 100_000, 1e-4, 3).unwrap();
    assert_eq!(c, again);
}

#[test]
fn trap_normalization_with_positive_exponent() {
    use krein::disorder::{diffusive_check, UniformTau};
    let t = diffusive_check(&UniformTau { lo: 1.0, hi: 2.0 }, 0.5, 4096, 3, 1).unwrap();
    for r in &t.rows {
        assert!((r.trap_homogenized / r.target - 1.0).abs() < 0.03, "{r:?}");
        // A single power of the negative moment misses by a factor E(τ^{-a}).
        assert!((r.trap / r.target - 1.0).abs() > 0.1, "{r:?}");
    }
}
