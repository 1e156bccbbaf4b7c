use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use spinorlab::estimates::{
    lemma1_field, lemma1_pointwise, mass_sweep, theorem_sides, WeightFunction, ISOPERIMETRIC_RADII,
};
use spinorlab::geometry::{isoperimetric_estimate, BumpMetric, CatalogMetric};
use spinorlab::grid::DiscreteSpinorField;
use spinorlab::spin::{signature, Spinor};
use spinorlab::witten::{
    exceptional_set, mass_identity, solve_witten, subharmonicity_check, WittenConfig, WittenSolution,
};

fn up() -> Spinor {
    Spinor::new(Complex64::new(1.0, 0.0), 0.0.into(), 0.0.into(), 0.0.into())
}

fn swap_blocks(s: &Spinor) -> Spinor {
    Spinor::new(s[2], s[3], s[0], s[1])
}

fn test_family() -> CatalogMetric {
    CatalogMetric::regularized(0.1, 1.0)
}

fn coarse_solution() -> &'static WittenSolution {
    static SOL: OnceLock<WittenSolution> = OnceLock::new();
    SOL.get_or_init(|| solve_witten(&test_family(), &WittenConfig::sweep(0.25, 4.0), up()).unwrap())
}

#[test]
fn flat_space_has_the_constant_solution_and_no_energy() {
    let metric = CatalogMetric::Flat;
    let sol = solve_witten(&metric, &WittenConfig::sweep(0.25, 3.0), up()).unwrap();
    assert!(sol.field.values.iter().all(|v| *v == up()));
    let ledger = mass_identity(&sol, 0.0);
    assert_eq!(ledger.dirichlet, 0.0);
    assert_eq!(ledger.potential, 0.0);
    assert_eq!(ledger.identity_gap, 0.0);
    assert_eq!(subharmonicity_check(&sol).worst_violation, 0.0);
    assert_eq!(exceptional_set(&sol, 0.5, 4.8, 0.0).unwrap().volume, 0.0);
    let n = sol.grid.n_half as i64;
    let node = sol.grid.lookup([n, n, n]).unwrap();
    assert_eq!(lemma1_pointwise(&metric, &sol, node).unwrap(), Some((0.0, 0.0)));
    let report = theorem_sides(&metric, &WeightFunction::ConstantOne, &sol, 0.5, 4.8, 0.0).unwrap();
    assert_eq!(report.lhs, 0.0);
    assert!(report.vol_d_ok);
}

#[test]
fn solutions_are_equivariant_under_block_swap_and_signature() {
    let metric = test_family();
    let cfg = WittenConfig::single(0.25, 4.0);
    let psi0 = Spinor::new(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.48), Complex64::new(0.0, 0.0), Complex64::new(0.64, 0.0));
    let a = solve_witten(&metric, &cfg, psi0).unwrap();
    let b = solve_witten(&metric, &cfg, swap_blocks(&psi0)).unwrap();
    let swapped = DiscreteSpinorField {
        grid: a.field.grid,
        values: a.field.values.iter().map(swap_blocks).collect(),
    };
    assert!(b.field.max_abs_difference(&swapped, 0..a.grid.n_active()) <= 10.0 * cfg.solver.tol);
    let s = signature();
    let c = solve_witten(&metric, &cfg, s * psi0).unwrap();
    let rotated = DiscreteSpinorField {
        grid: a.field.grid,
        values: a.field.values.iter().map(|v| s * v).collect(),
    };
    assert!(c.field.max_abs_difference(&rotated, 0..a.grid.n_active()) <= 10.0 * cfg.solver.tol);
}

#[test]
fn coarse_test_family_satisfies_the_spinor_bounds() {
    let sol = coarse_solution();
    let m = 0.1;
    assert!(sol.sup_bound_ok && sol.max_density <= 1.0 + 1e-3);
    assert!(sol.field.density().iter().all(|f| *f >= 0.0));
    let ledger = mass_identity(sol, m);
    assert!(ledger.positive_energy_ok, "{ledger:?}");
    assert!(ledger.identity_gap <= 0.05, "gap {}", ledger.identity_gap);
    assert!(ledger.f_gradient_energy <= 16.0 * PI * m * 1.10);
    let sub = subharmonicity_check(sol);
    assert!(sub.worst_violation >= -1e-3, "{sub:?}");
    assert!(sub.max_on_boundary);
    let k_hat = isoperimetric_estimate(&test_family(), &ISOPERIMETRIC_RADII).unwrap().k_hat;
    let ex = exceptional_set(sol, 0.5, k_hat, m).unwrap();
    assert!(ex.holds && ex.volume == 0.0);
    assert!(ex.sobolev_lhs <= ex.sobolev_rhs);
    for run in &sol.runs {
        assert!(run.green_residual < 1e-10);
    }
}

#[test]
fn dirac_residual_decreases_under_refinement() {
    let metric = test_family();
    let core = |h: f64| solve_witten(&metric, &WittenConfig::single(h, 4.0), up()).unwrap().runs[0].dirac_residual_core;
    let (r1, r2) = (core(0.25), core(0.125));
    let ratio = r1 / r2;
    assert!((1.8..=4.6).contains(&ratio), "{r1:e} {r2:e} ratio {ratio}");
}

#[test]
fn pointwise_curvature_estimate_holds_on_the_coarse_solution() {
    let sol = coarse_solution();
    let report = lemma1_field(&test_family(), sol).unwrap();
    assert!(report.nodes_checked > 100_000);
    assert!(report.fraction_within >= 0.99, "{report:?}");
    assert!(report.min_rhs >= 0.0);
}

#[test]
fn theorem_sides_are_finite_and_ordered() {
    let sol = coarse_solution();
    let metric = test_family();
    let k_hat = isoperimetric_estimate(&metric, &ISOPERIMETRIC_RADII).unwrap().k_hat;
    let one = theorem_sides(&metric, &WeightFunction::ConstantOne, sol, 0.5, k_hat, 0.1).unwrap();
    assert!(one.sup_riemann.is_finite() && one.sup_riemann > 0.0);
    assert!(one.l2_term.is_finite() && one.l2_term > 0.0);
    assert_eq!(one.sup_laplacian_eta, 0.0);
    assert!(one.lhs > 0.0 && one.lhs <= one.lhs_full);
    let eta = WeightFunction::RadialBump { inner: 2.0, outer: 4.0 };
    let bump = theorem_sides(&metric, &eta, sol, 0.5, k_hat, 0.1).unwrap();
    assert!(bump.sup_laplacian_eta > bump.sup_riemann);
    assert!(bump.lhs <= one.lhs);
    assert!(bump.vol_d.cbrt() <= bump.bound_d);
}

#[test]
fn sweep_marks_failed_rows_and_validates_masses() {
    let cfg = WittenConfig::single(0.25, 3.0);
    let eta = WeightFunction::ConstantOne;
    assert!(mass_sweep(|m| CatalogMetric::regularized(m, 1.0), &[0.1, 0.2], &cfg, &eta, up(), |_, _, _| {}).is_err());
    assert!(mass_sweep(|m| CatalogMetric::regularized(m, 1.0), &[0.1, -0.1], &cfg, &eta, up(), |_, _, _| {}).is_err());
    // negative amplitude makes the scalar curvature negative somewhere
    let family = |m: f64| {
        if m < 0.15 {
            CatalogMetric::Bump(BumpMetric::new(-0.3, 1.5))
        } else {
            CatalogMetric::regularized(m, 1.0)
        }
    };
    let mut seen = Vec::new();
    let table = mass_sweep(family, &[0.2, 0.1], &cfg, &eta, up(), |m, _, _| seen.push(m)).unwrap();
    assert_eq!(seen, vec![0.2]);
    assert!(table.rows[0].ok());
    assert!(!table.rows[1].ok());
    assert!(table.rows[1].error.as_deref().unwrap().contains("scalar curvature"));
}
