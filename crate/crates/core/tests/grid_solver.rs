use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinorlab::geometry::{CatalogMetric, ChartMetric, ConformalFactor, RegularizedFactor};
use spinorlab::grid::{
    assemble_dirac, assemble_laplacian, build_grid, build_grid_with, solve_dirichlet,
    solve_dirichlet_with_source, BallGrid, DiscreteOperator, DiscreteSpinorField, SolverConfig,
    DEFAULT_MEMORY_CAP,
};
use spinorlab::spin::{apply_flat_gamma, Spinor};
use spinorlab::{Error, Point};

fn psi0() -> Spinor {
    Spinor::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
}

fn mixed_spinor() -> Spinor {
    Spinor::new(Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.5), Complex64::new(0.3, -0.3), Complex64::new(0.1, 0.4))
}

/// Smooth, supported in `|x| < a`.
fn bump(x: &Point, a: f64) -> f64 {
    let q = x.norm_squared() / (a * a);
    if q >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - q)).exp()
    }
}

/// `(1 - |x|²/a²)⁶`, C⁵ with support in `|x| < a`; its derivatives stay
/// moderate so coarse grids are already in the asymptotic range.
fn polynomial_bump(x: &Point, a: f64) -> f64 {
    let q = x.norm_squared() / (a * a);
    if q >= 1.0 {
        0.0
    } else {
        (1.0 - q).powi(6)
    }
}

fn random_interior_field(grid: &BallGrid, rng: &mut ChaCha8Rng) -> DiscreteSpinorField {
    let mut f = DiscreteSpinorField::from_fn(grid, |_| {
        Spinor::from_fn(|_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    });
    f.set_shell(grid, |_| Spinor::zeros());
    f
}

fn test_family() -> CatalogMetric {
    CatalogMetric::regularized(1.0, 1.0)
}

#[test]
fn interior_count_matches_ball_volume() {
    let g = build_grid(0.25, 4.0).unwrap();
    let expect = 4.0 / 3.0 * std::f64::consts::PI * 16f64.powi(3);
    assert!((g.n_interior() as f64 / expect - 1.0).abs() < 0.1);
    for p in 0..g.n_interior() {
        assert!(g.neighbours(p).iter().all(|&q| (q as usize) < g.n_active()));
    }
    for q in g.n_interior()..g.n_active() {
        assert!((g.position(q).norm() - 4.0).abs() <= 0.25 * 3f64.sqrt());
    }
}

#[test]
fn oversized_grid_is_refused_before_allocation() {
    match build_grid_with(0.1, 8.0, 0.0, 1 << 30) {
        Err(Error::MemoryBudget { required, cap }) => assert!(required > cap),
        other => panic!("expected refusal, got {other:?}"),
    }
    assert!(build_grid(0.5, 2.0).is_err());
    assert!(build_grid_with(0.2, 2.0, 0.0, DEFAULT_MEMORY_CAP).is_ok());
}

#[test]
fn flat_dirac_annihilates_constants() {
    let g = build_grid(0.25, 2.5).unwrap();
    let op = assemble_dirac(&CatalogMetric::Flat, &g).unwrap();
    let out = op.apply(&DiscreteSpinorField::constant(&g, mixed_spinor())).unwrap();
    assert!(out.values.iter().all(|v| v.norm() == 0.0));
}

/// Max error and max `|𝒟Ψ|` of the flat plane wave against its symbol.
fn plane_wave_error(h: f64) -> f64 {
    let g = build_grid(h, 2.0).unwrap();
    let op = assemble_dirac(&CatalogMetric::Flat, &g).unwrap();
    let k = Point::new(1.2, -0.7, 0.5);
    let s = mixed_spinor();
    let wave = |x: &Point| s * Complex64::new(0.0, k.dot(x)).exp();
    let out = op.apply(&DiscreteSpinorField::from_fn(&g, wave)).unwrap();
    let mut worst: f64 = 0.0;
    for p in 0..g.n_interior() {
        let x = g.position(p);
        // i G^j (i k_j) Ψ = -k_j γ^j Ψ
        let mut want = Spinor::zeros();
        for a in 0..3 {
            want -= apply_flat_gamma(a, &wave(&x)) * Complex64::from(k[a]);
        }
        worst = worst.max((out.values[p] - want).norm());
    }
    worst
}

#[test]
fn flat_plane_wave_matches_symbol_at_second_order() {
    let (e1, e2) = (plane_wave_error(0.2), plane_wave_error(0.1));
    let k3 = Point::new(1.2, -0.7, 0.5).norm().powi(3);
    assert!(e1 < 0.2 * 0.2 * k3, "{e1}");
    assert!((3.4..=4.6).contains(&(e1 / e2)), "ratio {}", e1 / e2);
}

#[test]
fn laplacian_is_hermitian_and_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for metric in [CatalogMetric::Flat, test_family()] {
        let g = build_grid(0.25, 2.5).unwrap();
        let op = assemble_laplacian(&metric, &g).unwrap();
        let u = random_interior_field(&g, &mut rng);
        let v = random_interior_field(&g, &mut rng);
        let lu = op.apply(&u).unwrap();
        let lv = op.apply(&v).unwrap();
        let defect = (op.inner(&lu, &v) - op.inner(&u, &lv)).norm() / (op.norm(&u) * op.norm(&v));
        assert!(defect < 1e-8, "{}: {defect:e}", metric.label());
    }
    let g = build_grid(0.25, 2.5).unwrap();
    let op = assemble_laplacian(&test_family(), &g).unwrap();
    let mut smallest = f64::INFINITY;
    for _ in 0..50 {
        let u = random_interior_field(&g, &mut rng);
        let ritz = op.inner(&op.apply(&u).unwrap(), &u).re / op.inner(&u, &u).re;
        smallest = smallest.min(ritz);
    }
    assert!(smallest >= -1e-6, "{smallest}");
}

#[test]
fn dirac_adjoint_is_exact_and_dirac_is_skew_to_second_order() {
    let metric = test_family();
    let a = Spinor::new(Complex64::new(0.3, 0.2), Complex64::new(1.0, 0.0), Complex64::new(0.0, -0.5), Complex64::new(0.2, 0.2));
    let b = mixed_spinor();
    let skew = |h: f64| {
        let g = build_grid(h, 3.0).unwrap();
        let op = assemble_dirac(&metric, &g).unwrap();
        let u = DiscreteSpinorField::from_fn(&g, |x| a * Complex64::new(bump(x, 2.2), 0.0));
        let v = DiscreteSpinorField::from_fn(&g, |x| b * (Complex64::new(0.0, x.x).exp() * bump(&(x - Point::new(0.3, 0.0, 0.0)), 2.0)));
        let du = op.apply(&u).unwrap();
        let adj = op.apply_adjoint(&v).unwrap();
        let exact = (op.inner(&du, &v) - op.inner(&u, &adj)).norm();
        assert!(exact < 1e-12, "{exact:e}");
        (op.inner(&du, &v) + op.inner(&u, &op.apply(&v).unwrap())).norm()
    };
    let (s1, s2) = (skew(0.2), skew(0.1));
    assert!((3.4..=4.6).contains(&(s1 / s2)), "ratio {}", s1 / s2);
}

#[test]
fn green_identity_balances() {
    let g = build_grid(0.2, 2.5).unwrap();
    let op = assemble_laplacian(&test_family(), &g).unwrap();
    let f = DiscreteSpinorField::from_fn(&g, |x| mixed_spinor() * (Complex64::new(0.0, 0.7 * x.y).exp() * (1.0 + x.x)));
    let gi = op.green_identity(&f).unwrap();
    assert!(gi.residual < 1e-10 * gi.inner.abs().max(1.0), "{gi:?}");
    assert!(gi.flux.abs() > 0.0 && gi.dirichlet > 0.0 && gi.potential > 0.0);
}

#[test]
fn weitzenboeck_defect_is_second_order() {
    let metric = test_family();
    let defect = |h: f64| {
        let g = build_grid(h, 3.0).unwrap();
        let op = assemble_laplacian(&metric, &g).unwrap();
        let f = DiscreteSpinorField::from_fn(&g, |x| mixed_spinor() * Complex64::new(polynomial_bump(x, 2.4), 0.0));
        op.weitzenboeck_defect(&f).unwrap()
    };
    let (d1, d2) = (defect(0.2), defect(0.1));
    assert!((3.4..=4.6).contains(&(d1 / d2)), "{d1:e} {d2:e} ratio {}", d1 / d2);
}

#[test]
fn flat_constant_boundary_gives_constant_solution() {
    let g = build_grid(0.25, 2.5).unwrap();
    let op = assemble_laplacian(&CatalogMetric::Flat, &g).unwrap();
    let data = DiscreteSpinorField::constant(&g, mixed_spinor());
    let (sol, rep) = solve_dirichlet(&op, &data, &SolverConfig::default()).unwrap();
    assert_eq!(rep.iterations(), 0);
    assert_eq!(sol, data);
}

fn annulus_error(h: f64) -> f64 {
    let g = build_grid_with(h, 2.4, 0.5, DEFAULT_MEMORY_CAP).unwrap();
    let op = assemble_laplacian(&CatalogMetric::Flat, &g).unwrap();
    let exact = |x: &Point| mixed_spinor() * Complex64::from(1.0 + 1.0 / x.norm());
    let mut data = DiscreteSpinorField::constant(&g, mixed_spinor());
    data.set_shell(&g, exact);
    let cfg = SolverConfig { tol: 1e-11, max_iters: 10000 };
    let (sol, _) = solve_dirichlet(&op, &data, &cfg).unwrap();
    sol.max_abs_difference(&DiscreteSpinorField::from_fn(&g, exact), 0..g.n_interior())
}

#[test]
fn annulus_falloff_spinor_is_recovered_at_second_order() {
    let (e1, e2) = (annulus_error(0.1), annulus_error(0.05));
    assert!((3.4..=4.6).contains(&(e1 / e2)), "{e1:e} {e2:e} ratio {}", e1 / e2);
}

fn conformal_error(h: f64) -> f64 {
    let (m, eps, r) = (0.5, 1.0, 3.0);
    let metric = CatalogMetric::regularized(m, eps);
    let u = RegularizedFactor { mass: m, eps };
    let grid = build_grid(h, r).unwrap();
    let op = assemble_laplacian(&metric, &grid).unwrap();
    let exact = DiscreteSpinorField::from_fn(&grid, |x: &Point| psi0() * Complex64::from(u.value(x).powi(-2)));
    let mut guess = DiscreteSpinorField::constant(&grid, psi0());
    guess.set_shell(&grid, |x| psi0() * Complex64::from(u.value(x).powi(-2)));
    let (sol, _) = solve_dirichlet(&op, &guess, &SolverConfig { tol: 1e-10, max_iters: 10000 }).unwrap();
    sol.max_abs_difference(&exact, 0..grid.n_interior())
}

#[test]
fn conformal_exact_solution_second_order() {
    let (e1, e2) = (conformal_error(0.2), conformal_error(0.1));
    assert!((3.4..=4.6).contains(&(e1 / e2)), "ratio {}", e1 / e2);
}

fn manufactured_error(h: f64) -> f64 {
    // flat: L = -Δ, and -Δ e^{-r²} = (6 - 4r²) e^{-r²}
    let g = build_grid(h, 2.5).unwrap();
    let op = assemble_laplacian(&CatalogMetric::Flat, &g).unwrap();
    let s = mixed_spinor();
    let exact = |x: &Point| s * Complex64::from((-x.norm_squared()).exp());
    let source = DiscreteSpinorField::from_fn(&g, |x| {
        let r2 = x.norm_squared();
        s * Complex64::from((6.0 - 4.0 * r2) * (-r2).exp())
    });
    let mut data = DiscreteSpinorField::zeros(&g);
    data.set_shell(&g, exact);
    let cfg = SolverConfig { tol: 1e-11, max_iters: 10000 };
    let (sol, _) = solve_dirichlet_with_source(&op, &data, Some(&source), &cfg).unwrap();
    sol.max_abs_difference(&DiscreteSpinorField::from_fn(&g, exact), 0..g.n_interior())
}

#[test]
fn manufactured_source_problem_second_order() {
    let (e1, e2) = (manufactured_error(0.2), manufactured_error(0.1));
    assert!((3.4..=4.6).contains(&(e1 / e2)), "{e1:e} {e2:e} ratio {}", e1 / e2);
}

#[test]
fn residual_history_is_monotone_and_solves_are_deterministic() {
    let metric = CatalogMetric::regularized(0.1, 1.0);
    let g = build_grid(0.25, 4.0).unwrap();
    let op = assemble_laplacian(&metric, &g).unwrap();
    let data = DiscreteSpinorField::constant(&g, mixed_spinor());
    let cfg = SolverConfig { tol: 1e-8, max_iters: 20000 };
    let (a, rep) = solve_dirichlet(&op, &data, &cfg).unwrap();
    assert!(rep.converged && rep.relative_residual <= 1e-8);
    assert_eq!(rep.blocks.len(), 2);
    for b in &rep.blocks {
        assert!(b.history.windows(2).all(|w| w[1] <= w[0]), "block {}", b.block);
    }
    let (b, _) = solve_dirichlet(&op, &data, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exhausted_iterations_report_the_history() {
    let g = build_grid(0.25, 4.0).unwrap();
    let op = assemble_laplacian(&test_family(), &g).unwrap();
    let data = DiscreteSpinorField::constant(&g, psi0());
    match solve_dirichlet(&op, &data, &SolverConfig { tol: 1e-8, max_iters: 3 }) {
        Err(Error::NonConvergence { iterations, history, .. }) => {
            assert_eq!(iterations, 3);
            assert_eq!(history.len(), 4);
        }
        other => panic!("expected non-convergence, got {other:?}"),
    }
    let _: &DiscreteOperator = &op;
}
