use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinorlab::geometry::{
    adm_mass, curvature, decay_audit, isoperimetric_estimate, scalar_curvature, CatalogMetric,
    ChartMetric, CurvatureBundle, FiniteDifferenceMetric,
};
use spinorlab::Point;

fn catalog() -> Vec<CatalogMetric> {
    vec![
        CatalogMetric::Flat,
        CatalogMetric::isotropic(0.8),
        CatalogMetric::regularized(0.5, 1.0),
        CatalogMetric::from_name("bump", &Default::default()).unwrap(),
    ]
}

fn random_point(rng: &mut ChaCha8Rng, r_lo: f64, r_hi: f64) -> Point {
    loop {
        let p = Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = p.norm();
        if n > 1e-3 && n <= 1.0 {
            return p / n * rng.random_range(r_lo..r_hi);
        }
    }
}

fn riemann_difference(a: &CurvatureBundle, b: &CurvatureBundle) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    s += (a.riemann[i][j][k][l] - b.riemann[i][j][k][l]).powi(2);
                }
            }
        }
    }
    s.sqrt()
}

#[test]
fn analytic_curvature_matches_fourth_order_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for metric in catalog() {
        let lo = if metric.excluded_radius() > 0.0 || metric.family() == "isotropic" { 0.6 } else { 0.0 };
        for _ in 0..100 {
            let x = random_point(&mut rng, lo, 4.0);
            let oracle = FiniteDifferenceMetric::new(metric.clone(), 5e-4);
            let a = curvature(&metric, &x, false).unwrap();
            let b = curvature(&oracle, &x, false).unwrap();
            let scale = a.riemann_norm().max(1e-3);
            let rel = riemann_difference(&a, &b) / scale;
            assert!(rel < 1e-6, "{} at {x:?}: relative {rel:e}", metric.label());
            assert!(a.symmetry_residual() < 1e-10, "{}", metric.label());
            assert!(a.bianchi_residual() < 1e-10, "{}", metric.label());
        }
    }
}

#[test]
fn difference_oracle_converges_at_fourth_order() {
    let metric = CatalogMetric::regularized(0.5, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let x = random_point(&mut rng, 0.2, 2.5);
        let exact = curvature(&metric, &x, false).unwrap();
        let e1 = riemann_difference(&exact, &curvature(&FiniteDifferenceMetric::new(metric.clone(), 0.08), &x, false).unwrap());
        let e2 = riemann_difference(&exact, &curvature(&FiniteDifferenceMetric::new(metric.clone(), 0.04), &x, false).unwrap());
        assert!(e1 / e2 >= 12.0, "ratio {} at {x:?}", e1 / e2);
    }
}

#[test]
fn isotropic_kretschmann_matches_areal_radius_form() {
    let m = 0.8;
    let metric = CatalogMetric::isotropic(m);
    for r in [0.5, 1.0, 2.7, 9.0] {
        let x = Point::new(0.6, -0.48, 0.64) * r;
        let areal = r * (1.0 + m / (2.0 * r)).powi(2);
        // sectional curvatures -m/ρ³, -m/ρ³, 2m/ρ³ in the areal radius ρ
        let want = 24.0 * m * m / areal.powi(6);
        let b = curvature(&metric, &x, false).unwrap();
        assert!((b.kretschmann - want).abs() < 1e-10 * want, "{} vs {want}", b.kretschmann);
        assert!(b.scalar.abs() < 1e-12 * want.sqrt());
    }
}

#[test]
fn regularized_scalar_curvature_matches_conformal_form() {
    let (m, eps) = (0.5, 1.0);
    let metric = CatalogMetric::regularized(m, eps);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let x = random_point(&mut rng, 0.0, 5.0);
        let rho2 = x.norm_squared() + eps * eps;
        let u = 1.0 + m / (2.0 * rho2.sqrt());
        let want = 12.0 * m * eps * eps / (u.powi(5) * rho2.powf(2.5));
        let got = scalar_curvature(&metric, &x).unwrap();
        assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn adm_mass_of_regularized_family_and_flat_space() {
    for m in [0.05, 0.1, 0.5] {
        let report = adm_mass(&CatalogMetric::regularized(m, 1.0), &[20.0, 40.0, 80.0]).unwrap();
        let rel = (report.extrapolated_mass - m).abs() / m;
        assert!(rel < 0.02, "m={m}: {} ({rel:e})", report.extrapolated_mass);
        assert!(report.reliable);
    }
    let flat = adm_mass(&CatalogMetric::Flat, &[20.0, 40.0, 80.0]).unwrap();
    assert!(flat.extrapolated_mass.abs() < 1e-8);
    let bump = adm_mass(&CatalogMetric::from_name("bump", &Default::default()).unwrap(), &[10.0, 20.0]).unwrap();
    assert!(bump.extrapolated_mass.abs() < 1e-8);
}

#[test]
fn catalog_metrics_pass_the_decay_audit() {
    for metric in catalog() {
        let audit = decay_audit(&metric, 20.0).unwrap();
        assert!(audit.passed, "{}: {audit:?}", metric.label());
    }
}

#[test]
fn flat_isoperimetric_ratio_is_that_of_the_round_ball() {
    let est = isoperimetric_estimate(&CatalogMetric::Flat, &[0.5, 1.0, 4.0]).unwrap();
    let k = (36.0 * std::f64::consts::PI).cbrt();
    assert!((est.k_hat - k).abs() < 1e-8 * k, "{} vs {k}", est.k_hat);
    let curved = isoperimetric_estimate(&CatalogMetric::regularized(0.5, 1.0), &[0.5, 1.0, 4.0]).unwrap();
    assert!(curved.k_hat.is_finite() && curved.k_hat > 0.0);
    assert!(isoperimetric_estimate(&CatalogMetric::isotropic(1.0), &[1.0]).is_err());
}
