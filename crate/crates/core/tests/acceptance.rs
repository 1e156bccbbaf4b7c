//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use spinorlab::estimates::{lemma1_field, mass_sweep, Lemma1Report, SweepTable, WeightFunction};
use spinorlab::geometry::{adm_mass, oracle_audit, sample_shell, BumpMetric, CatalogMetric, ChartMetric};
use spinorlab::grid::io::{write_field, write_slice_csv};
use spinorlab::grid::{assemble_laplacian, build_grid, DiscreteSpinorField};
use spinorlab::spin::{spin_audit, Spinor};
use spinorlab::witten::{
    exceptional_set, mass_identity, solve_witten, subharmonicity_check, EnergyLedger, ExceptionalSet,
    SubharmonicityReport, WittenConfig,
};
use spinorlab::Point;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn up() -> Spinor {
    Spinor::new(Complex64::new(1.0, 0.0), 0.0.into(), 0.0.into(), 0.0.into())
}

fn catalog() -> Vec<CatalogMetric> {
    vec![
        CatalogMetric::Flat,
        CatalogMetric::isotropic(1.0),
        CatalogMetric::regularized(1.0, 1.0),
        CatalogMetric::regularized(0.1, 1.0),
        CatalogMetric::Bump(BumpMetric::default()),
    ]
}

fn inner_radius(metric: &CatalogMetric) -> f64 {
    if metric.family() == "isotropic" {
        0.6
    } else {
        0.0
    }
}

fn geometry_oracle() -> Verdict {
    let mut worst = (0.0f64, 0.0f64);
    let mut notes = Vec::new();
    let mut ok = true;
    for (seed, metric) in catalog().into_iter().enumerate() {
        let points = sample_shell(100 + seed as u64, 100, inner_radius(&metric), 4.0);
        let a = oracle_audit(&metric, &points, 5e-4).unwrap();
        ok &= a.passed(1e-6, 1e-10);
        worst.0 = worst.0.max(a.max_relative);
        worst.1 = worst.1.max(a.max_symmetry.max(a.max_bianchi));
        notes.push(format!("{} {:.1e}", a.family, a.max_relative));
    }
    verdict(ok, format!("max relative {:.2e} (< 1e-6), identities {:.1e} (< 1e-10) [{}]", worst.0, worst.1, notes.join("; ")))
}

fn adm() -> Verdict {
    let radii = [20.0, 40.0, 80.0];
    let mut ok = true;
    let mut notes = Vec::new();
    for m in [0.05, 0.1, 0.5] {
        let r = adm_mass(&CatalogMetric::regularized(m, 1.0), &radii).unwrap();
        let rel = (r.extrapolated_mass - m).abs() / m;
        ok &= rel < 0.02;
        notes.push(format!("m={m}: {:.6} (rel {rel:.1e})", r.extrapolated_mass));
    }
    let flat = adm_mass(&CatalogMetric::Flat, &radii).unwrap().extrapolated_mass;
    ok &= flat.abs() < 1e-8;
    notes.push(format!("flat {flat:.1e}"));
    verdict(ok, notes.join(", "))
}

fn spin() -> Verdict {
    let mut ok = true;
    let (mut anti, mut compat, mut ratios) = (0.0f64, 0.0f64, Vec::new());
    for (seed, metric) in catalog().into_iter().enumerate() {
        let points = sample_shell(200 + seed as u64, 200, inner_radius(&metric).max(0.3), 5.0);
        let cp = match &metric {
            CatalogMetric::Bump(b) => b.center + Point::new(0.3 * b.radius, 0.2 * b.radius, 0.0),
            _ => Point::new(2.0, 0.0, 0.0),
        };
        let a = spin_audit(&metric, &points, &cp).unwrap();
        ok &= a.anticommutation < 1e-12 && a.metric_compatibility < 1e-8 && a.product_compatibility < 1e-8;
        ok &= a.curvature_converges();
        anti = anti.max(a.anticommutation);
        compat = compat.max(a.metric_compatibility.max(a.product_compatibility));
        if a.curvature_residuals[0] >= 1e-12 {
            ratios.push(format!("{} {:.3}", a.family, a.curvature_ratio));
        }
    }
    verdict(
        ok,
        format!("anticommutation {anti:.1e} (< 1e-12), connection {compat:.1e} (< 1e-8), curvature ratios [{}] (in [3.4, 4.6])", ratios.join("; ")),
    )
}

/// `(1 - |x|²/a²)⁶`, supported in `|x| < a`.
fn polynomial_bump(x: &Point, a: f64) -> f64 {
    let q = x.norm_squared() / (a * a);
    if q >= 1.0 {
        0.0
    } else {
        (1.0 - q).powi(6)
    }
}

fn weitzenboeck() -> Verdict {
    let spinor = Spinor::new(Complex64::new(0.6, 0.1), Complex64::new(-0.2, 0.5), Complex64::new(0.3, -0.3), Complex64::new(0.1, 0.4));
    let mut ok = true;
    let mut notes = Vec::new();
    for metric in [CatalogMetric::Flat, CatalogMetric::regularized(1.0, 1.0), CatalogMetric::regularized(0.1, 1.0)] {
        let defect = |h: f64| {
            let g = build_grid(h, 3.0).unwrap();
            let op = assemble_laplacian(&metric, &g).unwrap();
            let f = DiscreteSpinorField::from_fn(&g, |x| spinor * Complex64::new(polynomial_bump(x, 2.4), 0.0));
            op.weitzenboeck_defect(&f).unwrap()
        };
        let ratio = defect(0.2) / defect(0.1);
        ok &= (3.4..=4.6).contains(&ratio);
        notes.push(format!("{} {ratio:.3}", metric.label()));
    }
    verdict(ok, format!("halving ratios [{}] (in [3.4, 4.6])", notes.join("; ")))
}

/// Per-mass diagnostics gathered while sweeping.
struct MassRecord {
    m: f64,
    ledger: EnergyLedger,
    exceptional: ExceptionalSet,
    sub: Option<SubharmonicityReport>,
    max_density: f64,
    lemma1: Option<Lemma1Report>,
}

struct Sweep {
    h: f64,
    table: SweepTable,
    records: Vec<MassRecord>,
}

const MASSES: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const FOCUS_MASS: f64 = 0.1;

fn sweep(h: f64) -> Sweep {
    let cfg = WittenConfig::sweep(h, 4.0);
    let mut records = Vec::new();
    let table = mass_sweep(
        |m| CatalogMetric::regularized(m, 1.0),
        &MASSES,
        &cfg,
        &WeightFunction::ConstantOne,
        up(),
        |m, metric, sol| {
            let k_hat = spinorlab::geometry::isoperimetric_estimate(metric, &spinorlab::estimates::ISOPERIMETRIC_RADII).unwrap().k_hat;
            let focus = m == FOCUS_MASS;
            records.push(MassRecord {
                m,
                ledger: mass_identity(sol, m),
                exceptional: exceptional_set(sol, 0.5, k_hat, m).unwrap(),
                sub: focus.then(|| subharmonicity_check(sol)),
                max_density: sol.max_density,
                lemma1: focus.then(|| lemma1_field(metric, sol).unwrap()),
            });
        },
    )
    .unwrap();
    Sweep { h, table, records }
}

fn focus(s: &Sweep) -> &MassRecord {
    s.records.iter().find(|r| r.m == FOCUS_MASS).expect("focus mass solved")
}

fn witten(fine: &Sweep) -> Verdict {
    let r = focus(fine);
    let sub = r.sub.as_ref().unwrap();
    let l = &r.ledger;
    let ok = l.identity_gap <= 0.05
        && l.dirichlet >= 0.0
        && l.dirichlet <= 4.0 * PI * FOCUS_MASS * 1.05
        && r.max_density <= 1.0 + 1e-3
        && sub.worst_violation >= -1e-3;
    verdict(
        ok,
        format!(
            "h={} m={FOCUS_MASS}: gap {:.3e} (<= 0.05), <DΨ|DΨ> {:.4e} in [0, {:.4e}], max|Ψ|² {:.6} (<= 1.001), subharmonicity {:.2e} (>= -1e-3)",
            fine.h,
            l.identity_gap,
            l.dirichlet,
            4.0 * PI * FOCUS_MASS * 1.05,
            r.max_density,
            sub.worst_violation
        ),
    )
}

fn spinor_bounds(fine: &Sweep) -> Verdict {
    let mut ok = fine.records.len() == MASSES.len();
    let mut notes = Vec::new();
    for r in &fine.records {
        let limit = 16.0 * PI * r.m * 1.10;
        ok &= r.ledger.f_gradient_energy <= limit && r.exceptional.holds;
        notes.push(format!(
            "m={}: ∫|∇f|² {:.3e} (<= {limit:.3e}), Vol^(1/3) {:.3e} (<= {:.3e})",
            r.m,
            r.ledger.f_gradient_energy,
            r.exceptional.volume.cbrt(),
            r.exceptional.bound
        ));
    }
    verdict(ok, format!("h={}: {}", fine.h, notes.join("; ")))
}

fn pointwise(coarse: &Sweep, fine: &Sweep) -> Verdict {
    let a = focus(coarse).lemma1.as_ref().unwrap();
    let b = focus(fine).lemma1.as_ref().unwrap();
    let ok = a.fraction_within >= 0.99 && b.fraction_within >= 0.99 && b.slack <= a.slack;
    verdict(
        ok,
        format!(
            "within at h={}: {:.4} of {} nodes, h={}: {:.4} of {} nodes (>= 0.99); worst lhs/rhs {:.4} -> {:.4}; slack {:.3e} -> {:.3e} (non-increasing)",
            coarse.h, a.fraction_within, a.nodes_checked, fine.h, b.fraction_within, b.nodes_checked, a.worst_ratio, b.worst_ratio, a.slack, b.slack
        ),
    )
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn theorem_structure(coarse: &Sweep, fine: &Sweep) -> Verdict {
    let (a, b) = (&coarse.table, &fine.table);
    let solved = a.rows.iter().chain(&b.rows).all(|r| r.ok());
    let slopes = [a.lhs_slope, b.lhs_slope];
    let fit = [&a.theorem_fit, &b.theorem_fit];
    let finite = fit.iter().all(|f| f.c1.is_finite() && f.c2.is_finite());
    let d1 = relative_change(fit[0].c1, fit[1].c1);
    let d2 = relative_change(fit[0].c2, fit[1].c2);
    let ok = solved
        && slopes.iter().all(|s| (1.8..=2.2).contains(s))
        && finite
        && d1 <= 0.2
        && d2 <= 0.2
        && a.all_volume_bounds_hold
        && b.all_volume_bounds_hold;
    verdict(
        ok,
        format!(
            "slopes {:.4} / {:.4} (in [1.8, 2.2]); (ĉ₁, ĉ₂) = ({:.4e}, {:.4e}) -> ({:.4e}, {:.4e}), change {:.1}% / {:.1}% (<= 20%); corollary fit ({:.4e}, {:.4e}) -> ({:.4e}, {:.4e}); volume bounds {} / {}",
            slopes[0],
            slopes[1],
            fit[0].c1,
            fit[0].c2,
            fit[1].c1,
            fit[1].c2,
            100.0 * d1,
            100.0 * d2,
            a.corollary_fit.c1,
            a.corollary_fit.c2,
            b.corollary_fit.c1,
            b.corollary_fit.c2,
            a.all_volume_bounds_hold,
            b.all_volume_bounds_hold
        ),
    )
}

/// Every report of a coarse solve, serialized as the runner would write it.
fn coarse_artifacts() -> Vec<Vec<u8>> {
    let metric = CatalogMetric::regularized(0.1, 1.0);
    let sol = solve_witten(&metric, &WittenConfig::sweep(0.25, 2.5), up()).unwrap();
    let mut field = Vec::new();
    write_field(&sol.grid, &sol.field, &mut field).unwrap();
    let mut slice = Vec::new();
    write_slice_csv(&sol.grid, &sol.field, 0.0, &mut slice).unwrap();
    let ledger = serde_json::to_vec(&mass_identity(&sol, 0.1)).unwrap();
    let lemma = serde_json::to_vec(&lemma1_field(&metric, &sol).unwrap()).unwrap();
    let history = format!("{:?}", sol.runs.iter().map(|r| r.solve.iterations()).collect::<Vec<_>>()).into_bytes();
    vec![field, slice, ledger, lemma, history]
}

fn reproducibility(start: Instant) -> Verdict {
    let first = coarse_artifacts();
    let second = coarse_artifacts();
    let identical = first == second;
    let bytes: usize = first.iter().map(Vec::len).sum();
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    verdict(
        identical && minutes < 30.0,
        format!("{} artifacts ({bytes} bytes) identical: {identical}; suite wall time {minutes:.2} min (< 30)", first.len()),
    )
}

fn report(index: usize, name: &str, v: &Verdict, failed: &mut usize) {
    let status = if v.passed { "PASS" } else { "FAIL" };
    if !v.passed {
        *failed += 1;
    }
    println!("{status} [{index}] {name}: {}", v.detail);
}

fn main() {
    let start = Instant::now();
    let mut failed = 0;
    report(1, "geometry oracle equivalence", &geometry_oracle(), &mut failed);
    report(2, "ADM mass", &adm(), &mut failed);
    report(3, "spin certification", &spin(), &mut failed);
    report(4, "Weitzenböck identity", &weitzenboeck(), &mut failed);
    let coarse = sweep(0.25);
    let fine = sweep(0.125);
    report(5, "Witten solve", &witten(&fine), &mut failed);
    report(6, "spinor bounds", &spinor_bounds(&fine), &mut failed);
    report(7, "pointwise curvature estimate", &pointwise(&coarse, &fine), &mut failed);
    report(8, "weighted estimate structure", &theorem_structure(&coarse, &fine), &mut failed);
    report(9, "reproducibility", &reproducibility(start), &mut failed);
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
