//! Runs the experiments of a configuration and writes their reports.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::json;
use spinorlab::estimates::{lemma1_field, mass_sweep, theorem_sides, WeightFunction, ISOPERIMETRIC_RADII};
use spinorlab::geometry::{
    adm_mass, isoperimetric_estimate, oracle_audit, sample_shell, CatalogMetric, ChartMetric,
};
use spinorlab::grid::DiscreteSpinorField;
use spinorlab::grid::io::{save_field, write_curvature_csv, write_slice_csv};
use spinorlab::spin::{basis_spinor, spin_audit};
use spinorlab::witten::{
    conformal_profile, exceptional_set, mass_identity, solve_witten_with_inner, subharmonicity_check,
    WittenSolution,
};
use spinorlab::{Error, Point};

use crate::config::{Experiment, ExperimentConfig, Format};
use crate::report::{write_csv, write_json};

/// Nodal tolerance against the closed-form profile on annular grids.
pub const PROFILE_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: String,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("<= {limit:e}"),
            passed: value <= limit,
        }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!(">= {limit:e}"),
            passed: value >= limit,
        }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("in [{lo}, {hi}]"),
            passed: (lo..=hi).contains(&value),
        }
    }

    fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            limit: "true".into(),
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub experiment: String,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub wall_seconds: f64,
    pub error: Option<String>,
    /// Set when a solve did not converge.
    pub residual_history: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub metric: String,
    pub wall_seconds: f64,
    pub passed: bool,
    pub solver_failure: bool,
    pub experiments: Vec<Outcome>,
}

/// A failed shared solve, kept so every dependent experiment can report it.
#[derive(Debug, Clone)]
struct SolveFailure {
    message: String,
    history: Option<Vec<f64>>,
}

struct Produced {
    files: Vec<String>,
    checks: Vec<Check>,
}

enum RunError {
    Solver(SolveFailure),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        Self::Other(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { ref history, .. } => Self::Solver(SolveFailure {
                message: e.to_string(),
                history: Some(history.clone()),
            }),
            e => Self::Other(e.into()),
        }
    }
}

pub struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    metric: CatalogMetric,
    out: PathBuf,
    formats: Vec<Format>,
    solution: OnceLock<Result<(WittenSolution, f64), SolveFailure>>,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> anyhow::Result<Self> {
        let metric = cfg.metric()?;
        std::fs::create_dir_all(&cfg.output.dir)
            .with_context(|| format!("creating output directory {}", cfg.output.dir.display()))?;
        Ok(Self {
            cfg,
            metric,
            out: cfg.output.dir.clone(),
            formats: cfg.output.formats.clone(),
            solution: OnceLock::new(),
        })
    }

    fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }

    fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn params_label(&self) -> String {
        self.metric
            .params()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Runs every experiment, at most `jobs` at a time, and writes the
    /// manifest.
    pub fn run_all(&self, jobs: usize) -> anyhow::Result<Manifest> {
        let start = Instant::now();
        let list = &self.cfg.experiments;
        let slots: Vec<Mutex<Option<Outcome>>> = list.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let worker = || loop {
            let i = next.fetch_add(1, Ordering::SeqCst);
            if i >= list.len() {
                break;
            }
            let outcome = self.run_one(&list[i], i);
            *slots[i].lock().expect("slot lock") = Some(outcome);
        };
        if jobs <= 1 {
            worker();
        } else {
            std::thread::scope(|s| {
                for _ in 0..jobs.min(list.len()) {
                    s.spawn(worker);
                }
            });
        }
        let experiments: Vec<Outcome> = slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot lock").expect("every experiment ran"))
            .collect();
        let manifest = Manifest {
            metric: self.metric.label(),
            wall_seconds: start.elapsed().as_secs_f64(),
            passed: experiments.iter().all(Outcome::passed),
            solver_failure: experiments.iter().any(|e| e.residual_history.is_some()),
            experiments,
        };
        write_json(&self.path("manifest.json"), &manifest)?;
        Ok(manifest)
    }

    fn run_one(&self, e: &Experiment, index: usize) -> Outcome {
        let start = Instant::now();
        let tag = self.tag(e, index);
        let result = match e {
            Experiment::CurvatureAudit { points, seed, radius, step } => {
                self.curvature_audit(&tag, *points, *seed, *radius, *step)
            }
            Experiment::AdmMass { radii } => self.adm(&tag, radii),
            Experiment::SpinCertify { points, seed, radius, curvature_point } => {
                self.spin_certify(&tag, *points, *seed, *radius, curvature_point)
            }
            Experiment::Witten { dump_field } => self.witten(&tag, *dump_field),
            Experiment::Lemma1 {} => self.lemma1(&tag),
            Experiment::Theorem1 { weight, c } => self.theorem1(&tag, weight, *c),
            Experiment::Sweep { masses, weight } => self.sweep(&tag, masses, weight),
        };
        let mut outcome = Outcome {
            experiment: tag.clone(),
            files: Vec::new(),
            checks: Vec::new(),
            wall_seconds: 0.0,
            error: None,
            residual_history: None,
        };
        match result {
            Ok(p) => {
                outcome.files = p.files;
                outcome.checks = p.checks;
            }
            Err(RunError::Solver(f)) => {
                outcome.error = Some(f.message.clone());
                let path = self.path(&format!("{tag}_residual_history.json"));
                let written = write_json(&path, &json!({ "error": f.message, "history": f.history }));
                outcome.residual_history = Some(match written {
                    Ok(()) => relative(&path, &self.out),
                    Err(e) => format!("unwritable: {e}"),
                });
            }
            Err(RunError::Other(e)) => outcome.error = Some(format!("{e:#}")),
        }
        outcome.wall_seconds = start.elapsed().as_secs_f64();
        outcome
    }

    /// The experiment name, suffixed when it occurs more than once.
    fn tag(&self, e: &Experiment, index: usize) -> String {
        let same = self.cfg.experiments.iter().filter(|x| x.name() == e.name()).count();
        if same > 1 {
            format!("{}_{index}", e.name())
        } else {
            e.name().to_string()
        }
    }

    fn inner_radius(&self) -> f64 {
        match self.metric.family() {
            "isotropic" => self.metric.nominal_mass().unwrap_or(1.0).max(0.1),
            _ => 0.0,
        }
    }

    fn curvature_audit(&self, tag: &str, n: usize, seed: u64, radius: f64, step: f64) -> Result<Produced, RunError> {
        let points = sample_shell(seed, n, self.inner_radius(), radius);
        let audit = oracle_audit(&self.metric, &points, step)?;
        let mut files = Vec::new();
        if self.json() {
            let p = self.path(&format!("{tag}.json"));
            write_json(&p, &audit)?;
            files.push(relative(&p, &self.out));
        }
        if self.csv() {
            let p = self.path(&format!("{tag}_curvature.csv"));
            let f = std::fs::File::create(&p).map_err(anyhow::Error::from)?;
            write_curvature_csv(&self.metric, &self.params_label(), &points, f)?;
            files.push(relative(&p, &self.out));
        }
        Ok(Produced {
            files,
            checks: vec![
                Check::at_most("oracle_relative", audit.max_relative, 1e-6),
                Check::at_most("riemann_symmetry", audit.max_symmetry, 1e-10),
                Check::at_most("first_bianchi", audit.max_bianchi, 1e-10),
            ],
        })
    }

    fn adm(&self, tag: &str, radii: &[f64]) -> Result<Produced, RunError> {
        let report = adm_mass(&self.metric, radii)?;
        let mut checks = vec![Check::holds("mass_integrals_settled", report.reliable)];
        match self.metric.nominal_mass() {
            Some(m) if m > 0.0 => checks.push(Check::at_most(
                "mass_relative_error",
                (report.extrapolated_mass - m).abs() / m,
                0.02,
            )),
            Some(_) => checks.push(Check::at_most("mass_abs", report.extrapolated_mass.abs(), 1e-8)),
            None => {}
        }
        let mut files = Vec::new();
        if self.json() {
            let p = self.path(&format!("{tag}.json"));
            write_json(&p, &report)?;
            files.push(relative(&p, &self.out));
        }
        if self.csv() {
            let p = self.path(&format!("{tag}.csv"));
            let rows: Vec<Vec<f64>> = report.radii.iter().zip(&report.integral_values).map(|(r, v)| vec![*r, *v]).collect();
            write_csv(&p, &["radius", "mass_integral"], &rows)?;
            files.push(relative(&p, &self.out));
        }
        Ok(Produced { files, checks })
    }

    fn spin_certify(&self, tag: &str, n: usize, seed: u64, radius: f64, cp: &[f64; 3]) -> Result<Produced, RunError> {
        let points = sample_shell(seed, n, self.inner_radius(), radius);
        let audit = spin_audit(&self.metric, &points, &Point::new(cp[0], cp[1], cp[2]))?;
        let mut files = Vec::new();
        if self.json() {
            let p = self.path(&format!("{tag}.json"));
            write_json(&p, &audit)?;
            files.push(relative(&p, &self.out));
        }
        let mut checks = vec![
            Check::at_most("anticommutation", audit.anticommutation, 1e-12),
            Check::at_most("metric_compatibility", audit.metric_compatibility, 1e-8),
            Check::at_most("product_compatibility", audit.product_compatibility, 1e-8),
        ];
        if audit.curvature_residuals[0] < 1e-12 {
            checks.push(Check::at_most("spin_curvature_residual", audit.curvature_residuals[0], 1e-12));
        } else {
            checks.push(Check::within("spin_curvature_ratio", audit.curvature_ratio, 3.4, 4.6));
        }
        Ok(Produced { files, checks })
    }

    fn mass(&self) -> Result<f64, RunError> {
        Ok(match self.metric.nominal_mass() {
            Some(0.0) => 0.0,
            _ => adm_mass(&self.metric, &[20.0, 40.0, 80.0])?.extrapolated_mass,
        })
    }

    fn solution(&self) -> Result<&(WittenSolution, f64), RunError> {
        let cached = self.solution.get_or_init(|| {
            let run = || -> Result<(WittenSolution, f64), RunError> {
                let wcfg = self.cfg.witten_config().map_err(anyhow::Error::from)?;
                let psi0 = basis_spinor(0);
                let sol = match self.metric.conformal_factor() {
                    Some(u) if wcfg.r_min > 0.0 => solve_witten_with_inner(&self.metric, &wcfg, psi0, &|x, r| {
                        conformal_profile(u, psi0, r)(x)
                    })?,
                    _ => solve_witten_with_inner(&self.metric, &wcfg, psi0, &|_, _| psi0)?,
                };
                Ok((sol, self.mass()?))
            };
            run().map_err(|e| match e {
                RunError::Solver(f) => f,
                RunError::Other(e) => SolveFailure {
                    message: format!("{e:#}"),
                    history: None,
                },
            })
        });
        match cached {
            Ok(s) => Ok(s),
            Err(f) if f.history.is_some() => Err(RunError::Solver(f.clone())),
            Err(f) => Err(RunError::Other(anyhow::anyhow!(f.message.clone()))),
        }
    }

    fn k_hat(&self) -> Option<f64> {
        isoperimetric_estimate(&self.metric, &ISOPERIMETRIC_RADII).ok().map(|e| e.k_hat)
    }

    fn witten(&self, tag: &str, dump: bool) -> Result<Produced, RunError> {
        let (sol, mass) = self.solution()?;
        let ledger = mass_identity(sol, *mass);
        let sub = subharmonicity_check(sol);
        let k_hat = self.k_hat();
        let ex = k_hat.map(|k| exceptional_set(sol, 0.5, k, *mass)).transpose()?;
        let annulus = sol.grid.summary().r_min > 0.0;
        let mut checks = vec![if annulus {
            // the inner sphere carries flux, so compare with the closed form instead
            Check::at_most("profile_deviation", self.profile_deviation(sol)?, PROFILE_TOLERANCE)
        } else {
            Check::at_most("identity_gap", ledger.identity_gap, 0.05)
        }];
        checks.extend([
            Check::holds("positive_energy", ledger.positive_energy_ok),
            Check::at_most("sup_density", sol.max_density, 1.0 + 1e-3),
            Check::at_least("subharmonicity", sub.worst_violation, -1e-3),
            Check::at_most("f_gradient_ratio", ledger.f_gradient_energy / (ledger.f_gradient_bound * 1.10).max(1e-300), 1.0),
        ]);
        if let Some(ex) = &ex {
            checks.push(Check::holds("exceptional_set", ex.holds));
        }
        let mut files = Vec::new();
        if self.json() {
            let p = self.path(&format!("{tag}.json"));
            write_json(
                &p,
                &json!({
                    "metric": self.metric.label(),
                    "mass": mass,
                    "ledger": ledger,
                    "subharmonicity": sub,
                    "exceptional_set": ex,
                    "final_grid": sol.grid.summary(),
                }),
            )?;
            files.push(relative(&p, &self.out));
        }
        if self.csv() {
            let p = self.path(&format!("{tag}_slice_z0.csv"));
            let f = std::fs::File::create(&p).map_err(anyhow::Error::from)?;
            write_slice_csv(&sol.grid, &sol.field, 0.0, f)?;
            files.push(relative(&p, &self.out));
            let p = self.path(&format!("{tag}_runs.csv"));
            let rows: Vec<Vec<f64>> = sol
                .runs
                .iter()
                .map(|r| {
                    vec![
                        r.r_max,
                        r.grid.interior_nodes as f64,
                        r.solve.iterations() as f64,
                        r.dirichlet,
                        r.potential,
                        r.flux,
                        r.dirac_residual,
                        r.dirac_residual_core,
                        r.max_density,
                    ]
                })
                .collect();
            write_csv(
                &p,
                &["r_max", "interior_nodes", "iterations", "dirichlet", "potential", "flux", "dirac_residual", "dirac_residual_core", "max_density"],
                &rows,
            )?;
            files.push(relative(&p, &self.out));
        }
        if dump {
            let p = self.path(&format!("{tag}_field.bin"));
            save_field(&sol.grid, &sol.field, &p)?;
            files.push(relative(&p, &self.out));
        }
        Ok(Produced { files, checks })
    }

    /// Largest nodal distance from the exact conformal profile on an annulus.
    fn profile_deviation(&self, sol: &WittenSolution) -> Result<f64, RunError> {
        let u = self
            .metric
            .conformal_factor()
            .ok_or_else(|| anyhow::anyhow!("annular grids need a conformally flat metric"))?;
        let exact = conformal_profile(u, sol.psi0, sol.r_max());
        let exact = DiscreteSpinorField::from_fn(&sol.grid, exact);
        Ok(sol.field.max_abs_difference(&exact, 0..sol.grid.n_interior()))
    }

    fn lemma1(&self, tag: &str) -> Result<Produced, RunError> {
        let (sol, _) = self.solution()?;
        let report = lemma1_field(&self.metric, sol)?;
        let mut files = Vec::new();
        if self.json() {
            let p = self.path(&format!("{tag}.json"));
            write_json(&p, &report)?;
            files.push(relative(&p, &self.out));
        }
        Ok(Produced {
            files,
            checks: vec![
                Check::at_least("lemma1_fraction", report.fraction_within, 0.99),
                Check::at_least("lemma1_min_rhs", report.min_rhs, 0.0),
            ],
        })
    }

    fn theorem1(&self, tag: &str, weight: &WeightFunction, c: f64) -> Result<Produced, RunError> {
        let (sol, mass) = self.solution()?;
        let k_hat = self.k_hat().ok_or_else(|| anyhow::anyhow!("no isoperimetric estimate for this chart"))?;
        let report = theorem_sides(&self.metric, weight, sol, c, k_hat, *mass)?;
        let mut files = Vec::new();
        if self.json() {
            let p = self.path(&format!("{tag}.json"));
            write_json(&p, &report)?;
            files.push(relative(&p, &self.out));
        }
        Ok(Produced {
            files,
            checks: vec![
                Check::holds("volume_bound", report.vol_d_ok),
                Check::holds("lhs_finite", report.lhs.is_finite() && report.lhs >= 0.0),
                Check::holds(
                    "rhs_finite",
                    report.sup_term.is_finite() && report.l2_term.is_finite(),
                ),
            ],
        })
    }

    fn sweep(&self, tag: &str, masses: &[f64], weight: &WeightFunction) -> Result<Produced, RunError> {
        let wcfg = self.cfg.witten_config().map_err(anyhow::Error::from)?;
        let eps = self.cfg.metric.params.get("eps").copied().unwrap_or(1.0);
        let flat = self.metric.family() == "flat";
        let family = |m: f64| if flat { CatalogMetric::Flat } else { CatalogMetric::regularized(m, eps) };
        let table = mass_sweep(family, masses, &wcfg, weight, basis_spinor(0), |_, _, _| {})?;
        let mut checks = vec![Check::holds("sweep_solved", table.rows.iter().all(|r| r.ok()))];
        if flat {
            checks.push(Check::holds("lhs_zero", table.rows.iter().all(|r| r.lhs == 0.0)));
        } else {
            checks.push(Check::within("lhs_slope", table.lhs_slope, 1.8, 2.2));
            checks.push(Check::holds(
                "fit_finite",
                table.corollary_fit.c1.is_finite() && table.corollary_fit.c2.is_finite(),
            ));
        }
        checks.push(Check::holds("volume_bounds", table.all_volume_bounds_hold));
        let mut files = Vec::new();
        if self.json() {
            let p = self.path(&format!("{tag}.json"));
            write_json(&p, &table)?;
            files.push(relative(&p, &self.out));
        }
        if self.csv() {
            let p = self.path(&format!("{tag}.csv"));
            let rows: Vec<Vec<f64>> = table
                .rows
                .iter()
                .map(|r| vec![r.m, r.lhs, r.sup_term, r.l2_term, r.vol_d, r.bound_d, r.k_hat, r.identity_gap])
                .collect();
            write_csv(&p, &["m", "lhs", "sup_term", "l2_term", "vol_D", "bound_D", "k_hat", "identity_gap"], &rows)?;
            files.push(relative(&p, &self.out));
        }
        Ok(Produced { files, checks })
    }
}

/// Relative path of `p` inside `dir`, for stable manifests.
pub fn relative(p: &Path, dir: &Path) -> String {
    p.strip_prefix(dir).unwrap_or(p).display().to_string()
}
