//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [metric]
//! family = "regularized"
//! params = { m = 0.1, eps = 1.0 }
//!
//! [grid]
//! h = 0.25
//! r_max = 4.0
//! sweep = [4.0, 6.0, 8.0]     # optional, default {R, 1.5R, 2R}
//! r_min = 0.0                 # annulus inner radius (isotropic only)
//! memory_cap = 2147483648     # bytes; SPINORLAB_MEMORY_CAP overrides
//!
//! [solver]
//! tol = 1e-8
//! max_iters = 20000
//!
//! [[experiments]]
//! kind = "witten"
//!
//! [[experiments]]
//! kind = "sweep"
//! masses = [0.2, 0.1, 0.05, 0.025]
//!
//! [output]
//! dir = "out"
//! formats = ["json", "csv"]
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spinorlab::estimates::WeightFunction;
use spinorlab::geometry::CatalogMetric;
use spinorlab::grid::{SolverConfig, DEFAULT_MEMORY_CAP};
use spinorlab::witten::WittenConfig;

pub const EXPERIMENT_NAMES: [&str; 7] =
    ["curvature_audit", "adm_mass", "spin_certify", "witten", "lemma1", "theorem1", "sweep"];

pub const MEMORY_CAP_ENV: &str = "SPINORLAB_MEMORY_CAP";

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Invalid(String),
}

impl std::error::Error for ConfigError {}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Parse(m) => write!(f, "config parse error: {m}"),
            Self::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub metric: MetricSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub h: f64,
    pub r_max: f64,
    pub sweep: Option<Vec<f64>>,
    pub r_min: f64,
    pub memory_cap: Option<u64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            h: 0.25,
            r_max: 4.0,
            sweep: None,
            r_min: 0.0,
            memory_cap: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tol: d.tol,
            max_iters: d.max_iters,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

fn default_audit_points() -> usize {
    100
}
fn default_spin_points() -> usize {
    200
}
fn default_audit_radius() -> f64 {
    4.0
}
fn default_step() -> f64 {
    5e-4
}
fn default_adm_radii() -> Vec<f64> {
    vec![20.0, 40.0, 80.0]
}
fn default_curvature_point() -> [f64; 3] {
    [2.0, 0.0, 0.0]
}
fn default_threshold() -> f64 {
    0.5
}
fn default_masses() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}
fn default_weight() -> WeightFunction {
    WeightFunction::ConstantOne
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    CurvatureAudit {
        #[serde(default = "default_audit_points")]
        points: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_audit_radius")]
        radius: f64,
        #[serde(default = "default_step")]
        step: f64,
    },
    AdmMass {
        #[serde(default = "default_adm_radii")]
        radii: Vec<f64>,
    },
    SpinCertify {
        #[serde(default = "default_spin_points")]
        points: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_audit_radius")]
        radius: f64,
        #[serde(default = "default_curvature_point")]
        curvature_point: [f64; 3],
    },
    Witten {
        #[serde(default)]
        dump_field: bool,
    },
    Lemma1 {},
    Theorem1 {
        #[serde(default = "default_weight")]
        weight: WeightFunction,
        #[serde(default = "default_threshold")]
        c: f64,
    },
    Sweep {
        #[serde(default = "default_masses")]
        masses: Vec<f64>,
        #[serde(default = "default_weight")]
        weight: WeightFunction,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::CurvatureAudit { .. } => "curvature_audit",
            Self::AdmMass { .. } => "adm_mass",
            Self::SpinCertify { .. } => "spin_certify",
            Self::Witten { .. } => "witten",
            Self::Lemma1 {} => "lemma1",
            Self::Theorem1 { .. } => "theorem1",
            Self::Sweep { .. } => "sweep",
        }
    }

    /// Runs on the shared Witten solution.
    pub fn needs_solution(&self) -> bool {
        matches!(self, Self::Witten { .. } | Self::Lemma1 {} | Self::Theorem1 { .. })
    }

    /// The default options for a name, or the list of valid names.
    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        let table = format!("kind = \"{}\"", name.replace('-', "_"));
        toml::from_str(&table).map_err(|_| {
            ConfigError::Invalid(format!(
                "unknown experiment `{name}` (valid: {})",
                EXPERIMENT_NAMES.join(", ")
            ))
        })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn metric(&self) -> Result<CatalogMetric, ConfigError> {
        CatalogMetric::from_name(&self.metric.family, &self.metric.params)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// The memory cap after the environment override.
    pub fn memory_cap(&self) -> Result<u64, ConfigError> {
        match std::env::var(MEMORY_CAP_ENV) {
            Ok(v) => parse_bytes(&v)
                .ok_or_else(|| ConfigError::Invalid(format!("{MEMORY_CAP_ENV}={v} is not a byte count"))),
            Err(_) => Ok(self.grid.memory_cap.unwrap_or(DEFAULT_MEMORY_CAP)),
        }
    }

    pub fn witten_config(&self) -> Result<WittenConfig, ConfigError> {
        let mut w = WittenConfig::sweep(self.grid.h, self.grid.r_max);
        if let Some(radii) = &self.grid.sweep {
            w.radii = radii.clone();
        }
        w.r_min = self.grid.r_min;
        w.solver = SolverConfig {
            tol: self.solver.tol,
            max_iters: self.solver.max_iters,
        };
        w.memory_cap = self.memory_cap()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.metric()?;
        let g = &self.grid;
        if !(g.h > 0.0 && g.r_max > 0.0 && g.r_min >= 0.0) || !g.h.is_finite() || !g.r_max.is_finite() {
            return bad(format!("grid lengths must be positive, got h={}, r_max={}, r_min={}", g.h, g.r_max, g.r_min));
        }
        if !(g.h < g.r_max / 8.0) {
            return bad(format!("grid.h must be below r_max/8, got h={} r_max={}", g.h, g.r_max));
        }
        if let Some(s) = &g.sweep {
            if s.is_empty() || s.iter().any(|r| !(*r > 0.0)) || s.windows(2).any(|w| w[1] <= w[0]) {
                return bad(format!("grid.sweep must be positive and increasing, got {s:?}"));
            }
        }
        if !(self.solver.tol > 0.0 && self.solver.tol <= 1e-2) {
            return bad(format!("solver.tol must lie in (0, 1e-2], got {}", self.solver.tol));
        }
        if self.solver.max_iters == 0 {
            return bad("solver.max_iters must be positive".into());
        }
        if self.experiments.is_empty() {
            return bad(format!("no experiments listed (valid: {})", EXPERIMENT_NAMES.join(", ")));
        }
        if self.output.formats.is_empty() {
            return bad("output.formats is empty".into());
        }
        let isotropic = self.metric.family == "isotropic";
        if isotropic && g.r_min <= 0.0 && self.experiments.iter().any(Experiment::needs_solution) {
            return bad("the isotropic family is singular at the origin; set grid.r_min > 0".into());
        }
        if !isotropic && g.r_min > 0.0 {
            return bad("grid.r_min is only used with the isotropic family".into());
        }
        self.memory_cap()?;
        for e in &self.experiments {
            match e {
                Experiment::CurvatureAudit { points, radius, step, .. } => {
                    if *points == 0 || !(*radius > 0.0) || !(*step > 0.0) {
                        return bad("curvature_audit needs points > 0, radius > 0, step > 0".into());
                    }
                }
                Experiment::AdmMass { radii } => {
                    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                        return bad(format!("adm_mass radii must be positive, got {radii:?}"));
                    }
                }
                Experiment::SpinCertify { points, radius, .. } => {
                    if *points == 0 || !(*radius > 0.0) {
                        return bad("spin_certify needs points > 0 and radius > 0".into());
                    }
                }
                Experiment::Theorem1 { weight, c } => {
                    weight.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    if !(*c > 0.0 && *c < 1.0) {
                        return bad(format!("theorem1 threshold c must lie in (0,1), got {c}"));
                    }
                    if isotropic {
                        return bad("theorem1 needs a complete chart; not available for isotropic".into());
                    }
                }
                Experiment::Sweep { masses, weight } => {
                    weight.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                    if masses.is_empty() || masses.iter().any(|m| !(*m > 0.0)) || masses.windows(2).any(|w| w[1] >= w[0]) {
                        return bad(format!("sweep masses must be positive and decreasing, got {masses:?}"));
                    }
                    if !matches!(self.metric.family.as_str(), "regularized" | "flat") {
                        return bad(format!(
                            "sweep varies the mass of the regularized family (or is trivial on flat), got `{}`",
                            self.metric.family
                        ));
                    }
                }
                Experiment::Lemma1 {} if isotropic => {
                    return bad("lemma1 needs a complete chart; not available for isotropic".into());
                }
                Experiment::Witten { .. } | Experiment::Lemma1 {} => {}
            }
        }
        Ok(())
    }
}

/// Bytes, optionally with a `K`, `M` or `G` suffix (powers of 1024).
pub fn parse_bytes(s: &str) -> Option<u64> {
    let s = s.trim();
    let (num, mult) = match s.chars().last()? {
        'K' | 'k' => (&s[..s.len() - 1], 1u64 << 10),
        'M' | 'm' => (&s[..s.len() - 1], 1 << 20),
        'G' | 'g' => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    num.trim().parse::<u64>().ok()?.checked_mul(mult)
}
