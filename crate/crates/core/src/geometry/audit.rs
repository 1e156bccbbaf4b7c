use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::curvature::{curvature, CurvatureBundle};
use super::metric::{ChartMetric, FiniteDifferenceMetric};
use crate::error::coords;
use crate::{Point, Result};

/// Floor on `|R_ijkl|` in the relative oracle difference, so nearly flat
/// points are compared absolutely.
pub const ORACLE_SCALE_FLOOR: f64 = 1e-3;

/// `n` reproducible points, uniform in the shell `r_lo ≤ |x| < r_hi`.
pub fn sample_shell(seed: u64, n: usize, r_lo: f64, r_hi: f64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = (r_lo.powi(3), r_hi.powi(3));
    (0..n)
        .map(|_| {
            let dir = loop {
                let p = Point::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let r = p.norm();
                if r > 1e-3 && r <= 1.0 {
                    break p / r;
                }
            };
            dir * rng.random_range(a..b).cbrt()
        })
        .collect()
}

/// Comparison of analytic curvature with the fourth-order difference oracle.
#[derive(Debug, Clone, Serialize)]
pub struct OracleAudit {
    pub family: String,
    pub points: usize,
    /// Base difference step, scaled by `max(1, |x|)` at each point.
    pub step: f64,
    /// `max ‖R - R_fd‖ / max(|R|, ORACLE_SCALE_FLOOR)`.
    pub max_relative: f64,
    pub worst_point: [f64; 3],
    pub max_symmetry: f64,
    pub max_bianchi: f64,
    pub max_kretschmann: f64,
}

impl OracleAudit {
    pub fn passed(&self, relative: f64, identities: f64) -> bool {
        self.max_relative < relative && self.max_symmetry < identities && self.max_bianchi < identities
    }
}

fn riemann_distance(a: &CurvatureBundle, b: &CurvatureBundle) -> f64 {
    a.riemann
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .zip(b.riemann.iter().flatten().flatten().flatten())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// The oracle at `x` differences with `step·max(1, |x|)`: curvature decays
/// like `|x|⁻³` while the truncation error depends on `step/|x|`, so a fixed
/// step would leave far points roundoff-dominated.
pub fn oracle_audit<M: ChartMetric + Clone>(metric: &M, points: &[Point], step: f64) -> Result<OracleAudit> {
    let mut audit = OracleAudit {
        family: metric.label(),
        points: points.len(),
        step,
        max_relative: 0.0,
        worst_point: [0.0; 3],
        max_symmetry: 0.0,
        max_bianchi: 0.0,
        max_kretschmann: 0.0,
    };
    for x in points {
        let a = curvature(metric, x, false)?;
        let oracle = FiniteDifferenceMetric::new(metric.clone(), step * x.norm().max(1.0));
        let b = curvature(&oracle, x, false)?;
        let rel = riemann_distance(&a, &b) / a.riemann_norm().max(ORACLE_SCALE_FLOOR);
        if rel > audit.max_relative {
            audit.max_relative = rel;
            audit.worst_point = coords(x);
        }
        audit.max_symmetry = audit.max_symmetry.max(a.symmetry_residual());
        audit.max_bianchi = audit.max_bianchi.max(a.bianchi_residual());
        audit.max_kretschmann = audit.max_kretschmann.max(a.kretschmann);
    }
    Ok(audit)
}
