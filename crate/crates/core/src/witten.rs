//! The Witten spinor: the Dirichlet problem `(D*D + R/4)Ψ = 0`, `Ψ → Ψ₀`,
//! on a sweep of truncation radii, and the mass identity and a-priori
//! bounds evaluated on it.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::coords;
use crate::extrapolate::{extrapolate_in_inverse_radius, Extrapolated};
use crate::geometry::ChartMetric;
use crate::grid::{
    build_grid_with, solve_dirichlet, BallGrid, DiscreteOperator, DiscreteSpinorField,
    GridGeometry, GridSummary, HalfSpinor, SolveReport, SolverConfig, StencilKind,
    DEFAULT_MEMORY_CAP,
};
use crate::spin::Spinor;
use crate::{Error, Point, Result};

/// Sharp flat-space constant in `k² (∫φ⁶)^{1/3} ≤ c₃ ∫|∇φ|²`:
/// `c₃ = k_flat² / S₃` with `k_flat = (36π)^{1/3}` and
/// `S₃ = 3 (π/2)^{4/3}`, i.e. `c₃ = (4/3)(18/π)^{2/3}`.
pub fn sobolev_c3() -> f64 {
    4.0 / 3.0 * (18.0 / PI).powf(2.0 / 3.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WittenConfig {
    pub h: f64,
    /// Truncation radii, increasing. The field of the last one is kept.
    pub radii: Vec<f64>,
    /// Inner radius of an annular grid (0 for the full ball).
    pub r_min: f64,
    pub solver: SolverConfig,
    pub memory_cap: u64,
    /// Allowed excess of `max |Ψ|²` over 1.
    pub sup_allowance: f64,
}

impl WittenConfig {
    /// Radii `{R, 1.5R, 2R}`.
    pub fn sweep(h: f64, r_max: f64) -> Self {
        Self {
            h,
            radii: vec![r_max, 1.5 * r_max, 2.0 * r_max],
            r_min: 0.0,
            solver: SolverConfig::default(),
            memory_cap: DEFAULT_MEMORY_CAP,
            sup_allowance: 1e-3,
        }
    }

    pub fn single(h: f64, r_max: f64) -> Self {
        Self {
            radii: vec![r_max],
            ..Self::sweep(h, r_max)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.radii.is_empty() || self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "truncation radii must be non-empty and increasing, got {:?}",
                self.radii
            )));
        }
        Ok(())
    }
}

/// Diagnostics of one truncation radius.
#[derive(Debug, Clone, Serialize)]
pub struct WittenRun {
    pub r_max: f64,
    pub grid: GridSummary,
    pub solve: SolveReport,
    pub dirichlet: f64,
    pub potential: f64,
    pub flux: f64,
    pub green_residual: f64,
    /// `‖𝒟Ψ‖_{L²(dμ)}` over the interior.
    pub dirac_residual: f64,
    /// The same over `|x| < R_max/2`, away from the staircase boundary layer.
    pub dirac_residual_core: f64,
    pub max_density: f64,
    pub min_density: f64,
}

/// The solution on the largest truncation radius with the per-radius
/// diagnostics and their extrapolation in `1/R`.
#[derive(Debug, Clone)]
pub struct WittenSolution {
    pub psi0: Spinor,
    pub grid: BallGrid,
    pub geometry: Arc<GridGeometry>,
    pub field: DiscreteSpinorField,
    pub runs: Vec<WittenRun>,
    pub dirichlet: Extrapolated,
    pub potential: Extrapolated,
    pub total: Extrapolated,
    pub max_density: f64,
    pub sup_bound_ok: bool,
}

impl WittenSolution {
    pub fn operator(&self, kind: StencilKind) -> DiscreteOperator<'_> {
        DiscreteOperator::new(&self.grid, self.geometry.clone(), kind)
    }

    pub fn r_max(&self) -> f64 {
        self.grid.r_max
    }
}

/// Solves on a full ball grid for each radius in `cfg.radii`.
pub fn solve_witten<M: ChartMetric + ?Sized>(
    metric: &M,
    cfg: &WittenConfig,
    psi0: Spinor,
) -> Result<WittenSolution> {
    solve_witten_with_inner(metric, cfg, psi0, &|_, _| psi0)
}

/// As [`solve_witten`], with Dirichlet data `inner(x, R_max)` on the inner
/// shell of an annular grid (`cfg.r_min > 0`).
pub fn solve_witten_with_inner<M: ChartMetric + ?Sized>(
    metric: &M,
    cfg: &WittenConfig,
    psi0: Spinor,
    inner: &dyn Fn(&Point, f64) -> Spinor,
) -> Result<WittenSolution> {
    cfg.validate()?;
    if (psi0.norm_squared() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "Ψ₀ must be normalised, |Ψ₀|² = {}",
            psi0.norm_squared()
        )));
    }
    let mut runs = Vec::new();
    let mut last = None;
    for &r in &cfg.radii {
        drop(last.take());
        let grid = build_grid_with(cfg.h, r, cfg.r_min, cfg.memory_cap)?;
        let geometry = Arc::new(GridGeometry::build(metric, &grid)?);
        let (node, rmin) = geometry.min_scalar_curvature();
        if rmin < -1e-12 {
            return Err(Error::NegativeScalarCurvature {
                value: rmin,
                point: coords(&grid.position(node)),
            });
        }
        let op = DiscreteOperator::new(&grid, geometry.clone(), StencilKind::Laplacian);
        let mut data = DiscreteSpinorField::constant(&grid, psi0);
        let outer = r;
        data.set_shell(&grid, |x| {
            if cfg.r_min > 0.0 && x.norm() < 0.5 * (cfg.r_min + outer) {
                inner(x, outer)
            } else {
                psi0
            }
        });
        let (field, solve) = solve_dirichlet(&op, &data, &cfg.solver)?;
        let green = op.green_identity(&field)?;
        let dirac = op.with_kind(StencilKind::Dirac);
        let dfield = dirac.dirac(&field);
        let dirac_residual = dirac.norm(&dfield);
        let dirac_residual_core = {
            let h3 = grid.h.powi(3);
            (0..grid.n_interior())
                .filter(|&p| grid.position(p).norm() < 0.5 * r)
                .map(|p| dfield.values[p].norm_squared() * geometry.nodes[p].sqrt_det * h3)
                .sum::<f64>()
                .sqrt()
        };
        drop(dfield);
        let density = field.density();
        let interior = &density[..grid.n_interior()];
        runs.push(WittenRun {
            r_max: r,
            grid: grid.summary(),
            solve,
            dirichlet: green.dirichlet,
            potential: green.potential,
            flux: green.flux,
            green_residual: green.residual,
            dirac_residual,
            dirac_residual_core,
            max_density: density.iter().copied().fold(0.0, f64::max),
            min_density: interior.iter().copied().fold(f64::INFINITY, f64::min),
        });
        drop(op);
        drop(dirac);
        last = Some((grid, geometry, field));
    }
    let (grid, geometry, field) = last.expect("at least one radius");
    let radii: Vec<f64> = runs.iter().map(|r| r.r_max).collect();
    let ex = |f: fn(&WittenRun) -> f64| {
        let v: Vec<f64> = runs.iter().map(f).collect();
        extrapolate_in_inverse_radius(&radii, &v)
    };
    let dirichlet = ex(|r| r.dirichlet);
    let potential = ex(|r| r.potential);
    let total = ex(|r| r.dirichlet + r.potential);
    let max_density = runs.iter().map(|r| r.max_density).fold(0.0, f64::max);
    Ok(WittenSolution {
        psi0,
        grid,
        geometry,
        field,
        sup_bound_ok: max_density <= psi0.norm_squared() + cfg.sup_allowance,
        max_density,
        runs,
        dirichlet,
        potential,
        total,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyLedger {
    /// `∫|DΨ|² dμ`, extrapolated in `1/R`.
    pub dirichlet: f64,
    /// `¼∫R|Ψ|² dμ`, extrapolated in `1/R`.
    pub potential: f64,
    pub total: f64,
    pub extrapolation_error: f64,
    /// `4π m |Ψ₀|²`.
    pub mass_side: f64,
    /// `|total - mass_side| / mass_side`, or the absolute difference when
    /// the mass vanishes.
    pub identity_gap: f64,
    /// `0 ≤ ∫|DΨ|² ≤ 4πm (1 + 5%)`.
    pub positive_energy_ok: bool,
    /// `∫|∇f|² dμ` with `f = |Ψ|²` on the largest radius.
    pub f_gradient_energy: f64,
    /// `16π m`.
    pub f_gradient_bound: f64,
    /// `Vol{f < c}` for a few thresholds, keyed by `c`.
    pub exceptional_volumes: BTreeMap<String, f64>,
    pub runs: Vec<WittenRun>,
}

pub fn mass_identity(sol: &WittenSolution, mass: f64) -> EnergyLedger {
    let mass_side = 4.0 * PI * mass * sol.psi0.norm_squared();
    let total = sol.total.value;
    let identity_gap = if mass_side > 0.0 {
        (total - mass_side).abs() / mass_side
    } else {
        total.abs()
    };
    let d = sol.dirichlet.value;
    let tol = 1e-12 * mass_side.max(1.0);
    let f = sol.field.density();
    let exceptional_volumes = [0.25, 0.5, 0.75]
        .iter()
        .map(|&c| (format!("{c}"), sublevel_volume(sol, &f, c)))
        .collect();
    EnergyLedger {
        dirichlet: d,
        potential: sol.potential.value,
        total,
        extrapolation_error: sol.total.error,
        mass_side,
        identity_gap,
        positive_energy_ok: d >= -tol && d <= 1.05 * mass_side + tol,
        f_gradient_energy: gradient_energy(sol, &f),
        f_gradient_bound: 16.0 * PI * mass,
        exceptional_volumes,
        runs: sol.runs.clone(),
    }
}

fn sublevel_volume(sol: &WittenSolution, f: &[f64], c: f64) -> f64 {
    (0..sol.grid.n_interior())
        .filter(|&p| f[p] < c)
        .map(|p| sol.geometry.volume_weight(p, sol.grid.h))
        .fold(0.0, |a, b| a + b)
}

/// `∫|∇f|² dμ` from centred differences of `f`.
fn gradient_energy(sol: &WittenSolution, f: &[f64]) -> f64 {
    let g = &sol.grid;
    let inv2h = 0.5 / g.h;
    let mut e = 0.0;
    for p in 0..g.n_interior() {
        let nb = g.neighbours(p);
        let node = &sol.geometry.nodes[p];
        let df: [f64; 3] =
            std::array::from_fn(|j| (f[nb[2 * j + 1] as usize] - f[nb[2 * j] as usize]) * inv2h);
        let mut q = 0.0;
        for j in 0..3 {
            for k in 0..3 {
                q += node.ginv[(j, k)] * df[j] * df[k];
            }
        }
        e += q * node.sqrt_det;
    }
    e * g.h.powi(3)
}

#[derive(Debug, Clone, Serialize)]
pub struct SubharmonicityReport {
    /// `min_p (Δ_g f - ½ R f - 2|DΨ|²)` over checked nodes.
    pub worst_violation: f64,
    pub worst_point: [f64; 3],
    pub nodes_checked: usize,
    pub max_density_interior: f64,
    pub max_density_shell: f64,
    /// The maximum of `f` sits on the shell.
    pub max_on_boundary: bool,
}

/// Evaluates `Δ_g f - ½ R f - 2|DΨ|²` with the face-based Laplace–Beltrami
/// stencil that matches the discrete spinor Laplacian.
pub fn subharmonicity_check(sol: &WittenSolution) -> SubharmonicityReport {
    let g = &sol.grid;
    let geo = &sol.geometry;
    let n_int = g.n_interior();
    let f = sol.field.density();
    let halves = [sol.field.half(0), sol.field.half(1)];
    let h = g.h;
    let inv_h = 1.0 / h;
    let inv2h = 0.5 * inv_h;
    let mut worst = f64::INFINITY;
    let mut worst_point = [0.0; 3];
    let mut checked = 0;
    let centred = |x: &[HalfSpinor], r: usize, k: usize| -> HalfSpinor {
        let nb = g.neighbours(r);
        let node = &geo.nodes[r];
        (x[nb[2 * k + 1] as usize] - x[nb[2 * k] as usize]) * inv2h
            + crate::grid::operator_support::times_i_sigma(&node.axial[k], &x[r], 0.5)
    };
    for p in 0..n_int {
        if !geo.diagonal && !g.is_deep(p) {
            continue;
        }
        let nb = g.neighbours(p);
        let node = &geo.nodes[p];
        let faces = geo.face_coefficients(p);
        let mut lap = 0.0;
        let mut grad2 = 0.0;
        for d in 0..6 {
            let q = nb[d] as usize;
            let (a, c) = faces[d];
            lap += a * (f[q] - f[p]);
            let orient = if d % 2 == 1 { inv_h } else { -inv_h };
            for x in &halves {
                let df = (x[q] - x[p]) * orient
                    + crate::grid::operator_support::times_i_sigma(&c, &(x[q] + x[p]), 0.25);
                grad2 += a * df.norm_squared();
            }
        }
        lap /= h * h * node.sqrt_det;
        grad2 /= node.sqrt_det;
        if !geo.diagonal {
            for j in 0..3 {
                for k in 0..3 {
                    if j == k {
                        continue;
                    }
                    let w = |r: usize| {
                        let nr = g.neighbours(r);
                        let n = &geo.nodes[r];
                        n.sqrt_det
                            * n.ginv[(j, k)]
                            * (f[nr[2 * k + 1] as usize] - f[nr[2 * k] as usize])
                            * inv2h
                    };
                    lap += (w(nb[2 * j + 1] as usize) - w(nb[2 * j] as usize)) * inv2h
                        / node.sqrt_det;
                    for x in &halves {
                        let vj = centred(x, p, j);
                        let vk = centred(x, p, k);
                        grad2 += 2.0 * node.ginv[(j, k)] * vj.dotc(&vk).re;
                    }
                }
            }
        }
        let v = lap - 0.5 * node.scalar_curvature * f[p] - grad2;
        checked += 1;
        if v < worst {
            worst = v;
            worst_point = coords(&g.position(p));
        }
    }
    let max_int = f[..n_int].iter().copied().fold(0.0, f64::max);
    let max_shell = f[n_int..].iter().copied().fold(0.0, f64::max);
    SubharmonicityReport {
        worst_violation: if checked > 0 { worst } else { 0.0 },
        worst_point,
        nodes_checked: checked,
        max_density_interior: max_int,
        max_density_shell: max_shell,
        max_on_boundary: max_int <= max_shell,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalSet {
    pub c: f64,
    /// `Vol{|Ψ|² < c}` in `dμ`.
    pub volume: f64,
    /// `16π c₃ m / ((1 - c)² k̂²)`, bounding `volume^{1/3}`.
    pub bound: f64,
    pub holds: bool,
    pub c3: f64,
    pub k_hat: f64,
    pub mass: f64,
    /// `∫(1 - f)⁶ dμ`.
    pub one_minus_f_sixth: f64,
    /// `∫|∇f|² dμ`.
    pub f_gradient_energy: f64,
    /// `k̂² (∫(1 - f)⁶)^{1/3}` and `c₃ ∫|∇f|²`.
    pub sobolev_lhs: f64,
    pub sobolev_rhs: f64,
}

pub fn exceptional_set(sol: &WittenSolution, c: f64, k_hat: f64, mass: f64) -> Result<ExceptionalSet> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold must lie in (0,1), got {c}")));
    }
    let f = sol.field.density();
    let volume = sublevel_volume(sol, &f, c);
    let c3 = sobolev_c3();
    let bound = 16.0 * PI * c3 * mass / ((1.0 - c).powi(2) * k_hat * k_hat);
    let sixth: f64 = (0..sol.grid.n_interior())
        .map(|p| (1.0 - f[p]).powi(6) * sol.geometry.volume_weight(p, sol.grid.h))
        .sum();
    let grad = gradient_energy(sol, &f);
    Ok(ExceptionalSet {
        c,
        volume,
        bound,
        holds: volume.cbrt() <= bound,
        c3,
        k_hat,
        mass,
        one_minus_f_sixth: sixth,
        f_gradient_energy: grad,
        sobolev_lhs: k_hat * k_hat * sixth.cbrt(),
        sobolev_rhs: c3 * grad,
    })
}

/// `u(R)² u⁻² Ψ₀`: the exact truncated solution for a conformally flat
/// metric `u⁴δ` with data `Ψ₀` on `|x| = R`.
pub fn conformal_profile(
    factor: &dyn crate::geometry::ConformalFactor,
    psi0: Spinor,
    boundary_radius: f64,
) -> impl Fn(&Point) -> Spinor + '_ {
    let ub = factor.value(&Point::new(boundary_radius, 0.0, 0.0));
    move |x| psi0 * Complex64::from((ub / factor.value(x)).powi(2))
}
