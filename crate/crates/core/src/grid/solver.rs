use serde::{Deserialize, Serialize};

use super::field::{DiscreteSpinorField, HalfSpinor};
use super::operator::{DiscreteOperator, StencilKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative residual target in the preconditioned norm.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-2) {
            return Err(Error::InvalidArgument(format!(
                "solver tol must lie in (0, 1e-2], got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    /// 0 for the upper 2-spinor block, 1 for the lower.
    pub block: usize,
    pub iterations: usize,
    /// `‖r‖_{M⁻¹} / ‖b‖_{M⁻¹}` after each iteration, starting with the
    /// initial guess.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub blocks: Vec<BlockReport>,
    pub relative_residual: f64,
    pub converged: bool,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.blocks.iter().map(|b| b.iterations).sum()
    }
}

/// Solves `LΨ = 0` on the interior with `Ψ` fixed on the shell.
///
/// Shell values of `boundary` are the Dirichlet data; its interior values
/// are the initial guess.
pub fn solve_dirichlet(
    op: &DiscreteOperator,
    boundary: &DiscreteSpinorField,
    cfg: &SolverConfig,
) -> Result<(DiscreteSpinorField, SolveReport)> {
    solve_dirichlet_with_source(op, boundary, None, cfg)
}

/// Solves `LΨ = f` on the interior with `Ψ` fixed on the shell.
pub fn solve_dirichlet_with_source(
    op: &DiscreteOperator,
    boundary: &DiscreteSpinorField,
    source: Option<&DiscreteSpinorField>,
    cfg: &SolverConfig,
) -> Result<(DiscreteSpinorField, SolveReport)> {
    cfg.validate()?;
    if op.kind != StencilKind::Laplacian {
        return Err(Error::InvalidArgument(
            "the Dirichlet solver needs the Laplacian stencil".into(),
        ));
    }
    boundary.ensure(op.grid)?;
    if let Some(f) = source {
        f.ensure(op.grid)?;
    }
    let precond: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut halves = [boundary.half(0), boundary.half(1)];
    let mut blocks = Vec::new();
    let mut worst: f64 = 0.0;
    for (b, x) in halves.iter_mut().enumerate() {
        let f = source.map(|s| s.half(b));
        let zero = x.iter().all(|v| v.norm_squared() == 0.0)
            && f.as_ref().is_none_or(|f| f.iter().all(|v| v.norm_squared() == 0.0));
        if zero {
            continue;
        }
        let report = pcr(op, x, f.as_deref(), &precond, cfg, b);
        let last = *report.history.last().unwrap_or(&0.0);
        worst = worst.max(last);
        let failed = !(last <= cfg.tol);
        blocks.push(report);
        if failed {
            let history = blocks.iter().flat_map(|b| b.history.clone()).collect();
            return Err(Error::NonConvergence {
                iterations: blocks.iter().map(|b| b.iterations).sum(),
                residual: last,
                history,
            });
        }
    }
    let field = DiscreteSpinorField::from_halves(op.grid, &halves[0], &halves[1]);
    Ok((
        field,
        SolveReport {
            blocks,
            relative_residual: worst,
            converged: true,
        },
    ))
}

struct Workspace<'a> {
    weight: Vec<f64>,
    n: usize,
    precond: &'a [f64],
}

impl Workspace<'_> {
    fn dot(&self, u: &[HalfSpinor], v: &[HalfSpinor]) -> f64 {
        let mut s = 0.0;
        for p in 0..self.n {
            s += self.weight[p] * u[p].dotc(&v[p]).re;
        }
        s
    }

    fn precondition(&self, r: &[HalfSpinor], z: &mut [HalfSpinor]) {
        for p in 0..self.n {
            z[p] = r[p] * self.precond[p];
        }
    }
}

/// Jacobi-preconditioned conjugate residual in the `√g`-weighted product.
/// It minimises `‖r‖_{M⁻¹}` over the Krylov space, so the recorded history
/// is non-increasing.
fn pcr(
    op: &DiscreteOperator,
    x: &mut [HalfSpinor],
    source: Option<&[HalfSpinor]>,
    precond: &[f64],
    cfg: &SolverConfig,
    block: usize,
) -> BlockReport {
    let g = op.grid;
    let n = g.n_interior();
    let na = g.n_active();
    let ws = Workspace {
        weight: op.geometry.nodes[..n].iter().map(|v| v.sqrt_det).collect(),
        n,
        precond,
    };
    let rhs = |lx: &[HalfSpinor], p: usize| match source {
        Some(f) => f[p] - lx[p],
        None => -lx[p],
    };

    let mut tmp = vec![HalfSpinor::zeros(); na];
    let mut scratch = vec![HalfSpinor::zeros(); na];
    // ‖b‖ with b = f - L(0_interior, boundary)
    scratch[n..].copy_from_slice(&x[n..]);
    op.laplacian_half(&scratch, &mut tmp);
    let b: Vec<HalfSpinor> = (0..n).map(|p| rhs(&tmp, p)).collect();
    let mut zb = vec![HalfSpinor::zeros(); n];
    ws.precondition(&b, &mut zb);
    let bnorm = ws.dot(&b, &zb).max(0.0).sqrt();

    op.laplacian_half(x, &mut tmp);
    let mut r: Vec<HalfSpinor> = (0..n).map(|p| rhs(&tmp, p)).collect();
    // search directions live on the full active range with zero shell
    let mut z = vec![HalfSpinor::zeros(); na];
    ws.precondition(&r, &mut z);
    let mut az = vec![HalfSpinor::zeros(); na];
    op.laplacian_half(&z, &mut az);
    let mut pdir = z.clone();
    let mut ap = az.clone();
    let mut rho = ws.dot(&z, &az);
    let mut q = vec![HalfSpinor::zeros(); n];

    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut history = vec![ws.dot(&r, &z).max(0.0).sqrt() / scale];
    let mut iterations = 0;
    while history[history.len() - 1] > cfg.tol && iterations < cfg.max_iters {
        ws.precondition(&ap, &mut q);
        let denom = ws.dot(&ap, &q);
        if !(denom > 0.0) || !(rho > 0.0) {
            break;
        }
        let alpha = rho / denom;
        for p in 0..n {
            x[p] += pdir[p] * alpha;
            r[p] -= ap[p] * alpha;
            z[p] -= q[p] * alpha;
        }
        op.laplacian_half(&z, &mut az);
        let rho_new = ws.dot(&z, &az);
        let beta = rho_new / rho;
        rho = rho_new;
        for p in 0..n {
            pdir[p] = z[p] + pdir[p] * beta;
            ap[p] = az[p] + ap[p] * beta;
        }
        iterations += 1;
        history.push(ws.dot(&r, &z).max(0.0).sqrt() / scale);
    }
    BlockReport {
        block,
        iterations,
        history,
    }
}
