use num_complex::Complex64;
use serde::Serialize;

use super::field::{DiscreteSpinorField, HalfSpinor};
use super::geometry::GridGeometry;
use super::BallGrid;
use crate::geometry::ChartMetric;
use crate::spin::{apply_flat_gamma, Spinor};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StencilKind {
    Dirac,
    Laplacian,
}

/// Matrix-free discrete operator over the active nodes of a grid. Rows are
/// interior nodes; shell values enter as data.
///
/// The Laplacian is the gradient of the discrete quadratic form
/// `h³ [Σ_faces A_f |D_f Ψ|² + Σ_nodes Σ_{j≠k} √g g^{jk} (D_jΨ|D_kΨ)]`
/// divided by `√g`, plus `R/4`. Here
/// `D_f Ψ = (Ψ_q - Ψ_p)/h - (i/2) E_f (Ψ_q + Ψ_p)` on the face from `p` to
/// `q = p + e_j` and `D_j` is the centred spin derivative. It is Hermitian
/// with respect to `Σ √g h³ Ψ*Φ` exactly, and acts blockwise on the two
/// 2-spinor halves.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<'g> {
    pub grid: &'g BallGrid,
    pub geometry: std::sync::Arc<GridGeometry>,
    pub kind: StencilKind,
}

/// Terms of the discrete Green identity
/// `⟨LΨ, Ψ⟩_interior = dirichlet + potential - flux`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GreenIdentity {
    pub inner: f64,
    pub dirichlet: f64,
    pub potential: f64,
    pub flux: f64,
    pub residual: f64,
}

pub fn assemble_dirac<'g, M: ChartMetric + ?Sized>(
    metric: &M,
    grid: &'g BallGrid,
) -> Result<DiscreteOperator<'g>> {
    Ok(DiscreteOperator::new(
        grid,
        std::sync::Arc::new(GridGeometry::build(metric, grid)?),
        StencilKind::Dirac,
    ))
}

pub fn assemble_laplacian<'g, M: ChartMetric + ?Sized>(
    metric: &M,
    grid: &'g BallGrid,
) -> Result<DiscreteOperator<'g>> {
    Ok(DiscreteOperator::new(
        grid,
        std::sync::Arc::new(GridGeometry::build(metric, grid)?),
        StencilKind::Laplacian,
    ))
}

#[inline(always)]
pub(crate) fn sigma(c: &[f64; 3], v: &HalfSpinor) -> HalfSpinor {
    HalfSpinor::new(
        v[0] * c[2] + v[1] * Complex64::new(c[0], -c[1]),
        v[0] * Complex64::new(c[0], c[1]) - v[1] * c[2],
    )
}

/// `i s v`.
#[inline(always)]
pub(crate) fn times_i(v: HalfSpinor, s: f64) -> HalfSpinor {
    HalfSpinor::new(
        Complex64::new(-s * v[0].im, s * v[0].re),
        Complex64::new(-s * v[1].im, s * v[1].re),
    )
}

#[inline(always)]
fn split(v: &Spinor) -> [HalfSpinor; 2] {
    [HalfSpinor::new(v[0], v[1]), HalfSpinor::new(v[2], v[3])]
}

#[inline(always)]
fn join(a: HalfSpinor, b: HalfSpinor) -> Spinor {
    Spinor::new(a[0], a[1], b[0], b[1])
}

impl<'g> DiscreteOperator<'g> {
    pub fn new(grid: &'g BallGrid, geometry: std::sync::Arc<GridGeometry>, kind: StencilKind) -> Self {
        assert_eq!(geometry.len(), grid.n_active(), "geometry/grid mismatch");
        Self { grid, geometry, kind }
    }

    /// The same geometry viewed as the other stencil.
    pub fn with_kind(&self, kind: StencilKind) -> Self {
        Self {
            grid: self.grid,
            geometry: self.geometry.clone(),
            kind,
        }
    }

    pub fn apply(&self, field: &DiscreteSpinorField) -> Result<DiscreteSpinorField> {
        field.ensure(self.grid)?;
        Ok(match self.kind {
            StencilKind::Dirac => self.dirac(field),
            StencilKind::Laplacian => self.laplacian(field),
        })
    }

    /// Discrete adjoint with respect to `Σ √g h³ (·|·)`.
    pub fn apply_adjoint(&self, field: &DiscreteSpinorField) -> Result<DiscreteSpinorField> {
        field.ensure(self.grid)?;
        Ok(match self.kind {
            StencilKind::Dirac => self.dirac_adjoint(field),
            StencilKind::Laplacian => self.laplacian(field),
        })
    }

    /// `Σ_interior √g h³ (u|v)`.
    pub fn inner(&self, u: &DiscreteSpinorField, v: &DiscreteSpinorField) -> Complex64 {
        let h3 = self.grid.h.powi(3);
        (0..self.grid.n_interior())
            .map(|p| u.values[p].dotc(&v.values[p]) * self.geometry.nodes[p].sqrt_det)
            .sum::<Complex64>()
            * h3
    }

    pub fn norm(&self, u: &DiscreteSpinorField) -> f64 {
        self.inner(u, u).re.max(0.0).sqrt()
    }

    /// `(𝒟Φ)_p = i Σ_j G^j_p (D_j Φ)_p` with centred differences.
    pub fn dirac(&self, field: &DiscreteSpinorField) -> DiscreteSpinorField {
        let g = self.grid;
        let inv2h = 0.5 / g.h;
        let mut out = vec![Spinor::zeros(); g.n_active()];
        for (p, o) in out.iter_mut().enumerate().take(g.n_interior()) {
            let nb = g.neighbours(p);
            let node = &self.geometry.nodes[p];
            let here = split(&field.values[p]);
            let mut acc = Spinor::zeros();
            for j in 0..3 {
                let d = (field.values[nb[2 * j + 1] as usize] - field.values[nb[2 * j] as usize])
                    * Complex64::from(inv2h);
                let [mut d0, mut d1] = split(&d);
                // -i E_j = (i/2) (a_j·σ)
                d0 += times_i(sigma(&node.axial[j], &here[0]), 0.5);
                d1 += times_i(sigma(&node.axial[j], &here[1]), 0.5);
                let dj = join(d0, d1);
                for a in 0..3 {
                    let e = node.frame[(j, a)];
                    if e != 0.0 {
                        acc += apply_flat_gamma(a, &dj) * Complex64::from(e);
                    }
                }
            }
            *o = acc * Complex64::new(0.0, 1.0);
        }
        DiscreteSpinorField {
            grid: field.grid,
            values: out,
        }
    }

    fn dirac_adjoint(&self, field: &DiscreteSpinorField) -> DiscreteSpinorField {
        let g = self.grid;
        let inv2h = 0.5 / g.h;
        // w_j = √g · i G^j v on every active node
        let w: Vec<[Spinor; 3]> = (0..g.n_active())
            .map(|q| {
                let node = &self.geometry.nodes[q];
                let v = &field.values[q];
                std::array::from_fn(|j| {
                    let mut acc = Spinor::zeros();
                    for a in 0..3 {
                        acc += apply_flat_gamma(a, v) * Complex64::from(node.frame[(j, a)]);
                    }
                    acc * Complex64::new(0.0, node.sqrt_det)
                })
            })
            .collect();
        let mut out = vec![Spinor::zeros(); g.n_active()];
        for (p, o) in out.iter_mut().enumerate().take(g.n_interior()) {
            let nb = g.neighbours(p);
            let node = &self.geometry.nodes[p];
            let mut acc = Spinor::zeros();
            for j in 0..3 {
                let diff = (w[nb[2 * j + 1] as usize][j] - w[nb[2 * j] as usize][j])
                    * Complex64::from(inv2h);
                let wp = split(&w[p][j]);
                let [mut d0, mut d1] = split(&diff);
                // - i E_j w = (i/2)(a_j·σ) w
                d0 += times_i(sigma(&node.axial[j], &wp[0]), 0.5);
                d1 += times_i(sigma(&node.axial[j], &wp[1]), 0.5);
                acc += join(d0, d1);
            }
            *o = acc * Complex64::from(-1.0 / node.sqrt_det);
        }
        DiscreteSpinorField {
            grid: field.grid,
            values: out,
        }
    }

    fn laplacian(&self, field: &DiscreteSpinorField) -> DiscreteSpinorField {
        let n = self.grid.n_active();
        let mut outs = [vec![HalfSpinor::zeros(); n], vec![HalfSpinor::zeros(); n]];
        for (b, out) in outs.iter_mut().enumerate() {
            let half = field.half(b);
            self.laplacian_half(&half, out);
        }
        DiscreteSpinorField::from_halves(self.grid, &outs[0], &outs[1])
    }

    /// Applies the Laplacian to one 2-spinor block. Interior rows only;
    /// shell entries of `out` are zeroed.
    pub fn laplacian_half(&self, x: &[HalfSpinor], out: &mut [HalfSpinor]) {
        self.raw_gradient(x, out, false);
        let n_int = self.grid.n_interior();
        for p in 0..n_int {
            let node = &self.geometry.nodes[p];
            out[p] = out[p] / node.sqrt_det + x[p] * (0.25 * node.scalar_curvature);
        }
        for o in &mut out[n_int..] {
            *o = HalfSpinor::zeros();
        }
    }

    /// Jacobi diagonal of the Laplacian at interior nodes.
    pub fn diagonal(&self) -> Vec<f64> {
        let h2 = self.grid.h * self.grid.h;
        (0..self.grid.n_interior())
            .map(|p| {
                let node = &self.geometry.nodes[p];
                let a: f64 = self.geometry.faces[p].iter().map(|f| f.a).sum();
                a / (h2 * node.sqrt_det) + 0.25 * node.scalar_curvature.max(0.0)
            })
            .collect()
    }

    /// Gradient of the Dirichlet form with respect to `x̄` (without the
    /// `1/√g` factor and the potential). With `shell_rows`, shell entries
    /// receive their contributions too; otherwise they are left untouched.
    pub(crate) fn raw_gradient(&self, x: &[HalfSpinor], out: &mut [HalfSpinor], shell_rows: bool) {
        let g = self.grid;
        let n_int = g.n_interior();
        let h = g.h;
        let inv_h = 1.0 / h;
        if shell_rows {
            for o in &mut out[n_int..] {
                *o = HalfSpinor::zeros();
            }
        }
        for p in 0..n_int {
            let nb = g.neighbours(p);
            let faces = &self.geometry.faces[p];
            let xp = x[p];
            let mut acc = HalfSpinor::zeros();
            for d in 0..6 {
                let q = nb[d] as usize;
                let f = &faces[d];
                let orient = if d % 2 == 1 { inv_h } else { -inv_h };
                let xq = x[q];
                // D_f oriented along +e_j; -(i/2)E_f = (i/4)(c·σ)
                let df = (xq - xp) * orient + times_i(sigma(&f.c, &(xq + xp)), 0.25);
                let t = times_i(sigma(&f.c, &df), -0.25);
                acc += (t - df * orient) * f.a;
                if shell_rows && q >= n_int {
                    out[q] += (t + df * orient) * f.a;
                }
            }
            out[p] = acc;
        }
        if !self.geometry.diagonal {
            self.mixed_terms(x, out, shell_rows);
        }
    }

    fn mixed_terms(&self, x: &[HalfSpinor], out: &mut [HalfSpinor], shell_rows: bool) {
        let g = self.grid;
        let n_int = g.n_interior();
        let inv2h = 0.5 / g.h;
        let w: Vec<[HalfSpinor; 3]> = (0..n_int)
            .map(|r| {
                let nb = g.neighbours(r);
                let node = &self.geometry.nodes[r];
                let v: [HalfSpinor; 3] = std::array::from_fn(|k| {
                    (x[nb[2 * k + 1] as usize] - x[nb[2 * k] as usize]) * inv2h
                        + times_i(sigma(&node.axial[k], &x[r]), 0.5)
                });
                std::array::from_fn(|j| {
                    let mut s = HalfSpinor::zeros();
                    for k in 0..3 {
                        if k != j {
                            s += v[k] * (node.sqrt_det * node.ginv[(j, k)]);
                        }
                    }
                    s
                })
            })
            .collect();
        for r in 0..n_int {
            let nb = g.neighbours(r);
            let node = &self.geometry.nodes[r];
            let mut acc = HalfSpinor::zeros();
            for j in 0..3 {
                // i E_j W = -(i/2)(a_j·σ) W
                acc += times_i(sigma(&node.axial[j], &w[r][j]), -0.5);
                let lo = nb[2 * j] as usize;
                let hi = nb[2 * j + 1] as usize;
                if lo < n_int {
                    acc += w[lo][j] * inv2h;
                } else if shell_rows {
                    out[lo] -= w[r][j] * inv2h;
                }
                if hi < n_int {
                    acc -= w[hi][j] * inv2h;
                } else if shell_rows {
                    out[hi] += w[r][j] * inv2h;
                }
            }
            out[r] += acc;
        }
    }

    /// Discrete Dirichlet energy `h³[Σ_f A_f |D_f|² + mixed]` of one block.
    pub fn dirichlet_energy_half(&self, x: &[HalfSpinor]) -> f64 {
        let g = self.grid;
        let n_int = g.n_interior();
        let inv_h = 1.0 / g.h;
        let mut e = 0.0;
        for p in 0..n_int {
            let nb = g.neighbours(p);
            for d in 0..6 {
                let q = nb[d] as usize;
                // each face once: from its lower end, or from p if q is shell
                if d % 2 == 0 && q < n_int {
                    continue;
                }
                let f = &self.geometry.faces[p][d];
                let orient = if d % 2 == 1 { inv_h } else { -inv_h };
                let df = (x[q] - x[p]) * orient + times_i(sigma(&f.c, &(x[q] + x[p])), 0.25);
                e += f.a * df.norm_squared();
            }
        }
        if !self.geometry.diagonal {
            let inv2h = 0.5 * inv_h;
            for r in 0..n_int {
                let nb = g.neighbours(r);
                let node = &self.geometry.nodes[r];
                let v: [HalfSpinor; 3] = std::array::from_fn(|k| {
                    (x[nb[2 * k + 1] as usize] - x[nb[2 * k] as usize]) * inv2h
                        + times_i(sigma(&node.axial[k], &x[r]), 0.5)
                });
                for j in 0..3 {
                    for k in 0..3 {
                        if j != k {
                            e += node.sqrt_det * node.ginv[(j, k)] * v[j].dotc(&v[k]).re;
                        }
                    }
                }
            }
        }
        e * g.h.powi(3)
    }

    /// `¼ Σ_interior R |Ψ|² √g h³` of one block.
    pub fn potential_energy_half(&self, x: &[HalfSpinor]) -> f64 {
        let h3 = self.grid.h.powi(3);
        (0..self.grid.n_interior())
            .map(|p| {
                let node = &self.geometry.nodes[p];
                0.25 * node.scalar_curvature * node.sqrt_det * x[p].norm_squared()
            })
            .sum::<f64>()
            * h3
    }

    /// Terms of the discrete Green identity for a full field.
    pub fn green_identity(&self, field: &DiscreteSpinorField) -> Result<GreenIdentity> {
        field.ensure(self.grid)?;
        let g = self.grid;
        let h3 = g.h.powi(3);
        let n_int = g.n_interior();
        let (mut inner, mut dirichlet, mut potential, mut flux) = (0.0, 0.0, 0.0, 0.0);
        let mut raw = vec![HalfSpinor::zeros(); g.n_active()];
        for b in 0..2 {
            let x = field.half(b);
            self.raw_gradient(&x, &mut raw, true);
            for p in 0..n_int {
                let node = &self.geometry.nodes[p];
                let lx = raw[p] / node.sqrt_det + x[p] * (0.25 * node.scalar_curvature);
                inner += node.sqrt_det * lx.dotc(&x[p]).re * h3;
            }
            for q in n_int..g.n_active() {
                flux += x[q].dotc(&raw[q]).re * h3;
            }
            dirichlet += self.dirichlet_energy_half(&x);
            potential += self.potential_energy_half(&x);
        }
        let residual = (inner - (dirichlet + potential - flux)).abs();
        Ok(GreenIdentity {
            inner,
            dirichlet,
            potential,
            flux,
            residual,
        })
    }

    /// `‖-𝒟_h 𝒟_h Ψ - L_h Ψ‖` in `L²(dμ)` over the interior; meaningful for
    /// fields supported away from the shell.
    pub fn weitzenboeck_defect(&self, field: &DiscreteSpinorField) -> Result<f64> {
        field.ensure(self.grid)?;
        let d1 = self.dirac(field);
        let d2 = self.dirac(&d1);
        let l = self.laplacian(field);
        let diff = DiscreteSpinorField {
            grid: field.grid,
            values: d2.values.iter().zip(&l.values).map(|(a, b)| -a - b).collect(),
        };
        Ok(self.norm(&diff))
    }
}
