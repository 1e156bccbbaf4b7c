//! Christoffel symbols and curvature from analytic metric derivatives.
//!
//! Index convention: `R^i_{jkl} = ∂_k Γ^i_{lj} - ∂_l Γ^i_{kj} + Γ^i_{kp} Γ^p_{lj}
//! - Γ^i_{lp} Γ^p_{kj}`, `R_ijkl = g_ia R^a_{jkl}`, `Ric_jl = R^i_{jil}`. The
//! round sphere has `R_1212 > 0`.

use nalgebra::Matrix3;
use serde::Serialize;

use super::metric::{ChartMetric, MetricJet};
use crate::{Point, Result};

/// `[i][j][k]` holds `Γ^i_{jk}`.
pub type Christoffel = [[[f64; 3]; 3]; 3];
/// `[i][j][k][l]` holds `R_ijkl` (all indices down).
pub type Riemann = [[[[f64; 3]; 3]; 3]; 3];
/// `[m][i][j][k][l]` holds `∇_m R_ijkl`.
pub type RiemannGradient = [Riemann; 3];

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureBundle {
    pub point: [f64; 3],
    pub christoffel: Christoffel,
    pub riemann: Riemann,
    /// Ricci tensor from derivatives of the Christoffel symbols, independent
    /// of the fully covariant Riemann assembly.
    pub ricci: [[f64; 3]; 3],
    pub scalar: f64,
    pub kretschmann: f64,
    pub sqrt_det_g: f64,
    #[serde(skip)]
    pub ginv: Matrix3<f64>,
    #[serde(skip)]
    pub gradient: Option<Box<RiemannGradient>>,
}

impl CurvatureBundle {
    /// Tensor norm `|R_ijkl| = sqrt(K)`.
    pub fn riemann_norm(&self) -> f64 {
        self.kretschmann.max(0.0).sqrt()
    }

    /// `|∇R|` with all five indices contracted with the metric.
    pub fn gradient_norm(&self) -> Option<f64> {
        let grad = self.gradient.as_deref()?;
        let mut sum = 0.0;
        let raised = raise_gradient(grad, &self.ginv);
        for m in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            sum += grad[m][i][j][k][l] * raised[m][i][j][k][l];
                        }
                    }
                }
            }
        }
        Some(sum.max(0.0).sqrt())
    }

    /// Largest violation of `R_ijkl = -R_jikl = -R_ijlk = R_klij`.
    pub fn symmetry_residual(&self) -> f64 {
        let r = &self.riemann;
        let mut worst: f64 = 0.0;
        for_each4(|i, j, k, l| {
            worst = worst
                .max((r[i][j][k][l] + r[j][i][k][l]).abs())
                .max((r[i][j][k][l] + r[i][j][l][k]).abs())
                .max((r[i][j][k][l] - r[k][l][i][j]).abs());
        });
        worst
    }

    /// Largest violation of `R_ijkl + R_iklj + R_iljk = 0`.
    pub fn bianchi_residual(&self) -> f64 {
        let r = &self.riemann;
        let mut worst: f64 = 0.0;
        for_each4(|i, j, k, l| {
            worst = worst.max((r[i][j][k][l] + r[i][k][l][j] + r[i][l][j][k]).abs());
        });
        worst
    }

    /// Largest difference between `g^ik R_ijkl` and the independently
    /// assembled Ricci tensor, and between their traces.
    pub fn contraction_residual(&self) -> f64 {
        let g = &self.ginv;
        let mut worst: f64 = 0.0;
        let mut scalar = 0.0;
        for j in 0..3 {
            for l in 0..3 {
                let mut c = 0.0;
                for i in 0..3 {
                    for k in 0..3 {
                        c += g[(i, k)] * self.riemann[i][j][k][l];
                    }
                }
                scalar += g[(j, l)] * c;
                worst = worst.max((c - self.ricci[j][l]).abs());
            }
        }
        worst.max((scalar - self.scalar).abs())
    }
}

fn for_each4(mut f: impl FnMut(usize, usize, usize, usize)) {
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    f(i, j, k, l);
                }
            }
        }
    }
}

/// `Γ^i_{jk} = ½ g^il (∂_j g_lk + ∂_k g_lj - ∂_l g_jk)`.
pub fn christoffel<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<Christoffel> {
    Ok(christoffel_from_jet(&MetricJet::at(metric, x)?))
}

pub(crate) fn christoffel_from_jet(jet: &MetricJet) -> Christoffel {
    let lowered = lowered_christoffel(jet);
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in j..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    s += jet.ginv[(i, l)] * lowered[l][j][k];
                }
                gamma[i][j][k] = s;
                gamma[i][k][j] = s;
            }
        }
    }
    gamma
}

/// `Γ_{ljk} = ½ (∂_j g_lk + ∂_k g_lj - ∂_l g_jk)`.
fn lowered_christoffel(jet: &MetricJet) -> Christoffel {
    let dg = &jet.dg;
    let mut out = [[[0.0; 3]; 3]; 3];
    for l in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[l][j][k] = 0.5 * (dg[j][(l, k)] + dg[k][(l, j)] - dg[l][(j, k)]);
            }
        }
    }
    out
}

/// `[m][i][j][k]` holds `∂_m Γ^i_{jk}`.
fn christoffel_derivative(jet: &MetricJet) -> [Christoffel; 3] {
    let lowered = lowered_christoffel(jet);
    let dginv = jet.dginv();
    let ddg = &jet.ddg;
    let mut out = [[[[0.0; 3]; 3]; 3]; 3];
    for m in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let mut s = 0.0;
                    for l in 0..3 {
                        let d_lowered =
                            0.5 * (ddg[m][j][(l, k)] + ddg[m][k][(l, j)] - ddg[m][l][(j, k)]);
                        s += dginv[m][(i, l)] * lowered[l][j][k] + jet.ginv[(i, l)] * d_lowered;
                    }
                    out[m][i][j][k] = s;
                }
            }
        }
    }
    out
}

fn riemann_from_jet(jet: &MetricJet, gamma: &Christoffel) -> Riemann {
    let ddg = &jet.ddg;
    let g = &jet.g;
    let mut r = [[[[0.0; 3]; 3]; 3]; 3];
    for_each4(|i, j, k, l| {
        // R_ijkl = ½(∂_jk g_il + ∂_il g_jk - ∂_ik g_jl - ∂_jl g_ik)
        //        + g_pq (Γ^p_jk Γ^q_il - Γ^p_jl Γ^q_ik)
        let second = 0.5
            * (ddg[j][k][(i, l)] + ddg[i][l][(j, k)] - ddg[i][k][(j, l)] - ddg[j][l][(i, k)]);
        let mut quad = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                quad += g[(p, q)]
                    * (gamma[p][j][k] * gamma[q][i][l] - gamma[p][j][l] * gamma[q][i][k]);
            }
        }
        r[i][j][k][l] = second + quad;
    });
    r
}

fn ricci_from_jet(jet: &MetricJet, gamma: &Christoffel) -> [[f64; 3]; 3] {
    let dgamma = christoffel_derivative(jet);
    let mut ric = [[0.0; 3]; 3];
    for j in 0..3 {
        for l in 0..3 {
            // Ric_jl = ∂_i Γ^i_lj - ∂_l Γ^i_ij + Γ^i_ip Γ^p_lj - Γ^i_lp Γ^p_ij
            let mut s = 0.0;
            for i in 0..3 {
                s += dgamma[i][i][l][j] - dgamma[l][i][i][j];
                for p in 0..3 {
                    s += gamma[i][i][p] * gamma[p][l][j] - gamma[i][l][p] * gamma[p][i][j];
                }
            }
            ric[j][l] = s;
        }
    }
    ric
}

/// Scalar curvature from the Christoffel-derivative route only.
pub(crate) fn scalar_curvature_from_jet(jet: &MetricJet) -> f64 {
    let gamma = christoffel_from_jet(jet);
    let ric = ricci_from_jet(jet, &gamma);
    trace_with(&jet.ginv, &ric)
}

pub fn scalar_curvature<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<f64> {
    Ok(scalar_curvature_from_jet(&MetricJet::at(metric, x)?))
}

fn trace_with(ginv: &Matrix3<f64>, t: &[[f64; 3]; 3]) -> f64 {
    let mut s = 0.0;
    for j in 0..3 {
        for l in 0..3 {
            s += ginv[(j, l)] * t[j][l];
        }
    }
    s
}

/// Raises all four indices of a covariant 4-tensor.
pub fn raise_all(r: &Riemann, ginv: &Matrix3<f64>) -> Riemann {
    let mut cur = *r;
    for slot in 0..4 {
        let mut next = [[[[0.0; 3]; 3]; 3]; 3];
        for_each4(|i, j, k, l| {
            let idx = [i, j, k, l];
            let mut s = 0.0;
            for a in 0..3 {
                let mut src = idx;
                src[slot] = a;
                s += ginv[(idx[slot], a)] * cur[src[0]][src[1]][src[2]][src[3]];
            }
            next[i][j][k][l] = s;
        });
        cur = next;
    }
    cur
}

fn raise_gradient(grad: &RiemannGradient, ginv: &Matrix3<f64>) -> RiemannGradient {
    let mut raised: RiemannGradient = std::array::from_fn(|m| raise_all(&grad[m], ginv));
    let copy = raised;
    for m in 0..3 {
        for_each4(|i, j, k, l| {
            let mut s = 0.0;
            for a in 0..3 {
                s += ginv[(m, a)] * copy[a][i][j][k][l];
            }
            raised[m][i][j][k][l] = s;
        });
    }
    raised
}

/// `K = R_ijkl R^ijkl`.
pub fn kretschmann(r: &Riemann, ginv: &Matrix3<f64>) -> f64 {
    let up = raise_all(r, ginv);
    let mut s = 0.0;
    for_each4(|i, j, k, l| s += r[i][j][k][l] * up[i][j][k][l]);
    s
}

/// Step used for the finite-difference layer in `∇R`.
pub fn gradient_step(x: &Point) -> f64 {
    1e-4 * (1.0 + x.norm())
}

/// Full curvature bundle at `x`. With `with_gradient`, `∇_m R_ijkl` is
/// obtained from central differences of the analytic Riemann tensor at
/// step `1e-4 (1 + |x|)`.
pub fn curvature<M: ChartMetric + ?Sized>(
    metric: &M,
    x: &Point,
    with_gradient: bool,
) -> Result<CurvatureBundle> {
    let jet = MetricJet::at(metric, x)?;
    let gamma = christoffel_from_jet(&jet);
    let riemann = riemann_from_jet(&jet, &gamma);
    let ricci = ricci_from_jet(&jet, &gamma);
    let scalar = trace_with(&jet.ginv, &ricci);
    let kretschmann = kretschmann(&riemann, &jet.ginv);

    let gradient = if with_gradient {
        let h = gradient_step(x);
        let mut partial = [[[[[0.0; 3]; 3]; 3]; 3]; 3];
        for m in 0..3 {
            let mut xp = *x;
            let mut xm = *x;
            xp[m] += h;
            xm[m] -= h;
            let rp = riemann_at(metric, &xp)?;
            let rm = riemann_at(metric, &xm)?;
            for_each4(|i, j, k, l| {
                partial[m][i][j][k][l] = (rp[i][j][k][l] - rm[i][j][k][l]) / (2.0 * h);
            });
        }
        let mut grad = partial;
        for m in 0..3 {
            for_each4(|i, j, k, l| {
                let mut s = 0.0;
                for p in 0..3 {
                    s += gamma[p][m][i] * riemann[p][j][k][l]
                        + gamma[p][m][j] * riemann[i][p][k][l]
                        + gamma[p][m][k] * riemann[i][j][p][l]
                        + gamma[p][m][l] * riemann[i][j][k][p];
                }
                grad[m][i][j][k][l] -= s;
            });
        }
        Some(Box::new(grad))
    } else {
        None
    };

    Ok(CurvatureBundle {
        point: [x[0], x[1], x[2]],
        christoffel: gamma,
        riemann,
        ricci,
        scalar,
        kretschmann,
        sqrt_det_g: jet.det.sqrt(),
        ginv: jet.ginv,
        gradient,
    })
}

fn riemann_at<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<Riemann> {
    let jet = MetricJet::at(metric, x)?;
    let gamma = christoffel_from_jet(&jet);
    Ok(riemann_from_jet(&jet, &gamma))
}
