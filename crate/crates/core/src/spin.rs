//! Orthonormal frames, Dirac matrices and the spin connection.
//!
//! Flat gammas in block form: `γ⁰ = S = diag(1, 1, -1, -1)` and
//! `γ^a = [[0, σ_a], [-σ_a, 0]]`, so `{γ^a, γ^b} = -2δ^{ab}` and `(γ⁰)² = 1`.
//! The spin derivative is `D_j = ∂_j - i E_j` with
//! `E_j = -(i/4) ω_{jab} γ^a γ^b`, `ω_{jab} = g(e_a, ∇_j e_b)`.
//!
//! In this representation `γ^a γ^b = -i ε_{abc} Σ_c` for `a ≠ b`, with
//! `Σ_c = diag(σ_c, σ_c)`, hence `E_j = -½ Σ_c a_{jc} Σ_c` where the axial
//! coefficients are `a_{jc} = ω_{jab}` for `(a, b, c)` cyclic.

use nalgebra::{Matrix3, Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::coords;
use crate::geometry::{christoffel, curvature, ChartMetric, MetricJet};
use crate::{Error, Point, Result};

pub type SpinMatrix = Matrix4<Complex64>;
pub type Spinor = Vector4<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub const ANTICOMMUTATION_TOLERANCE: f64 = 1e-12;
pub const CONNECTION_TOLERANCE: f64 = 1e-8;

/// Pauli matrices `σ_1, σ_2, σ_3`.
pub fn pauli() -> [[[Complex64; 2]; 2]; 3] {
    [
        [[ZERO, ONE], [ONE, ZERO]],
        [[ZERO, -I], [I, ZERO]],
        [[ONE, ZERO], [ZERO, -ONE]],
    ]
}

/// The signature matrix `S = diag(1, 1, -1, -1)` of the spin scalar product
/// `≺Ψ|Φ≻ = Ψ* S Φ`.
pub fn signature() -> SpinMatrix {
    SpinMatrix::from_diagonal(&Vector4::new(ONE, ONE, -ONE, -ONE))
}

/// `[γ⁰, γ¹, γ², γ³]`.
pub fn flat_gammas() -> [SpinMatrix; 4] {
    let s = pauli();
    let mut out = [signature(); 4];
    for a in 0..3 {
        let mut g = SpinMatrix::zeros();
        for r in 0..2 {
            for c in 0..2 {
                g[(r, c + 2)] = s[a][r][c];
                g[(r + 2, c)] = -s[a][r][c];
            }
        }
        out[a + 1] = g;
    }
    out
}

/// `Σ_c = diag(σ_c, σ_c)`.
pub fn block_pauli() -> [SpinMatrix; 3] {
    let s = pauli();
    std::array::from_fn(|c| {
        let mut m = SpinMatrix::zeros();
        for r in 0..2 {
            for k in 0..2 {
                m[(r, k)] = s[c][r][k];
                m[(r + 2, k + 2)] = s[c][r][k];
            }
        }
        m
    })
}

/// `γ^a Ψ` for spatial `a` in `0..3`, without forming the matrix.
#[inline]
pub fn apply_flat_gamma(a: usize, psi: &Spinor) -> Spinor {
    let (u0, u1, l0, l1) = (psi[0], psi[1], psi[2], psi[3]);
    match a {
        0 => Spinor::new(l1, l0, -u1, -u0),
        1 => Spinor::new(-I * l1, I * l0, I * u1, -I * u0),
        _ => Spinor::new(l0, -l1, -u0, u1),
    }
}

/// `(c · σ) ψ` on each 2-spinor block.
#[inline]
pub fn apply_axial(c: &[f64; 3], psi: &Spinor) -> Spinor {
    let blk = |p: Complex64, q: Complex64| {
        let top = p * c[2] + q * Complex64::new(c[0], -c[1]);
        let bot = p * Complex64::new(c[0], c[1]) - q * c[2];
        (top, bot)
    };
    let (a, b) = blk(psi[0], psi[1]);
    let (d, e) = blk(psi[2], psi[3]);
    Spinor::new(a, b, d, e)
}

/// `E_j Ψ = -½ (a_j · σ) Ψ` from the axial coefficients of one direction.
#[inline]
pub fn apply_connection(axial: &[f64; 3], psi: &Spinor) -> Spinor {
    apply_axial(axial, psi) * Complex64::new(-0.5, 0.0)
}

/// `e_a^j` stored column-wise: `e[(j, a)]`. Symmetric gauge `e = g^{-1/2}`.
#[derive(Debug, Clone, Serialize)]
pub struct OrthonormalFrame {
    #[serde(skip)]
    pub point: Point,
    pub e: Matrix3<f64>,
    /// `d_frame[k][(j, a)] = ∂_k e_a^j`.
    pub d_frame: [Matrix3<f64>; 3],
}

impl OrthonormalFrame {
    /// `max |g_ij e_a^i e_b^j - δ_ab|`.
    pub fn orthonormality_residual(&self, g: &Matrix3<f64>) -> f64 {
        (self.e.transpose() * g * self.e - Matrix3::identity()).abs().max()
    }
}

pub fn build_frame<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<OrthonormalFrame> {
    frame_from_jet(&MetricJet::at(metric, x)?)
}

pub(crate) fn frame_from_jet(jet: &MetricJet) -> Result<OrthonormalFrame> {
    let eig = SymmetricEigen::new(jet.g);
    if eig.eigenvalues.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::DegenerateMetric {
            point: coords(&jet.point),
            reason: format!("eigenvalues {:?}", eig.eigenvalues.as_slice()),
        });
    }
    let q = eig.eigenvectors;
    let sq = eig.eigenvalues.map(f64::sqrt);
    let e = q * Matrix3::from_diagonal(&sq.map(|s| 1.0 / s)) * q.transpose();
    // ∂(g^{1/2}) from the Sylvester equation A dA + dA A = dg in the eigenbasis
    let d_frame = std::array::from_fn(|k| {
        let b = q.transpose() * jet.dg[k] * q;
        let da = Matrix3::from_fn(|i, j| b[(i, j)] / (sq[i] + sq[j]));
        -(e * (q * da * q.transpose()) * e)
    });
    Ok(OrthonormalFrame {
        point: jet.point,
        e,
        d_frame,
    })
}

/// Spin connection data at one point.
#[derive(Debug, Clone, Serialize)]
pub struct SpinConnection {
    /// `omega[j][a][b] = ω_{jab}`, antisymmetric in `(a, b)`.
    pub omega: [[[f64; 3]; 3]; 3],
    /// `axial[j][c] = ω_{jab}` with `(a, b, c)` cyclic.
    pub axial: [[f64; 3]; 3],
    #[serde(skip)]
    pub e: [SpinMatrix; 3],
    pub certificate: SpinCertificate,
}

/// Pointwise residuals of the defining identities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpinCertificate {
    /// `max |½{G^α, G^β} + g^{αβ}|` with `g = diag(-1, g_ij)`.
    pub anticommutation: f64,
    /// `max |S G^α - (S G^α)*|`.
    pub hermiticity: f64,
    /// `max |∂_j G^k - i[E_j, G^k] + Γ^k_{jl} G^l|`.
    pub metric_compatibility: f64,
    /// `max |S E_j - (S E_j)*|`; zero iff `D_j` is compatible with `≺·|·≻`.
    pub product_compatibility: f64,
    pub orthonormality: f64,
}

impl SpinCertificate {
    pub fn check(&self) -> Result<()> {
        let checks = [
            ("anticommutation", self.anticommutation, ANTICOMMUTATION_TOLERANCE),
            ("orthonormality", self.orthonormality, 1e-10),
            ("hermiticity", self.hermiticity, ANTICOMMUTATION_TOLERANCE),
            ("metric compatibility", self.metric_compatibility, CONNECTION_TOLERANCE),
            ("product compatibility", self.product_compatibility, CONNECTION_TOLERANCE),
        ];
        for (check, residual, tolerance) in checks {
            if !(residual <= tolerance) {
                return Err(Error::ConstructionInconsistency {
                    check,
                    residual,
                    tolerance,
                });
            }
        }
        Ok(())
    }
}

/// `G^j = e_a^j γ^a`.
pub fn curved_gammas(frame: &OrthonormalFrame) -> [SpinMatrix; 3] {
    let flat = flat_gammas();
    std::array::from_fn(|j| {
        let mut m = SpinMatrix::zeros();
        for a in 0..3 {
            m += flat[a + 1] * Complex64::from(frame.e[(j, a)]);
        }
        m
    })
}

/// `E_j = -½ Σ_c a_{jc} Σ_c`.
pub fn connection_matrices(axial: &[[f64; 3]; 3]) -> [SpinMatrix; 3] {
    let sig = block_pauli();
    std::array::from_fn(|j| {
        let mut m = SpinMatrix::zeros();
        for c in 0..3 {
            m += sig[c] * Complex64::from(-0.5 * axial[j][c]);
        }
        m
    })
}

fn max_abs(m: &SpinMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn omega_from(
    jet: &MetricJet,
    frame: &OrthonormalFrame,
    gamma: &crate::geometry::Christoffel,
) -> [[[f64; 3]; 3]; 3] {
    let mut omega = [[[0.0; 3]; 3]; 3];
    for j in 0..3 {
        // (∇_j e_b)^k = ∂_j e_b^k + Γ^k_{jm} e_b^m
        let mut nabla = Matrix3::zeros();
        for b in 0..3 {
            for k in 0..3 {
                let mut s = frame.d_frame[j][(k, b)];
                for m in 0..3 {
                    s += gamma[k][j][m] * frame.e[(m, b)];
                }
                nabla[(k, b)] = s;
            }
        }
        let w = frame.e.transpose() * jet.g * nabla;
        for a in 0..3 {
            for b in 0..3 {
                omega[j][a][b] = w[(a, b)];
            }
        }
    }
    omega
}

/// Builds `E_j` at `x` and certifies it; an out-of-tolerance residual is a
/// construction-inconsistency error.
pub fn spin_connection<M: ChartMetric + ?Sized>(
    metric: &M,
    frame: &OrthonormalFrame,
    x: &Point,
) -> Result<SpinConnection> {
    let jet = MetricJet::at(metric, x)?;
    let gamma = christoffel(metric, x)?;
    let omega = omega_from(&jet, frame, &gamma);
    let axial = std::array::from_fn(|j| {
        [omega[j][1][2], omega[j][2][0], omega[j][0][1]]
    });
    let e = connection_matrices(&axial);
    let certificate = certify(&jet, frame, &gamma, &e);
    certificate.check()?;
    Ok(SpinConnection {
        omega,
        axial,
        e,
        certificate,
    })
}

impl SpinConnection {
    /// Builds and certifies the connection at `x`, discarding the result.
    pub fn certify_at<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<SpinCertificate> {
        let frame = build_frame(metric, x)?;
        Ok(spin_connection(metric, &frame, x)?.certificate)
    }
}

fn certify(
    jet: &MetricJet,
    frame: &OrthonormalFrame,
    gamma: &crate::geometry::Christoffel,
    e: &[SpinMatrix; 3],
) -> SpinCertificate {
    let flat = flat_gammas();
    let s = signature();
    let curved = curved_gammas(frame);
    let all = [flat[0], curved[0], curved[1], curved[2]];
    let mut anticommutation: f64 = 0.0;
    let mut hermiticity: f64 = 0.0;
    for a in 0..4 {
        let sg = s * all[a];
        hermiticity = hermiticity.max(max_abs(&(sg - sg.adjoint())));
        for b in 0..4 {
            let ginv = match (a, b) {
                (0, 0) => -1.0,
                (0, _) | (_, 0) => 0.0,
                _ => jet.ginv[(a - 1, b - 1)],
            };
            let anti = (all[a] * all[b] + all[b] * all[a]) * Complex64::from(0.5)
                + SpinMatrix::identity() * Complex64::from(ginv);
            anticommutation = anticommutation.max(max_abs(&anti));
        }
    }
    let mut metric_compatibility: f64 = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            let mut dg = SpinMatrix::zeros();
            for a in 0..3 {
                dg += flat[a + 1] * Complex64::from(frame.d_frame[j][(k, a)]);
            }
            let comm = e[j] * curved[k] - curved[k] * e[j];
            let mut r = dg - comm * I;
            for l in 0..3 {
                r += curved[l] * Complex64::from(gamma[k][j][l]);
            }
            metric_compatibility = metric_compatibility.max(max_abs(&r));
        }
    }
    let product_compatibility = e
        .iter()
        .map(|ej| {
            let se = s * ej;
            max_abs(&(se - se.adjoint()))
        })
        .fold(0.0, f64::max);
    SpinCertificate {
        anticommutation,
        hermiticity,
        metric_compatibility,
        product_compatibility,
        orthonormality: frame.orthonormality_residual(&jet.g),
    }
}

/// Frame, curved Dirac matrices and connection at one point.
#[derive(Debug, Clone)]
pub struct SpinStructure {
    pub frame: OrthonormalFrame,
    /// `[G⁰, G¹, G², G³]` with `G⁰ = γ⁰`.
    pub gammas: [SpinMatrix; 4],
    pub connection: SpinConnection,
}

pub fn spin_structure<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<SpinStructure> {
    let frame = build_frame(metric, x)?;
    let connection = spin_connection(metric, &frame, x)?;
    let c = curved_gammas(&frame);
    Ok(SpinStructure {
        gammas: [flat_gammas()[0], c[0], c[1], c[2]],
        frame,
        connection,
    })
}

/// Axial connection coefficients `a_{jc}` from a validated jet and frame.
pub(crate) fn axial_from_jet(jet: &MetricJet, frame: &OrthonormalFrame) -> [[f64; 3]; 3] {
    let gamma = crate::geometry::christoffel_from_jet(jet);
    let omega = omega_from(jet, frame, &gamma);
    std::array::from_fn(|j| [omega[j][1][2], omega[j][2][0], omega[j][0][1]])
}

/// Connection matrices without certification, for finite differencing.
fn raw_connection<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<[SpinMatrix; 3]> {
    let jet = MetricJet::at(metric, x)?;
    let frame = frame_from_jet(&jet)?;
    let gamma = crate::geometry::christoffel(metric, x)?;
    let omega = omega_from(&jet, &frame, &gamma);
    let axial = std::array::from_fn(|j| [omega[j][1][2], omega[j][2][0], omega[j][0][1]]);
    Ok(connection_matrices(&axial))
}

/// Frame and axial connection coefficients at `x`, certified.
pub fn frame_and_axial<M: ChartMetric + ?Sized>(
    metric: &M,
    x: &Point,
) -> Result<(OrthonormalFrame, [[f64; 3]; 3])> {
    let frame = build_frame(metric, x)?;
    let conn = spin_connection(metric, &frame, x)?;
    Ok((frame, conn.axial))
}

/// `max |[D_j, D_k] - (-⅛) R_{jklm} [G^l, G^m]|` with `∂E` from central
/// differences of step `step`. The commutator is
/// `-i(∂_j E_k - ∂_k E_j) - [E_j, E_k]`.
pub fn spin_curvature_check<M: ChartMetric + ?Sized>(
    metric: &M,
    x: &Point,
    step: f64,
) -> Result<f64> {
    let bundle = curvature(metric, x, false)?;
    let frame = build_frame(metric, x)?;
    let g = curved_gammas(&frame);
    let e = raw_connection(metric, x)?;
    let mut de = [[SpinMatrix::zeros(); 3]; 3];
    for k in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += step;
        xm[k] -= step;
        let ep = raw_connection(metric, &xp)?;
        let em = raw_connection(metric, &xm)?;
        for j in 0..3 {
            de[k][j] = (ep[j] - em[j]) * Complex64::from(0.5 / step);
        }
    }
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        for k in 0..3 {
            let lhs = (de[j][k] - de[k][j]) * (-I) - (e[j] * e[k] - e[k] * e[j]);
            let mut rhs = SpinMatrix::zeros();
            for l in 0..3 {
                for m in 0..3 {
                    let r = bundle.riemann[j][k][l][m];
                    if r != 0.0 {
                        rhs += (g[l] * g[m] - g[m] * g[l]) * Complex64::from(-0.125 * r);
                    }
                }
            }
            worst = worst.max(max_abs(&(lhs - rhs)));
        }
    }
    Ok(worst)
}

/// FD check of `∂_j ≺Ψ|Φ≻ = ≺D_jΨ|Φ≻ + ≺Ψ|D_jΦ≻` for the smooth fields
/// `Ψ = ψ₀ cos(w·x) + ψ₁ sin(w·x)` built from the given coefficients.
pub fn product_compatibility_fd<M: ChartMetric + ?Sized>(
    metric: &M,
    x: &Point,
    step: f64,
    psi: [Spinor; 2],
    phi: [Spinor; 2],
    wave: nalgebra::Vector3<f64>,
) -> Result<f64> {
    let s = signature();
    let field = |c: &[Spinor; 2], y: &Point| {
        let t = wave.dot(y);
        c[0] * Complex64::from(t.cos()) + c[1] * Complex64::from(t.sin())
    };
    let dfield = |c: &[Spinor; 2], y: &Point, j: usize| {
        let t = wave.dot(y);
        (c[1] * Complex64::from(t.cos()) - c[0] * Complex64::from(t.sin())) * Complex64::from(wave[j])
    };
    let pair = |a: &Spinor, b: &Spinor| (a.adjoint() * s * b)[(0, 0)];
    let e = raw_connection(metric, x)?;
    let mut worst: f64 = 0.0;
    for j in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[j] += step;
        xm[j] -= step;
        let fd = (pair(&field(&psi, &xp), &field(&phi, &xp))
            - pair(&field(&psi, &xm), &field(&phi, &xm)))
            / (2.0 * step);
        let p = field(&psi, x);
        let f = field(&phi, x);
        let dp = dfield(&psi, x, j) - e[j] * p * I;
        let df = dfield(&phi, x, j) - e[j] * f * I;
        worst = worst.max((fd - pair(&dp, &f) - pair(&p, &df)).norm());
    }
    Ok(worst)
}

/// The unit spinor with a one in component `k`.
pub fn basis_spinor(k: usize) -> Spinor {
    let mut s = Spinor::zeros();
    s[k] = Complex64::new(1.0, 0.0);
    s
}

/// Worst certificate residuals over a point set, plus the halving ratio of
/// the spin curvature residual at one point.
#[derive(Debug, Clone, Serialize)]
pub struct SpinAudit {
    pub family: String,
    pub points: usize,
    pub anticommutation: f64,
    pub hermiticity: f64,
    pub metric_compatibility: f64,
    pub product_compatibility: f64,
    pub orthonormality: f64,
    pub curvature_point: [f64; 3],
    /// Residuals at steps `1e-2` and `5e-3`.
    pub curvature_residuals: [f64; 2],
    pub curvature_ratio: f64,
}

impl SpinAudit {
    pub fn certificates_hold(&self) -> bool {
        self.anticommutation < ANTICOMMUTATION_TOLERANCE
            && self.hermiticity < ANTICOMMUTATION_TOLERANCE
            && self.metric_compatibility < CONNECTION_TOLERANCE
            && self.product_compatibility < CONNECTION_TOLERANCE
    }

    /// Ratio in `[3.4, 4.6]`, or both residuals at rounding level.
    pub fn curvature_converges(&self) -> bool {
        (3.4..=4.6).contains(&self.curvature_ratio) || self.curvature_residuals[0] < 1e-12
    }
}

pub fn spin_audit<M: ChartMetric + ?Sized>(
    metric: &M,
    points: &[Point],
    curvature_point: &Point,
) -> Result<SpinAudit> {
    let mut audit = SpinAudit {
        family: metric.label(),
        points: points.len(),
        anticommutation: 0.0,
        hermiticity: 0.0,
        metric_compatibility: 0.0,
        product_compatibility: 0.0,
        orthonormality: 0.0,
        curvature_point: coords(curvature_point),
        curvature_residuals: [0.0; 2],
        curvature_ratio: f64::NAN,
    };
    for x in points {
        let jet = MetricJet::at(metric, x)?;
        let frame = frame_from_jet(&jet)?;
        let gamma = christoffel(metric, x)?;
        let omega = omega_from(&jet, &frame, &gamma);
        let axial = std::array::from_fn(|j| [omega[j][1][2], omega[j][2][0], omega[j][0][1]]);
        let c = certify(&jet, &frame, &gamma, &connection_matrices(&axial));
        audit.anticommutation = audit.anticommutation.max(c.anticommutation);
        audit.hermiticity = audit.hermiticity.max(c.hermiticity);
        audit.metric_compatibility = audit.metric_compatibility.max(c.metric_compatibility);
        audit.product_compatibility = audit.product_compatibility.max(c.product_compatibility);
        audit.orthonormality = audit.orthonormality.max(c.orthonormality);
    }
    let r1 = spin_curvature_check(metric, curvature_point, 1e-2)?;
    let r2 = spin_curvature_check(metric, curvature_point, 5e-3)?;
    audit.curvature_residuals = [r1, r2];
    audit.curvature_ratio = r1 / r2;
    Ok(audit)
}

/// `𝓡 = (R/4) · id`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeitzenboeckPotential {
    pub scalar_curvature: f64,
}

impl WeitzenboeckPotential {
    pub fn matrix(&self) -> SpinMatrix {
        SpinMatrix::identity() * Complex64::from(0.25 * self.scalar_curvature)
    }

    pub fn is_positive_semidefinite(&self) -> bool {
        self.scalar_curvature >= 0.0
    }
}

pub fn weitzenboeck_potential<M: ChartMetric + ?Sized>(
    metric: &M,
    x: &Point,
) -> Result<WeitzenboeckPotential> {
    Ok(WeitzenboeckPotential {
        scalar_curvature: crate::geometry::scalar_curvature(metric, x)?,
    })
}
