use nalgebra::Matrix3;

use crate::error::{coords, Error, Result};
use crate::Point;

/// `[k]` holds `∂_k g_ij`.
pub type MetricGradient = [Matrix3<f64>; 3];
/// `[k][l]` holds `∂_k ∂_l g_ij`.
pub type MetricHessian = [[Matrix3<f64>; 3]; 3];

/// Asserted asymptotic orders: `g - δ = O(r^-metric)`, `∂g = O(r^-first)`,
/// `∂²g = O(r^-second)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DecayOrder {
    pub metric: u32,
    pub first: u32,
    pub second: u32,
}

impl DecayOrder {
    pub const ASYMPTOTICALLY_FLAT: DecayOrder = DecayOrder {
        metric: 1,
        first: 2,
        second: 3,
    };
}

/// A Riemannian 3-metric on (a subset of) the chart `ℝ³` with analytic first
/// and second derivatives.
pub trait ChartMetric: Send + Sync {
    fn family(&self) -> &'static str;

    /// Named family parameters (mass `m`, regularisation `eps`, ...).
    fn params(&self) -> Vec<(&'static str, f64)>;

    fn eval(&self, x: &Point) -> Matrix3<f64>;

    fn d_eval(&self, x: &Point) -> MetricGradient;

    fn dd_eval(&self, x: &Point) -> MetricHessian;

    fn decay(&self) -> DecayOrder {
        DecayOrder::ASYMPTOTICALLY_FLAT
    }

    /// Radius of the excised coordinate ball (0 for complete charts).
    fn excluded_radius(&self) -> f64 {
        0.0
    }

    fn contains(&self, x: &Point) -> bool {
        let r0 = self.excluded_radius();
        r0 <= 0.0 || x.norm() > r0
    }

    /// Human-readable `family key=value ...` label.
    fn label(&self) -> String {
        let mut s = self.family().to_string();
        for (k, v) in self.params() {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

impl<M: ChartMetric + ?Sized> ChartMetric for &M {
    fn family(&self) -> &'static str {
        (**self).family()
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        (**self).params()
    }
    fn eval(&self, x: &Point) -> Matrix3<f64> {
        (**self).eval(x)
    }
    fn d_eval(&self, x: &Point) -> MetricGradient {
        (**self).d_eval(x)
    }
    fn dd_eval(&self, x: &Point) -> MetricHessian {
        (**self).dd_eval(x)
    }
    fn decay(&self) -> DecayOrder {
        (**self).decay()
    }
    fn excluded_radius(&self) -> f64 {
        (**self).excluded_radius()
    }
    fn contains(&self, x: &Point) -> bool {
        (**self).contains(x)
    }
}

/// The metric, its inverse and its first two derivatives at one point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub point: Point,
    pub g: Matrix3<f64>,
    pub ginv: Matrix3<f64>,
    pub det: f64,
    pub dg: MetricGradient,
    pub ddg: MetricHessian,
}

impl MetricJet {
    /// Evaluates and validates the jet: the point must be in the chart, all
    /// entries finite and `g` positive definite.
    pub fn at<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<Self> {
        if !metric.contains(x) {
            return Err(Error::OutsideChart {
                family: metric.family(),
                point: coords(x),
            });
        }
        let g = metric.eval(x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "metric",
                point: coords(x),
            });
        }
        let dg = metric.d_eval(x);
        if dg.iter().flat_map(|m| m.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "metric first derivative",
                point: coords(x),
            });
        }
        let ddg = metric.dd_eval(x);
        if ddg
            .iter()
            .flatten()
            .flat_map(|m| m.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Evaluation {
                what: "metric second derivative",
                point: coords(x),
            });
        }
        Self::from_parts(*x, g, dg, ddg)
    }

    pub(crate) fn from_parts(
        point: Point,
        g: Matrix3<f64>,
        dg: MetricGradient,
        ddg: MetricHessian,
    ) -> Result<Self> {
        let (det, ginv) = invert_positive(&g).ok_or_else(|| Error::DegenerateMetric {
            point: coords(&point),
            reason: "metric is not positive definite".into(),
        })?;
        Ok(Self {
            point,
            g,
            ginv,
            det,
            dg,
            ddg,
        })
    }

    /// `∂_k g^{ij} = -g^{ia} ∂_k g_ab g^{bj}`.
    pub fn dginv(&self) -> MetricGradient {
        std::array::from_fn(|k| -(self.ginv * self.dg[k] * self.ginv))
    }
}

/// Determinant and inverse of a symmetric matrix, or `None` unless it is
/// positive definite (Sylvester's criterion).
pub(crate) fn invert_positive(g: &Matrix3<f64>) -> Option<(f64, Matrix3<f64>)> {
    let asym = (g - g.transpose()).abs().max();
    let scale = g.abs().max().max(1.0);
    if asym > 1e-12 * scale {
        return None;
    }
    let m1 = g[(0, 0)];
    let m2 = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    let det = g.determinant();
    if !(m1 > 0.0 && m2 > 0.0 && det > 0.0) {
        return None;
    }
    g.try_inverse().map(|inv| (det, inv))
}

/// A positive conformal factor `u` with analytic gradient and Hessian.
pub trait ConformalFactor: Send + Sync {
    fn family(&self) -> &'static str;
    fn params(&self) -> Vec<(&'static str, f64)>;
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> nalgebra::Vector3<f64>;
    fn hessian(&self, x: &Point) -> Matrix3<f64>;

    /// Flat Laplacian `Δ_δ u`.
    fn flat_laplacian(&self, x: &Point) -> f64 {
        self.hessian(x).trace()
    }

    fn excluded_radius(&self) -> f64 {
        0.0
    }

    fn contains(&self, x: &Point) -> bool {
        let r0 = self.excluded_radius();
        r0 <= 0.0 || x.norm() > r0
    }
}

/// The conformally flat metric `g = u⁴ δ`.
#[derive(Debug, Clone)]
pub struct ConformalMetric<U> {
    pub factor: U,
}

impl<U: ConformalFactor> ConformalMetric<U> {
    pub fn new(factor: U) -> Self {
        Self { factor }
    }

    /// `R = -8 u⁻⁵ Δ_δ u`.
    pub fn scalar_curvature(&self, x: &Point) -> f64 {
        -8.0 * self.factor.value(x).powi(-5) * self.factor.flat_laplacian(x)
    }
}

impl<U: ConformalFactor> ChartMetric for ConformalMetric<U> {
    fn family(&self) -> &'static str {
        self.factor.family()
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        self.factor.params()
    }

    fn eval(&self, x: &Point) -> Matrix3<f64> {
        Matrix3::identity() * self.factor.value(x).powi(4)
    }

    fn d_eval(&self, x: &Point) -> MetricGradient {
        let u = self.factor.value(x);
        let du = self.factor.gradient(x);
        std::array::from_fn(|k| Matrix3::identity() * (4.0 * u.powi(3) * du[k]))
    }

    fn dd_eval(&self, x: &Point) -> MetricHessian {
        let u = self.factor.value(x);
        let du = self.factor.gradient(x);
        let ddu = self.factor.hessian(x);
        std::array::from_fn(|k| {
            std::array::from_fn(|l| {
                let c = 12.0 * u * u * du[k] * du[l] + 4.0 * u.powi(3) * ddu[(k, l)];
                Matrix3::identity() * c
            })
        })
    }

    fn excluded_radius(&self) -> f64 {
        self.factor.excluded_radius()
    }

    fn contains(&self, x: &Point) -> bool {
        self.factor.contains(x)
    }
}

/// Replaces the analytic derivatives of a metric by fourth-order central
/// differences of its values, for oracle comparisons.
#[derive(Debug, Clone)]
pub struct FiniteDifferenceMetric<M> {
    pub inner: M,
    pub step: f64,
}

impl<M: ChartMetric> FiniteDifferenceMetric<M> {
    pub fn new(inner: M, step: f64) -> Self {
        Self { inner, step }
    }

    fn shifted(&self, x: &Point, k: usize, s: f64) -> Point {
        let mut y = *x;
        y[k] += s;
        y
    }
}

impl<M: ChartMetric> ChartMetric for FiniteDifferenceMetric<M> {
    fn family(&self) -> &'static str {
        self.inner.family()
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        self.inner.params()
    }

    fn eval(&self, x: &Point) -> Matrix3<f64> {
        self.inner.eval(x)
    }

    fn d_eval(&self, x: &Point) -> MetricGradient {
        let h = self.step;
        std::array::from_fn(|k| {
            let f = |s: f64| self.inner.eval(&self.shifted(x, k, s * h));
            (f(-2.0) - f(2.0) + (f(1.0) - f(-1.0)) * 8.0) / (12.0 * h)
        })
    }

    fn dd_eval(&self, x: &Point) -> MetricHessian {
        let h = self.step;
        let g0 = self.inner.eval(x);
        let mut out = [[Matrix3::zeros(); 3]; 3];
        for k in 0..3 {
            let f = |s: f64| self.inner.eval(&self.shifted(x, k, s * h));
            out[k][k] = (-f(2.0) - f(-2.0) + (f(1.0) + f(-1.0)) * 16.0 - g0 * 30.0) / (12.0 * h * h);
            for l in k + 1..3 {
                let f2 = |a: f64, b: f64| {
                    let mut y = *x;
                    y[k] += a * h;
                    y[l] += b * h;
                    self.inner.eval(&y)
                };
                // fourth-order mixed stencil
                let near = f2(1.0, 1.0) - f2(1.0, -1.0) - f2(-1.0, 1.0) + f2(-1.0, -1.0);
                let far = f2(2.0, 2.0) - f2(2.0, -2.0) - f2(-2.0, 2.0) + f2(-2.0, -2.0);
                let v = (near * 16.0 - far) / (48.0 * h * h);
                out[k][l] = v;
                out[l][k] = v;
            }
        }
        out
    }

    fn decay(&self) -> DecayOrder {
        self.inner.decay()
    }

    fn excluded_radius(&self) -> f64 {
        self.inner.excluded_radius()
    }

    fn contains(&self, x: &Point) -> bool {
        self.inner.contains(x)
    }
}
