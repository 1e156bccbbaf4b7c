//! The shipped metric families.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use super::metric::{
    ChartMetric, ConformalFactor, ConformalMetric, DecayOrder, MetricGradient, MetricHessian,
};
use crate::{Error, Point, Result};

pub const FAMILY_NAMES: [&str; 4] = ["flat", "isotropic", "regularized", "bump"];

/// `u = 1 + m/(2r)`: the isotropic exterior chart `r > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicFactor {
    pub mass: f64,
}

impl ConformalFactor for IsotropicFactor {
    fn family(&self) -> &'static str {
        "isotropic"
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("m", self.mass)]
    }
    fn value(&self, x: &Point) -> f64 {
        1.0 + self.mass / (2.0 * x.norm())
    }
    fn gradient(&self, x: &Point) -> Vector3<f64> {
        let r = x.norm();
        x * (-self.mass / (2.0 * r.powi(3)))
    }
    fn hessian(&self, x: &Point) -> Matrix3<f64> {
        radial_inverse_hessian(self.mass, x, x.norm())
    }
    fn contains(&self, x: &Point) -> bool {
        x.norm() > 0.0
    }
}

/// `u = 1 + m / (2 sqrt(r² + ε²))`: complete, superharmonic for `m, ε > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedFactor {
    pub mass: f64,
    pub eps: f64,
}

impl RegularizedFactor {
    fn rho(&self, x: &Point) -> f64 {
        (x.norm_squared() + self.eps * self.eps).sqrt()
    }
}

impl ConformalFactor for RegularizedFactor {
    fn family(&self) -> &'static str {
        "regularized"
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("m", self.mass), ("eps", self.eps)]
    }
    fn value(&self, x: &Point) -> f64 {
        1.0 + self.mass / (2.0 * self.rho(x))
    }
    fn gradient(&self, x: &Point) -> Vector3<f64> {
        x * (-self.mass / (2.0 * self.rho(x).powi(3)))
    }
    fn hessian(&self, x: &Point) -> Matrix3<f64> {
        radial_inverse_hessian(self.mass, x, self.rho(x))
    }
    fn flat_laplacian(&self, x: &Point) -> f64 {
        -1.5 * self.mass * self.eps * self.eps / self.rho(x).powi(5)
    }
}

/// Hessian of `m / (2ρ)` with `ρ² = |x|² + const`.
fn radial_inverse_hessian(mass: f64, x: &Point, rho: f64) -> Matrix3<f64> {
    let a = -mass / (2.0 * rho.powi(3));
    let b = 1.5 * mass / rho.powi(5);
    Matrix3::identity() * a + x * x.transpose() * b
}

/// `g = δ + χ(|x - c|) s` with a compactly supported smooth bump `χ` and a
/// constant symmetric `s`; not conformally flat.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpMetric {
    pub amplitude: f64,
    pub radius: f64,
    pub center: Vector3<f64>,
    pub shape: Matrix3<f64>,
}

impl Default for BumpMetric {
    fn default() -> Self {
        Self::new(0.2, 1.5)
    }
}

impl BumpMetric {
    pub fn new(amplitude: f64, radius: f64) -> Self {
        Self {
            amplitude,
            radius,
            center: Vector3::new(0.3, -0.2, 0.1),
            shape: Matrix3::new(1.0, 0.3, -0.2, 0.3, -0.5, 0.4, -0.2, 0.4, 0.7),
        }
    }

    /// `χ`, `∂χ`, `∂∂χ` with `χ(c) = amplitude`.
    fn profile(&self, x: &Point) -> (f64, Vector3<f64>, Matrix3<f64>) {
        let d = x - self.center;
        let b2 = self.radius * self.radius;
        let q = d.norm_squared() / b2;
        if q >= 1.0 {
            return (0.0, Vector3::zeros(), Matrix3::zeros());
        }
        let w = 1.0 - q;
        let chi = self.amplitude * (1.0 - 1.0 / w).exp();
        let chi_q = -chi / (w * w);
        let chi_qq = chi * (1.0 / w.powi(4) - 2.0 / w.powi(3));
        let dq = d * (2.0 / b2);
        let grad = dq * chi_q;
        let hess = dq * dq.transpose() * chi_qq + Matrix3::identity() * (chi_q * 2.0 / b2);
        (chi, grad, hess)
    }
}

impl ChartMetric for BumpMetric {
    fn family(&self) -> &'static str {
        "bump"
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("amplitude", self.amplitude), ("radius", self.radius)]
    }
    fn eval(&self, x: &Point) -> Matrix3<f64> {
        Matrix3::identity() + self.shape * self.profile(x).0
    }
    fn d_eval(&self, x: &Point) -> MetricGradient {
        let grad = self.profile(x).1;
        std::array::from_fn(|k| self.shape * grad[k])
    }
    fn dd_eval(&self, x: &Point) -> MetricHessian {
        let hess = self.profile(x).2;
        std::array::from_fn(|k| std::array::from_fn(|l| self.shape * hess[(k, l)]))
    }
    fn decay(&self) -> DecayOrder {
        // compact support satisfies every order
        DecayOrder::ASYMPTOTICALLY_FLAT
    }
}

/// A metric from the shipped catalog, selectable by name.
#[derive(Debug, Clone)]
pub enum CatalogMetric {
    Flat,
    Isotropic(ConformalMetric<IsotropicFactor>),
    Regularized(ConformalMetric<RegularizedFactor>),
    Bump(BumpMetric),
}

impl CatalogMetric {
    pub fn isotropic(mass: f64) -> Self {
        Self::Isotropic(ConformalMetric::new(IsotropicFactor { mass }))
    }

    pub fn regularized(mass: f64, eps: f64) -> Self {
        Self::Regularized(ConformalMetric::new(RegularizedFactor { mass, eps }))
    }

    /// Builds a family from its name and a parameter map. Missing parameters
    /// take defaults (`m = 1`, `eps = 1`, `amplitude = 0.2`, `radius = 1.5`).
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        let allowed: &[&str] = match name {
            "flat" => &[],
            "isotropic" => &["m"],
            "regularized" => &["m", "eps"],
            "bump" => &["amplitude", "radius"],
            _ => {
                return Err(Error::UnknownFamily {
                    name: name.to_string(),
                    valid: FAMILY_NAMES.to_vec(),
                })
            }
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidArgument(format!(
                "family `{name}` has no parameter `{bad}` (valid: {})",
                allowed.join(", ")
            )));
        }
        let metric = match name {
            "flat" => Self::Flat,
            "isotropic" => Self::isotropic(get("m", 1.0)),
            "regularized" => Self::regularized(get("m", 1.0), get("eps", 1.0)),
            _ => Self::Bump(BumpMetric::new(get("amplitude", 0.2), get("radius", 1.5))),
        };
        metric.validate()?;
        Ok(metric)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            Self::Flat => Ok(()),
            Self::Isotropic(c) if c.factor.mass < 0.0 => bad("isotropic: m must be >= 0".into()),
            Self::Regularized(c) if c.factor.mass < 0.0 || c.factor.eps <= 0.0 => {
                bad("regularized: need m >= 0 and eps > 0".into())
            }
            Self::Bump(b) if b.radius <= 0.0 || b.amplitude.abs() >= 0.5 => {
                bad("bump: need radius > 0 and |amplitude| < 0.5".into())
            }
            _ => Ok(()),
        }
    }

    /// The conformal factor, for conformally flat members.
    pub fn conformal_factor(&self) -> Option<&dyn ConformalFactor> {
        match self {
            Self::Isotropic(c) => Some(&c.factor),
            Self::Regularized(c) => Some(&c.factor),
            _ => None,
        }
    }

    /// Expected ADM mass, where it is known in closed form.
    pub fn nominal_mass(&self) -> Option<f64> {
        match self {
            Self::Flat | Self::Bump(_) => Some(0.0),
            Self::Isotropic(c) => Some(c.factor.mass),
            Self::Regularized(c) => Some(c.factor.mass),
        }
    }
}

impl ChartMetric for CatalogMetric {
    fn family(&self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::Isotropic(m) => m.family(),
            Self::Regularized(m) => m.family(),
            Self::Bump(m) => m.family(),
        }
    }
    fn params(&self) -> Vec<(&'static str, f64)> {
        match self {
            Self::Flat => Vec::new(),
            Self::Isotropic(m) => m.params(),
            Self::Regularized(m) => m.params(),
            Self::Bump(m) => m.params(),
        }
    }
    fn eval(&self, x: &Point) -> Matrix3<f64> {
        match self {
            Self::Flat => Matrix3::identity(),
            Self::Isotropic(m) => m.eval(x),
            Self::Regularized(m) => m.eval(x),
            Self::Bump(m) => m.eval(x),
        }
    }
    fn d_eval(&self, x: &Point) -> MetricGradient {
        match self {
            Self::Flat => [Matrix3::zeros(); 3],
            Self::Isotropic(m) => m.d_eval(x),
            Self::Regularized(m) => m.d_eval(x),
            Self::Bump(m) => m.d_eval(x),
        }
    }
    fn dd_eval(&self, x: &Point) -> MetricHessian {
        match self {
            Self::Flat => [[Matrix3::zeros(); 3]; 3],
            Self::Isotropic(m) => m.dd_eval(x),
            Self::Regularized(m) => m.dd_eval(x),
            Self::Bump(m) => m.dd_eval(x),
        }
    }
    fn excluded_radius(&self) -> f64 {
        match self {
            Self::Isotropic(m) => m.excluded_radius(),
            _ => 0.0,
        }
    }
    fn contains(&self, x: &Point) -> bool {
        match self {
            Self::Isotropic(m) => m.contains(x),
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64, z: f64) -> Point {
        Point::new(x, y, z)
    }

    #[test]
    fn regularized_is_superharmonic_and_tends_to_one() {
        let u = RegularizedFactor { mass: 0.7, eps: 0.5 };
        for r in [0.0, 0.3, 1.0, 5.0, 50.0] {
            let x = pt(r, 0.2 * r, -0.1 * r);
            assert!(u.flat_laplacian(&x) <= 0.0);
            assert!(u.value(&x) > 0.0);
            // closed form agrees with the trace of the Hessian
            assert!((u.flat_laplacian(&x) - u.hessian(&x).trace()).abs() < 1e-12);
        }
        assert!((u.value(&pt(1e6, 0.0, 0.0)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let b = BumpMetric::default();
        let far = pt(3.0, 0.0, 0.0);
        assert_eq!(b.eval(&far), Matrix3::identity());
        assert_eq!(b.d_eval(&far)[0], Matrix3::zeros());
        assert!((b.eval(&b.center) - Matrix3::identity() - b.shape * 0.2).abs().max() < 1e-15);
    }

    #[test]
    fn bump_profile_derivatives_match_differences() {
        let b = BumpMetric::default();
        let x = pt(0.7, 0.1, -0.4);
        let h = 1e-5;
        let (_, grad, hess) = b.profile(&x);
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (b.profile(&xp).0 - b.profile(&xm).0) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-8, "grad {k}");
            let fd2 = (b.profile(&xp).1 - b.profile(&xm).1) / (2.0 * h);
            for l in 0..3 {
                assert!((fd2[l] - hess[(k, l)]).abs() < 1e-7, "hess {k}{l}");
            }
        }
    }

    #[test]
    fn unknown_family_lists_valid_names() {
        let err = CatalogMetric::from_name("schwarzschild", &BTreeMap::new()).unwrap_err();
        let msg = err.to_string();
        for n in FAMILY_NAMES {
            assert!(msg.contains(n));
        }
    }

    #[test]
    fn unknown_parameter_rejected() {
        let mut p = BTreeMap::new();
        p.insert("q".to_string(), 1.0);
        assert!(CatalogMetric::from_name("regularized", &p).is_err());
    }
}
