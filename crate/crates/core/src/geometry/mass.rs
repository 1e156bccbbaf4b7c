//! ADM mass, the sphere isoperimetric estimate and the decay audit.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::Serialize;

use super::metric::{invert_positive, ChartMetric};
use super::quadrature::{gauss_legendre_on, integrate_sphere, sphere_rule};
use crate::error::coords;
use crate::extrapolate::extrapolate_in_inverse_radius;
use crate::{Error, Point, Result};

const MIN_ORDER: usize = 8;
const MAX_ORDER: usize = 512;
const ORDER_TOLERANCE: f64 = 1e-8;

/// The surface integral on one coordinate sphere.
#[derive(Debug, Clone, Serialize)]
pub struct SphereSample {
    pub radius: f64,
    pub value: f64,
    /// Gauss–Legendre order in `cos θ` at which the value settled.
    pub order: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MassReport {
    pub radii: Vec<f64>,
    pub integral_values: Vec<f64>,
    pub extrapolated_mass: f64,
    pub extrapolation_error: f64,
    /// Identically zero for a vanishing second fundamental form.
    pub momentum: [f64; 3],
    /// False if some sphere integral did not settle under order doubling.
    pub reliable: bool,
    pub samples: Vec<SphereSample>,
}

impl MassReport {
    /// Whether `|value(R) - extrapolated|` decreases along the radii.
    pub fn converges_monotonically(&self) -> bool {
        let gaps: Vec<f64> = self
            .integral_values
            .iter()
            .map(|v| (v - self.extrapolated_mass).abs())
            .collect();
        gaps.windows(2).all(|w| w[1] <= w[0])
    }
}

fn check_radii<M: ChartMetric + ?Sized>(metric: &M, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidArgument("no radii given".into()));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidArgument(
            "radii must be positive and finite".into(),
        ));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "radii must be strictly increasing, got {radii:?}"
        )));
    }
    let r0 = metric.excluded_radius();
    if radii[0] <= r0 {
        return Err(Error::InvalidArgument(format!(
            "radius {} is inside the excised ball of radius {r0}",
            radii[0]
        )));
    }
    Ok(())
}

/// Doubles the order from `MIN_ORDER` until successive values differ by
/// less than `ORDER_TOLERANCE · max(1, |value|)`.
fn settle(mut f: impl FnMut(usize) -> Result<f64>) -> Result<(f64, usize, bool)> {
    let mut n = MIN_ORDER;
    let mut prev = f(n)?;
    while n < MAX_ORDER {
        n *= 2;
        let next = f(n)?;
        if !next.is_finite() {
            return Err(Error::Quadrature(format!("non-finite value at order {n}")));
        }
        if (next - prev).abs() < ORDER_TOLERANCE * next.abs().max(1.0) {
            return Ok((next, n, true));
        }
        prev = next;
    }
    Ok((prev, n, false))
}

/// `(1/16π) ∮_{S_R} (∂_j g_ij - ∂_i g_jj) ν^i R² dΩ` at each radius, with
/// Richardson extrapolation in `1/R`.
pub fn adm_mass<M: ChartMetric + ?Sized>(metric: &M, radii: &[f64]) -> Result<MassReport> {
    check_radii(metric, radii)?;
    let mut samples = Vec::with_capacity(radii.len());
    for &r in radii {
        let (value, order, converged) = settle(|n| {
            let flux = integrate_sphere(n, |node| {
                let x = node.normal * r;
                let dg = metric.d_eval(&x);
                let mut s = 0.0;
                for i in 0..3 {
                    let mut div = 0.0;
                    for j in 0..3 {
                        div += dg[j][(i, j)] - dg[i][(j, j)];
                    }
                    s += div * node.normal[i];
                }
                if s.is_finite() {
                    Ok(s)
                } else {
                    Err(Error::Evaluation {
                        what: "metric first derivative",
                        point: coords(&x),
                    })
                }
            })?;
            Ok(flux * r * r / (16.0 * PI))
        })?;
        samples.push(SphereSample {
            radius: r,
            value,
            order,
            converged,
        });
    }
    let values: Vec<f64> = samples.iter().map(|s| s.value).collect();
    let ex = extrapolate_in_inverse_radius(radii, &values);
    Ok(MassReport {
        radii: radii.to_vec(),
        integral_values: values,
        extrapolated_mass: ex.value,
        extrapolation_error: ex.error,
        momentum: [0.0; 3],
        reliable: samples.iter().all(|s| s.converged),
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoperimetricEstimate {
    pub radii: Vec<f64>,
    pub areas: Vec<f64>,
    pub volumes: Vec<f64>,
    /// `A / V^{2/3}` per sphere.
    pub ratios: Vec<f64>,
    pub k_hat: f64,
    /// Centred coordinate spheres only: an upper bound on the true infimum.
    pub upper_bound_only: bool,
}

fn sqrt_det<M: ChartMetric + ?Sized>(metric: &M, x: &Point) -> Result<f64> {
    if !metric.contains(x) {
        return Err(Error::OutsideChart {
            family: metric.family(),
            point: coords(x),
        });
    }
    let g = metric.eval(x);
    match invert_positive(&g) {
        Some((det, _)) if det.is_finite() => Ok(det.sqrt()),
        _ => Err(Error::DegenerateMetric {
            point: coords(x),
            reason: "metric is not positive definite".into(),
        }),
    }
}

fn sphere_area<M: ChartMetric + ?Sized>(metric: &M, r: f64, n: usize) -> Result<f64> {
    let a = integrate_sphere(n, |node| {
        let g: Matrix3<f64> = metric.eval(&(node.normal * r));
        let htt = node.e_theta.dot(&(g * node.e_theta));
        let hpp = node.e_phi.dot(&(g * node.e_phi));
        let htp = node.e_theta.dot(&(g * node.e_phi));
        let det = htt * hpp - htp * htp;
        if det.is_finite() && det > 0.0 {
            Ok(det.sqrt())
        } else {
            Err(Error::Quadrature(format!(
                "induced metric degenerate on the sphere of radius {r}"
            )))
        }
    })?;
    Ok(a * r * r)
}

fn ball_volume<M: ChartMetric + ?Sized>(metric: &M, r: f64, n: usize) -> Result<f64> {
    let (rho, w) = gauss_legendre_on(n, 0.0, r);
    let mut v = 0.0;
    for (rho, w) in rho.iter().zip(&w) {
        let shell = integrate_sphere(n, |node| sqrt_det(metric, &(node.normal * *rho)))?;
        v += w * rho * rho * shell;
    }
    Ok(v)
}

/// `k̂ = min_R A(S_R) / V(B_R)^{2/3}` over centred coordinate spheres, with
/// area and volume measured in `g`.
pub fn isoperimetric_estimate<M: ChartMetric + ?Sized>(
    metric: &M,
    sphere_radii: &[f64],
) -> Result<IsoperimetricEstimate> {
    if metric.excluded_radius() > 0.0 || !metric.contains(&Point::zeros()) {
        return Err(Error::Quadrature(format!(
            "`{}` does not cover the centre of the coordinate balls",
            metric.family()
        )));
    }
    check_radii(metric, sphere_radii)?;
    let mut areas = Vec::new();
    let mut volumes = Vec::new();
    for &r in sphere_radii {
        let (a, _, ok_a) = settle(|n| sphere_area(metric, r, n))?;
        let v = settle_volume(metric, r)?;
        if !ok_a {
            return Err(Error::Quadrature(format!(
                "sphere area at radius {r} did not settle"
            )));
        }
        areas.push(a);
        volumes.push(v);
    }
    let ratios: Vec<f64> = areas
        .iter()
        .zip(&volumes)
        .map(|(a, v)| a / v.powf(2.0 / 3.0))
        .collect();
    let k_hat = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(IsoperimetricEstimate {
        radii: sphere_radii.to_vec(),
        areas,
        volumes,
        ratios,
        k_hat,
        upper_bound_only: true,
    })
}

fn settle_volume<M: ChartMetric + ?Sized>(metric: &M, r: f64) -> Result<f64> {
    // volume quadrature is cubic in the order; cap it lower
    let mut n = MIN_ORDER;
    let mut prev = ball_volume(metric, r, n)?;
    while n < 128 {
        n *= 2;
        let next = ball_volume(metric, r, n)?;
        if (next - prev).abs() < ORDER_TOLERANCE * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "ball volume at radius {r} did not settle"
    )))
}

/// Shell suprema at `R` and `2R` of `|g - δ|`, `|∂g|`, `|∂²g|` (Frobenius
/// norms) and the ratios compared against the declared power laws.
#[derive(Debug, Clone, Serialize)]
pub struct DecayAudit {
    pub radius: f64,
    /// `[metric, first, second]` suprema on `S_R`.
    pub inner: [f64; 3],
    /// Same on `S_2R`.
    pub outer: [f64; 3],
    /// `inner / outer`, `None` when both vanish.
    pub ratios: [Option<f64>; 3],
    /// Expected ratios `2^order`.
    pub expected: [f64; 3],
    pub passed: bool,
}

/// Samples the shells `|x| = R` and `|x| = 2R`; a ratio passes when it lies
/// within `[0.8, 1.2] · 2^order` of the declared decay order.
pub fn decay_audit<M: ChartMetric + ?Sized>(metric: &M, radius: f64) -> Result<DecayAudit> {
    check_radii(metric, &[radius])?;
    let order = metric.decay();
    let orders = [order.metric, order.first, order.second];
    let sup = |r: f64| -> [f64; 3] {
        let mut s = [0.0f64; 3];
        for node in sphere_rule(16) {
            let x = node.normal * r;
            s[0] = s[0].max((metric.eval(&x) - Matrix3::identity()).norm());
            let dg = metric.d_eval(&x);
            s[1] = s[1].max(dg.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt());
            let ddg = metric.dd_eval(&x);
            let n2: f64 = ddg.iter().flatten().map(|m| m.norm_squared()).sum();
            s[2] = s[2].max(n2.sqrt());
        }
        s
    };
    let inner = sup(radius);
    let outer = sup(2.0 * radius);
    let expected = orders.map(|p| 2f64.powi(p as i32));
    let mut ratios = [None; 3];
    let mut passed = true;
    for k in 0..3 {
        if inner[k] == 0.0 && outer[k] == 0.0 {
            continue;
        }
        let q = inner[k] / outer[k];
        ratios[k] = Some(q);
        passed &= q >= 0.8 * expected[k] && q <= 1.2 * expected[k];
    }
    Ok(DecayAudit {
        radius,
        inner,
        outer,
        ratios,
        expected,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CatalogMetric;

    #[test]
    fn flat_mass_is_zero() {
        let rep = adm_mass(&CatalogMetric::Flat, &[10.0, 20.0, 40.0]).unwrap();
        assert!(rep.integral_values.iter().all(|v| *v == 0.0));
        assert_eq!(rep.extrapolated_mass, 0.0);
        assert!(rep.reliable);
        assert_eq!(rep.momentum, [0.0; 3]);
    }

    #[test]
    fn isotropic_mass_matches_parameter() {
        let rep = adm_mass(&CatalogMetric::isotropic(1.0), &[10.0, 20.0, 40.0]).unwrap();
        assert!((rep.extrapolated_mass - 1.0).abs() < 1e-3, "{rep:?}");
        assert!(rep.converges_monotonically());
    }

    #[test]
    fn bad_radii_are_rejected() {
        let m = CatalogMetric::Flat;
        assert!(matches!(
            adm_mass(&m, &[10.0, 5.0]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(adm_mass(&m, &[]).is_err());
        assert!(adm_mass(&m, &[-1.0, 2.0]).is_err());
    }

    #[test]
    fn flat_isoperimetric_ratio() {
        let est = isoperimetric_estimate(&CatalogMetric::Flat, &[1.0, 2.0, 5.0]).unwrap();
        let expect = (36.0 * PI).powf(1.0 / 3.0);
        for q in &est.ratios {
            assert!((q - expect).abs() < 1e-10);
        }
        assert!(est.upper_bound_only);
    }

    #[test]
    fn isotropic_chart_has_no_ball_volume() {
        let err = isoperimetric_estimate(&CatalogMetric::isotropic(1.0), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::Quadrature(_)));
    }

    #[test]
    fn regularized_decay_follows_inverse_radius() {
        let audit = decay_audit(&CatalogMetric::regularized(1.0, 1.0), 20.0).unwrap();
        assert!(audit.passed, "{audit:?}");
        let q = audit.ratios[0].unwrap();
        assert!((1.6..=2.4).contains(&q));
    }
}
