//! Gauss–Legendre rules and a product rule on the unit sphere.

use std::f64::consts::PI;

use nalgebra::Vector3;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// One node of a sphere rule: unit direction plus the two unit tangents
/// `e_θ`, `e_φ`.
#[derive(Debug, Clone, Copy)]
pub struct SphereNode {
    pub normal: Vector3<f64>,
    pub e_theta: Vector3<f64>,
    pub e_phi: Vector3<f64>,
    /// Weight with respect to the solid angle `dΩ`.
    pub weight: f64,
}

/// Product rule: `n` Gauss–Legendre nodes in `cos θ` times `2n` equispaced
/// nodes in `φ`. Integrates spherical harmonics up to degree `2n - 1` exactly.
pub fn sphere_rule(n: usize) -> Vec<SphereNode> {
    let (ct, wt) = gauss_legendre(n);
    let nphi = 2 * n;
    let dphi = 2.0 * PI / nphi as f64;
    let mut out = Vec::with_capacity(n * nphi);
    for (c, w) in ct.iter().zip(&wt) {
        let s = (1.0 - c * c).sqrt();
        for k in 0..nphi {
            let phi = (k as f64 + 0.5) * dphi;
            let (sp, cp) = phi.sin_cos();
            out.push(SphereNode {
                normal: Vector3::new(s * cp, s * sp, *c),
                e_theta: Vector3::new(c * cp, c * sp, -s),
                e_phi: Vector3::new(-sp, cp, 0.0),
                weight: w * dphi,
            });
        }
    }
    out
}

/// `∮ f dΩ` with the rule of order `n`.
pub fn integrate_sphere<E>(
    n: usize,
    mut f: impl FnMut(&SphereNode) -> Result<f64, E>,
) -> Result<f64, E> {
    let mut sum = 0.0;
    for node in sphere_rule(n) {
        sum += node.weight * f(&node)?;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 8, 33] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn sphere_rule_weights_and_moments() {
        let rule = sphere_rule(6);
        let total: f64 = rule.iter().map(|n| n.weight).sum();
        assert!((total - 4.0 * PI).abs() < 1e-13);
        let z2: f64 = rule.iter().map(|n| n.weight * n.normal.z.powi(2)).sum();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-13);
        let x2y2: f64 = rule
            .iter()
            .map(|n| n.weight * (n.normal.x * n.normal.y).powi(2))
            .sum();
        assert!((x2y2 - 4.0 * PI / 15.0).abs() < 1e-13);
        for n in &rule {
            assert!((n.normal.dot(&n.e_theta)).abs() < 1e-15);
            assert!((n.e_theta.cross(&n.e_phi) - n.normal).norm() < 1e-14);
        }
    }
}
