//! Polynomial (Richardson) extrapolation in a small parameter.

use serde::Serialize;

/// Result of extrapolating a sequence `values[i] = F(t[i])` to `t = 0`.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Extrapolated {
    pub value: f64,
    /// Difference between the full extrapolant and the next lower-order one
    /// built from the entries closest to `t = 0`.
    pub error: f64,
}

/// Neville extrapolation of `values` sampled at `t` to `t = 0`, fitting a
/// polynomial of degree `t.len() - 1`.
///
/// Entries are expected with `t` decreasing (finest last). With a single
/// sample the value is returned with an infinite error bar.
pub fn extrapolate_to_zero(t: &[f64], values: &[f64]) -> Extrapolated {
    assert_eq!(t.len(), values.len());
    let n = t.len();
    assert!(n > 0, "nothing to extrapolate");
    if n == 1 {
        return Extrapolated {
            value: values[0],
            error: f64::INFINITY,
        };
    }
    let full = neville(t, values);
    let lower = neville(&t[1..], &values[1..]);
    Extrapolated {
        value: full,
        error: (full - lower).abs(),
    }
}

/// Extrapolation in `1/R` for quantities sampled at increasing radii.
pub fn extrapolate_in_inverse_radius(radii: &[f64], values: &[f64]) -> Extrapolated {
    let t: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    extrapolate_to_zero(&t, values)
}

fn neville(t: &[f64], values: &[f64]) -> f64 {
    let mut p = values.to_vec();
    let n = t.len();
    for level in 1..n {
        for i in 0..n - level {
            let (ti, tj) = (t[i], t[i + level]);
            // evaluation point is t = 0
            p[i] = (tj * p[i] - ti * p[i + 1]) / (tj - ti);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_quadratic_exactly() {
        let f = |t: f64| 2.0 - 3.0 * t + 0.5 * t * t;
        let t = [0.1, 0.05, 0.025];
        let v: Vec<f64> = t.iter().map(|&t| f(t)).collect();
        let e = extrapolate_to_zero(&t, &v);
        assert!((e.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn error_bar_tracks_cubic_remainder() {
        let f = |t: f64| 1.0 + t + t * t * t;
        let radii = [10.0, 20.0, 40.0];
        let v: Vec<f64> = radii.iter().map(|r| f(1.0 / r)).collect();
        let e = extrapolate_in_inverse_radius(&radii, &v);
        assert!((e.value - 1.0).abs() < 1e-3);
        assert!(e.error > 0.0 && e.error < 1e-2);
    }

    #[test]
    fn single_sample_has_infinite_error() {
        let e = extrapolate_to_zero(&[0.5], &[3.0]);
        assert_eq!(e.value, 3.0);
        assert!(e.error.is_infinite());
    }
}
