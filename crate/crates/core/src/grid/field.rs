use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::Serialize;

use super::BallGrid;
use crate::spin::Spinor;
use crate::{Error, Point, Result};

/// One 2-spinor block of a Dirac spinor.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HalfSpinor(pub [Complex64; 2]);

impl HalfSpinor {
    #[inline(always)]
    pub fn new(a: Complex64, b: Complex64) -> Self {
        Self([a, b])
    }

    #[inline(always)]
    pub fn zeros() -> Self {
        Self::default()
    }

    #[inline(always)]
    pub fn norm_squared(&self) -> f64 {
        self.0[0].norm_sqr() + self.0[1].norm_sqr()
    }

    /// `self* · other`.
    #[inline(always)]
    pub fn dotc(&self, other: &Self) -> Complex64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }
}

impl std::ops::Index<usize> for HalfSpinor {
    type Output = Complex64;
    #[inline(always)]
    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl Add for HalfSpinor {
    type Output = Self;
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl Sub for HalfSpinor {
    type Output = Self;
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl Neg for HalfSpinor {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        Self([-self.0[0], -self.0[1]])
    }
}

impl Mul<f64> for HalfSpinor {
    type Output = Self;
    #[inline(always)]
    fn mul(self, s: f64) -> Self {
        Self([self.0[0] * s, self.0[1] * s])
    }
}

impl Div<f64> for HalfSpinor {
    type Output = Self;
    #[inline(always)]
    fn div(self, s: f64) -> Self {
        Self([self.0[0] / s, self.0[1] / s])
    }
}

impl AddAssign for HalfSpinor {
    #[inline(always)]
    fn add_assign(&mut self, o: Self) {
        self.0[0] += o.0[0];
        self.0[1] += o.0[1];
    }
}

impl SubAssign for HalfSpinor {
    #[inline(always)]
    fn sub_assign(&mut self, o: Self) {
        self.0[0] -= o.0[0];
        self.0[1] -= o.0[1];
    }
}
/// A 2-spinor block per active node.
pub type HalfField = Vec<HalfSpinor>;

/// Identifies the grid a field was built on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridFingerprint {
    pub h: f64,
    pub r_max: f64,
    pub r_min: f64,
    pub n_interior: usize,
    pub n_active: usize,
}

impl GridFingerprint {
    pub fn of(grid: &BallGrid) -> Self {
        Self {
            h: grid.h,
            r_max: grid.r_max,
            r_min: grid.r_min,
            n_interior: grid.n_interior(),
            n_active: grid.n_active(),
        }
    }
}

/// Four complex components per active node, in active-node order.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpinorField {
    pub grid: GridFingerprint,
    pub values: Vec<Spinor>,
}

impl DiscreteSpinorField {
    pub fn zeros(grid: &BallGrid) -> Self {
        Self::constant(grid, Spinor::zeros())
    }

    pub fn constant(grid: &BallGrid, psi: Spinor) -> Self {
        Self {
            grid: GridFingerprint::of(grid),
            values: vec![psi; grid.n_active()],
        }
    }

    pub fn from_fn(grid: &BallGrid, mut f: impl FnMut(&Point) -> Spinor) -> Self {
        Self {
            grid: GridFingerprint::of(grid),
            values: (0..grid.n_active()).map(|p| f(&grid.position(p))).collect(),
        }
    }

    pub fn from_values(grid: &BallGrid, values: Vec<Spinor>) -> Result<Self> {
        if values.len() != grid.n_active() {
            return Err(Error::InvalidArgument(format!(
                "field has {} nodes, grid has {}",
                values.len(),
                grid.n_active()
            )));
        }
        Ok(Self {
            grid: GridFingerprint::of(grid),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matches(&self, grid: &BallGrid) -> bool {
        self.grid == GridFingerprint::of(grid)
    }

    pub(crate) fn ensure(&self, grid: &BallGrid) -> Result<()> {
        if self.matches(grid) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "field was built on a different grid".into(),
            ))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// `(Ψ|Ψ) = Ψ*Ψ` per node.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_squared()).collect()
    }

    /// Upper (`block = 0`) or lower (`block = 1`) 2-spinor components.
    pub fn half(&self, block: usize) -> HalfField {
        let o = 2 * block;
        self.values
            .iter()
            .map(|v| HalfSpinor::new(v[o], v[o + 1]))
            .collect()
    }

    pub fn from_halves(grid: &BallGrid, upper: &[HalfSpinor], lower: &[HalfSpinor]) -> Self {
        assert_eq!(upper.len(), grid.n_active());
        assert_eq!(lower.len(), grid.n_active());
        Self {
            grid: GridFingerprint::of(grid),
            values: upper
                .iter()
                .zip(lower)
                .map(|(u, l)| Spinor::new(u[0], u[1], l[0], l[1]))
                .collect(),
        }
    }

    /// Sets every shell value from `f`, keeping the interior.
    pub fn set_shell(&mut self, grid: &BallGrid, mut f: impl FnMut(&Point) -> Spinor) {
        for p in grid.n_interior()..grid.n_active() {
            self.values[p] = f(&grid.position(p));
        }
    }

    pub fn max_abs_difference(&self, other: &Self, nodes: std::ops::Range<usize>) -> f64 {
        nodes
            .map(|p| (self.values[p] - other.values[p]).norm())
            .fold(0.0, f64::max)
    }
}
