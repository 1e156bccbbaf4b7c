//! Ball grids, discrete spinor fields, the discrete Dirac operator and
//! spinor Laplacian, and the Dirichlet solver.

mod field;
mod geometry;
pub mod io;
mod operator;
mod solver;

pub(crate) mod operator_support {
    use super::field::HalfSpinor;

    /// `i s (c·σ) v`.
    #[inline(always)]
    pub fn times_i_sigma(c: &[f64; 3], v: &HalfSpinor, s: f64) -> HalfSpinor {
        super::operator::times_i(super::operator::sigma(c, v), s)
    }
}

use serde::Serialize;

use crate::{Error, Point, Result};

pub use field::{DiscreteSpinorField, GridFingerprint, HalfField, HalfSpinor};
pub use geometry::{GridGeometry, NodeGeometry};
pub use operator::{assemble_dirac, assemble_laplacian, DiscreteOperator, GreenIdentity, StencilKind};
pub use solver::{solve_dirichlet, solve_dirichlet_with_source, SolveReport, SolverConfig};

/// Rough resident cost of one active node during a solve (geometry, face
/// coefficients, neighbour table and Krylov work vectors).
pub const BYTES_PER_NODE: u64 = 1280;
/// Four complex unknowns per node.
pub const BYTES_PER_UNKNOWN: u64 = BYTES_PER_NODE / 4;
pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;

/// Sentinel in the cube index map.
const EXTERIOR: u32 = u32::MAX;

/// Neighbour slots: `-x, +x, -y, +y, -z, +z`.
pub const NEIGHBOUR_OFFSETS: [[i32; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeClass {
    Interior,
    Shell,
    Exterior,
}

/// Cell-centred lattice `x = (i + ½ - N) h` on the cube `[-L, L]³`,
/// `L = N h`, masked to the ball `|x| < R_max` (or the annulus
/// `r_min < |x| < R_max`). Interior nodes come first in the active
/// numbering, followed by the shell, each in lexicographic order. The
/// origin is never a lattice point.
#[derive(Debug, Clone)]
pub struct BallGrid {
    pub h: f64,
    pub r_max: f64,
    pub r_min: f64,
    /// Half-width in cells.
    pub n_half: usize,
    index: Vec<u32>,
    cells: Vec<[u32; 3]>,
    neighbours: Vec<[u32; 6]>,
    n_interior: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSummary {
    pub h: f64,
    pub r_max: f64,
    pub r_min: f64,
    pub half_width: f64,
    pub interior_nodes: usize,
    pub shell_nodes: usize,
    pub estimated_bytes: u64,
}

impl BallGrid {
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_active(&self) -> usize {
        self.cells.len()
    }

    pub fn n_shell(&self) -> usize {
        self.cells.len() - self.n_interior
    }

    pub fn half_width(&self) -> f64 {
        self.n_half as f64 * self.h
    }

    fn side(&self) -> usize {
        2 * self.n_half
    }

    pub fn position(&self, node: usize) -> Point {
        let c = self.cells[node];
        let off = self.n_half as f64 - 0.5;
        Point::new(
            (c[0] as f64 - off) * self.h,
            (c[1] as f64 - off) * self.h,
            (c[2] as f64 - off) * self.h,
        )
    }

    pub fn cell(&self, node: usize) -> [u32; 3] {
        self.cells[node]
    }

    /// Active index of a lattice cell, if active.
    pub fn lookup(&self, cell: [i64; 3]) -> Option<usize> {
        let m = self.side() as i64;
        if cell.iter().any(|&c| c < 0 || c >= m) {
            return None;
        }
        let id = self.index[((cell[0] * m + cell[1]) * m + cell[2]) as usize];
        (id != EXTERIOR).then_some(id as usize)
    }

    /// The six face neighbours of an interior node, all active.
    #[inline]
    pub fn neighbours(&self, node: usize) -> &[u32; 6] {
        &self.neighbours[node]
    }

    pub fn class(&self, node: usize) -> NodeClass {
        if node < self.n_interior {
            NodeClass::Interior
        } else if node < self.cells.len() {
            NodeClass::Shell
        } else {
            NodeClass::Exterior
        }
    }

    /// Interior nodes whose six neighbours are interior too.
    pub fn is_deep(&self, node: usize) -> bool {
        node < self.n_interior
            && self.neighbours[node]
                .iter()
                .all(|&n| (n as usize) < self.n_interior)
    }

    pub fn summary(&self) -> GridSummary {
        GridSummary {
            h: self.h,
            r_max: self.r_max,
            r_min: self.r_min,
            half_width: self.half_width(),
            interior_nodes: self.n_interior,
            shell_nodes: self.n_shell(),
            estimated_bytes: estimate_bytes(self.side(), self.n_active()),
        }
    }
}

fn estimate_bytes(side: usize, active: usize) -> u64 {
    (side as u64).pow(3) * 4 + active as u64 * BYTES_PER_NODE
}

fn validate(h: f64, r_max: f64, r_min: f64) -> Result<()> {
    if !(h.is_finite() && r_max.is_finite() && h > 0.0 && r_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid needs positive spacing and radius, got h={h}, R_max={r_max}"
        )));
    }
    if h >= r_max / 8.0 {
        return Err(Error::InvalidArgument(format!(
            "grid needs h < R_max/8, got h={h}, R_max={r_max}"
        )));
    }
    if !(r_min >= 0.0 && r_min + 4.0 * h < r_max) {
        return Err(Error::InvalidArgument(format!(
            "annulus needs 0 <= r_min < R_max - 4h, got r_min={r_min}"
        )));
    }
    Ok(())
}

/// Full ball `|x| < R_max` under the default memory cap.
pub fn build_grid(h: f64, r_max: f64) -> Result<BallGrid> {
    build_grid_with(h, r_max, 0.0, DEFAULT_MEMORY_CAP)
}

/// Ball or annulus with an explicit memory cap in bytes. The estimate is
/// checked before anything large is allocated.
pub fn build_grid_with(h: f64, r_max: f64, r_min: f64, memory_cap: u64) -> Result<BallGrid> {
    validate(h, r_max, r_min)?;
    let n_half = (r_max / h).ceil() as usize + 2;
    let m = 2 * n_half;
    let off = n_half as f64 - 0.5;
    let coord = |i: usize| (i as f64 - off) * h;
    let inside = |i: usize, j: usize, k: usize| {
        let r = (coord(i).powi(2) + coord(j).powi(2) + coord(k).powi(2)).sqrt();
        r < r_max && r > r_min
    };

    let interior_count = (0..m)
        .flat_map(|i| (0..m).flat_map(move |j| (0..m).map(move |k| (i, j, k))))
        .filter(|&(i, j, k)| inside(i, j, k))
        .count();
    let shell_estimate =
        (4.0 * std::f64::consts::PI * (r_max * r_max + r_min * r_min) / (h * h) * 2.0) as usize;
    let required = estimate_bytes(m, interior_count + shell_estimate);
    if required > memory_cap {
        return Err(Error::MemoryBudget {
            required,
            cap: memory_cap,
        });
    }

    let mut index = vec![EXTERIOR; m * m * m];
    let lin = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
    let mut cells = Vec::with_capacity(interior_count + shell_estimate);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                if inside(i, j, k) {
                    index[lin(i, j, k)] = cells.len() as u32;
                    cells.push([i as u32, j as u32, k as u32]);
                }
            }
        }
    }
    let n_interior = cells.len();
    let mut is_shell = vec![false; m * m * m];
    for c in &cells[..n_interior] {
        for off in NEIGHBOUR_OFFSETS {
            let n = [
                (c[0] as i32 + off[0]) as usize,
                (c[1] as i32 + off[1]) as usize,
                (c[2] as i32 + off[2]) as usize,
            ];
            let id = lin(n[0], n[1], n[2]);
            if index[id] == EXTERIOR {
                is_shell[id] = true;
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let id = lin(i, j, k);
                if is_shell[id] {
                    index[id] = cells.len() as u32;
                    cells.push([i as u32, j as u32, k as u32]);
                }
            }
        }
    }
    drop(is_shell);
    let neighbours = cells[..n_interior]
        .iter()
        .map(|c| {
            NEIGHBOUR_OFFSETS.map(|off| {
                index[lin(
                    (c[0] as i32 + off[0]) as usize,
                    (c[1] as i32 + off[1]) as usize,
                    (c[2] as i32 + off[2]) as usize,
                )]
            })
        })
        .collect();
    Ok(BallGrid {
        h,
        r_max,
        r_min,
        n_half,
        index,
        cells,
        neighbours,
        n_interior,
    })
}
