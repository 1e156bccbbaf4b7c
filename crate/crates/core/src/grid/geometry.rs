use nalgebra::Matrix3;
use serde::Serialize;

use super::BallGrid;
use crate::error::coords;
use crate::geometry::{scalar_curvature_from_jet, ChartMetric, MetricJet};
use crate::spin::{axial_from_jet, frame_from_jet, SpinConnection};
use crate::{Error, Result};

/// Pointwise geometric data at one active node.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NodeGeometry {
    pub sqrt_det: f64,
    #[serde(skip)]
    pub ginv: Matrix3<f64>,
    /// `frame[(j, a)] = e_a^j`.
    #[serde(skip)]
    pub frame: Matrix3<f64>,
    /// `axial[j][c]`: `E_j = -½ Σ_c axial[j][c] Σ_c`.
    pub axial: [[f64; 3]; 3],
    pub scalar_curvature: f64,
}

/// Face coefficients between an interior node and one neighbour:
/// `A = ½(√g g^{jj} |_p + √g g^{jj} |_q)` and the averaged axial vector.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Face {
    pub a: f64,
    pub c: [f64; 3],
}

/// Geometry sampled on every active node of a grid.
#[derive(Debug, Clone)]
pub struct GridGeometry {
    pub nodes: Vec<NodeGeometry>,
    pub(crate) faces: Vec<[Face; 6]>,
    /// True when `g^{jk}` is diagonal at every node, so mixed terms vanish.
    pub diagonal: bool,
    pub family: String,
}

impl GridGeometry {
    /// Samples the metric, frame, connection and scalar curvature at every
    /// active node. Spin certification runs on a deterministic subsample.
    pub fn build<M: ChartMetric + ?Sized>(metric: &M, grid: &BallGrid) -> Result<Self> {
        let mut nodes = Vec::with_capacity(grid.n_active());
        for p in 0..grid.n_active() {
            let x = grid.position(p);
            let fail = |e: Error| Error::SingularNode {
                node: p,
                point: coords(&x),
                reason: e.to_string(),
            };
            let jet = MetricJet::at(metric, &x).map_err(fail)?;
            let frame = frame_from_jet(&jet).map_err(fail)?;
            let axial = axial_from_jet(&jet, &frame);
            let scalar = scalar_curvature_from_jet(&jet);
            if !scalar.is_finite() || axial.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::SingularNode {
                    node: p,
                    point: coords(&x),
                    reason: "non-finite connection or curvature".into(),
                });
            }
            if p % 4099 == 0 {
                SpinConnection::certify_at(metric, &x).map_err(fail)?;
            }
            nodes.push(NodeGeometry {
                sqrt_det: jet.det.sqrt(),
                ginv: jet.ginv,
                frame: frame.e,
                axial,
                scalar_curvature: scalar,
            });
        }
        let diagonal = nodes.iter().all(|n| {
            n.ginv[(0, 1)] == 0.0 && n.ginv[(0, 2)] == 0.0 && n.ginv[(1, 2)] == 0.0
        });
        let faces = (0..grid.n_interior())
            .map(|p| {
                let nb = grid.neighbours(p);
                std::array::from_fn(|d| {
                    let j = d / 2;
                    let (gp, gq) = (&nodes[p], &nodes[nb[d] as usize]);
                    Face {
                        a: 0.5 * (gp.sqrt_det * gp.ginv[(j, j)] + gq.sqrt_det * gq.ginv[(j, j)]),
                        c: std::array::from_fn(|c| 0.5 * (gp.axial[j][c] + gq.axial[j][c])),
                    }
                })
            })
            .collect();
        Ok(Self {
            nodes,
            faces,
            diagonal,
            family: metric.label(),
        })
    }

    /// `(A_f, averaged axial vector)` for the six faces of interior node `p`.
    pub fn face_coefficients(&self, p: usize) -> [(f64, [f64; 3]); 6] {
        self.faces[p].map(|f| (f.a, f.c))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `√det g · h³` for one node.
    pub fn volume_weight(&self, node: usize, h: f64) -> f64 {
        self.nodes[node].sqrt_det * h * h * h
    }

    pub fn min_scalar_curvature(&self) -> (usize, f64) {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.scalar_curvature))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    }
}
