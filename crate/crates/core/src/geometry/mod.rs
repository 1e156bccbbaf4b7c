//! Chart metrics, curvature and mass.

mod audit;
mod catalog;
mod curvature;
mod mass;
mod metric;
pub mod quadrature;

pub use audit::{oracle_audit, sample_shell, OracleAudit, ORACLE_SCALE_FLOOR};
pub use catalog::{
    BumpMetric, CatalogMetric, IsotropicFactor, RegularizedFactor, FAMILY_NAMES,
};
pub use curvature::{
    christoffel, curvature, kretschmann, raise_all, scalar_curvature, Christoffel,
    CurvatureBundle, Riemann, RiemannGradient,
};
pub use mass::{
    adm_mass, decay_audit, isoperimetric_estimate, DecayAudit, IsoperimetricEstimate,
    MassReport, SphereSample,
};
pub(crate) use curvature::{christoffel_from_jet, scalar_curvature_from_jet};
pub use metric::{
    ChartMetric, ConformalFactor, ConformalMetric, DecayOrder, FiniteDifferenceMetric,
    MetricGradient, MetricHessian, MetricJet,
};
