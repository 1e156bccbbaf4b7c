use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate metric at {point:?}: {reason}")]
    DegenerateMetric { point: [f64; 3], reason: String },

    #[error("non-finite {what} at {point:?}")]
    Evaluation { what: &'static str, point: [f64; 3] },

    #[error("point {point:?} lies outside the chart of `{family}`")]
    OutsideChart { family: &'static str, point: [f64; 3] },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown metric family `{name}` (valid: {})", valid.join(", "))]
    UnknownFamily { name: String, valid: Vec<&'static str> },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("spin construction inconsistent: {check} residual {residual:e} exceeds {tolerance:e}")]
    ConstructionInconsistency {
        check: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("grid needs about {required} bytes, above the memory cap of {cap} bytes")]
    MemoryBudget { required: u64, cap: u64 },

    #[error("singular metric at grid node {node} ({point:?}): {reason}")]
    SingularNode {
        node: usize,
        point: [f64; 3],
        reason: String,
    },

    #[error("scalar curvature {value:e} < 0 at {point:?}; the Witten problem needs R >= 0")]
    NegativeScalarCurvature { value: f64, point: [f64; 3] },

    #[error("solver stopped after {iterations} iterations at relative residual {residual:e}")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn coords(x: &crate::Point) -> [f64; 3] {
    [x[0], x[1], x[2]]
}
