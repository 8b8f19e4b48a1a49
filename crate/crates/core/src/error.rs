use thiserror::Error;

/// Errors raised by the solvers and their configuration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("empty set: {0}")]
    EmptySet(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("ill-posed Hamiltonian: {0}")]
    IllPosedHamiltonian(String),
    #[error("σ_* bound violated: H > 0 at radius {radius} along direction {direction:?}")]
    LowerBoundViolated { radius: f64, direction: Vec<f64> },
    #[error("empty source: no seed node lies inside the closed domain")]
    EmptySource,
    #[error("non-finite edge cost between nodes {from} and {to}")]
    NonFiniteCost { from: usize, to: usize },
    #[error("stencil radius {0} unsupported (expected 1, 2 or 3)")]
    StencilRadius(usize),
    #[error("broken predecessor chain at node {0}")]
    BrokenChain(usize),
    #[error("node {0} carries no finite value")]
    Absent(usize),
    #[error("non-coercive problem: no Dirichlet node in the solve region")]
    NonCoercive,
    #[error("region disconnected from the Dirichlet set ({0} nodes)")]
    Disconnected(usize),
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("kernel horizon {horizon} shorter than time horizon {required}")]
    KernelHorizon { horizon: f64, required: f64 },
    #[error("time horizon exceeded: v = {value} > T = {horizon}")]
    HorizonExceeded { value: f64, horizon: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
