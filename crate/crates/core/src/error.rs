use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("fields belong to different grids")]
    GridMismatch,
    #[error("field length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("field is not strictly positive at node {index} (value {value:e})")]
    NonPositive { index: usize, value: f64 },
    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },
    #[error("operator is not positive definite (pivot {pivot} = {value:e})")]
    Indefinite { pivot: usize, value: f64 },
    #[error("singular matrix at pivot {0}")]
    Singular(usize),
    #[error("linear solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    LinearSolve { iterations: usize, residual: f64 },
    #[error("eigen iteration did not converge: residual {residual:e} after {iterations} iterations")]
    Eigen { iterations: usize, residual: f64 },
    #[error("pairing <-Δu, v> = {0:e} is not positive; u lies outside the admissible cone")]
    OutsideCone(f64),
    #[error("positivity lost: {fraction:.3} of nodes at the floor")]
    PositivityLoss { fraction: f64 },
    #[error("Newton iteration failed: {0}")]
    Newton(String),
    #[error("quadrature did not reach tolerance (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },
    #[error("bracketing failed: {0}")]
    Bracket(String),
    #[error("ODE integration failed: {0}")]
    Ode(String),
}

pub type Result<T> = std::result::Result<T, Error>;
