use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape {index} has numerically zero norm ({norm:e})")]
    DegenerateShape { index: usize, norm: f64 },
    #[error("mesh inconsistency: {0}")]
    Mesh(String),
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("local saddle system singular on element {element}")]
    SingularLocalSystem { element: usize },
    #[error("Uzawa iteration stalled after {iterations} iterations (divergence norm {div_norm:e})")]
    UzawaStalled { iterations: usize, div_norm: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
