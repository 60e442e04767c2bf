use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0} lies outside the domain")]
    OutOfDomain(f64),
    #[error("point {0} is an interface point; a side flag is required")]
    InterfaceAmbiguity(f64),
    #[error("coefficient has a root in a subdomain closure; not invertible")]
    NonInvertible,
    #[error("linear system is singular or near-singular (rcond estimate {rcond:.3e})")]
    SingularSystem { rcond: f64 },
    #[error("Gram matrix is singular")]
    SingularGram,
    #[error("coefficient matrix is not Hermitian")]
    NotSymmetric,
    #[error("coefficient matrix is not coercive (gamma = {gamma:.6e})")]
    NotCoercive { gamma: f64 },
    #[error("FE function has degree {degree}, cannot take {order} derivatives")]
    InsufficientRegularity { order: usize, degree: usize },
    #[error("Dirichlet boundary is empty; constant functions defeat the inequality")]
    NoDirichletBoundary,
    #[error("level-1 operator norms require quadratic elements")]
    RequiresP2,
    #[error("quadrature order {0} exceeds the tabulated rules")]
    QuadratureOrderOverflow(usize),
    #[error("manufactured solution violates the V_k trace/jump constraints: {0}")]
    NotInVk(String),
    #[error("degenerate convergence fit: errors are at machine precision")]
    DegenerateFit,
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
