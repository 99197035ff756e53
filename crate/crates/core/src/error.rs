use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// How a failure should be reported by front-ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input: malformed curve, sample point outside a chart, and so on.
    Input,
    /// A structural invariant of a constructed object failed.
    Invariant,
    /// A numerical procedure did not reach its tolerance.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("modulus must satisfy Im(tau) > 0, got tau = {re} + {im}i")]
    BadModulus { re: f64, im: f64 },

    #[error("theta series did not converge after {terms} terms")]
    SeriesDivergence { terms: usize },

    #[error("argument lies within {distance:e} of a pole")]
    Pole { distance: f64 },

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("invalid curve description: {0}")]
    BadCurve(String),

    #[error("point outside chart domain: {0}")]
    ChartDomain(String),

    #[error("quadrature did not converge: {nodes} nodes, residual {residual:e}")]
    NoConvergence { nodes: usize, residual: f64 },

    #[error("integrand pole at distance {distance:e} from the integration path")]
    PoleOnPath { distance: f64 },

    #[error("unsupported branch-cut configuration: {0}")]
    BadConfiguration(String),

    #[error("a-period matrix is singular (condition number {condition:e})")]
    SingularPiA { condition: f64 },

    #[error("Riemann relations violated: {0}")]
    RiemannRelations(String),

    #[error("kernel contract violated: {0}")]
    ContractViolation(String),

    #[error("normalizing correction is not symmetric (asymmetry {0:e})")]
    AsymmetricSolution(f64),

    #[error("imaginary part of the period matrix is singular")]
    SingularImTau,

    #[error("evaluation on the diagonal pole")]
    DiagonalPole,

    #[error("Laurent fit is ill conditioned (error estimate {error:e})")]
    IllConditionedFit { error: f64 },

    #[error("map is critical at the sample point (|f'| = {0:e})")]
    CriticalPoint(f64),

    #[error("perturbation matrix is not symmetric (asymmetry {0:e})")]
    AsymmetricInput(f64),

    #[error("finite-difference step too large: Richardson residual {residual:e}")]
    StepTooLarge { residual: f64 },

    #[error("deformation changes the contour topology: {0}")]
    ContourTopologyChanged(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            BadModulus { .. }
            | Pole { .. }
            | DegenerateCurve(_)
            | BadCurve(_)
            | ChartDomain(_)
            | PoleOnPath { .. }
            | BadConfiguration(_)
            | DiagonalPole
            | AsymmetricInput(_)
            | ContourTopologyChanged(_) => ErrorCategory::Input,
            RiemannRelations(_) | ContractViolation(_) | AsymmetricSolution(_) => {
                ErrorCategory::Invariant
            }
            SeriesDivergence { .. }
            | NoConvergence { .. }
            | SingularPiA { .. }
            | SingularImTau
            | IllConditionedFit { .. }
            | CriticalPoint(_)
            | StepTooLarge { .. } => ErrorCategory::Numeric,
        }
    }
}
