//! Error type shared by every module of the engine.

use thiserror::Error;

/// Errors raised by the engine.
///
/// Each variant carries a stable machine-readable [`Error::code`] used by the
/// command-line front end, and belongs to one of two classes
/// ([`Error::is_validation`]): invalid input versus numerical failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The scene violates one or more admissibility invariants.
    #[error("invalid scene: {}", .0.join("; "))]
    InvalidScene(Vec<String>),
    /// A scene file could not be parsed.
    #[error("scene file: {0}")]
    SceneFormat(String),
    /// Two evaluation points are closer than the separation tolerance.
    #[error("coincident points: |z - w| = {distance:e} below tolerance")]
    CoincidentPoints { distance: f64 },
    /// A point lies outside the open domain.
    #[error("point ({re}, {im}) lies outside the domain")]
    OutsideDomain { re: f64, im: f64 },
    /// The boundary collocation solver did not reach its residual tolerance.
    #[error("collocation solver not converged: residual {residual:e} > tolerance {tolerance:e}")]
    SolverNotConverged { residual: f64, tolerance: f64 },
    /// Adaptive boundary quadrature did not converge.
    #[error("boundary quadrature not converged (estimated error {estimate:e})")]
    QuadratureNotConverged { estimate: f64 },
    /// A quadratic form that must be negative definite is not.
    #[error("matrix is not negative definite (largest eigenvalue {max_eigenvalue:e})")]
    NotNegativeDefinite { max_eigenvalue: f64 },
    /// The theta lattice sum would need a radius beyond the configured cap.
    #[error("theta truncation radius {required} exceeds cap {cap}")]
    TruncationRadiusExceeded { required: usize, cap: usize },
    /// A theta constant in a denominator vanishes.
    #[error("theta constant vanishes (|theta(0;H)| = {magnitude:e})")]
    VanishingThetaConstant { magnitude: f64 },
    /// The instanton lattice truncation is too large to enumerate.
    #[error("instanton truncation exceeded: {0}")]
    TruncationExceeded(String),
    /// Finite-difference steps became too small to resolve.
    #[error("finite-difference step underflow")]
    StepUnderflow,
    /// A normalizing correlation in a denominator vanishes.
    #[error("degenerate normalization: denominator {magnitude:e} vanishes")]
    ParityDegenerate { magnitude: f64 },
    /// The supplied map does not send circles to circles conformally.
    #[error("map is not a circle-preserving conformal map: {0}")]
    NotCircleMap(String),
    /// An elliptic kernel was evaluated too close to a lattice pole.
    #[error("argument within {distance:e} of a lattice pole")]
    PoleProximity { distance: f64 },
    /// A Pfaffian was requested for an odd-dimensional matrix.
    #[error("matrix dimension {0} is odd")]
    OddDimension(usize),
    /// Input dimension unsupported by an exact enumeration routine.
    #[error("unsupported size: {0}")]
    Unsupported(String),
}

impl Error {
    /// Stable identifier printed by the command-line front end.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidScene(_) => "InvalidScene",
            Error::SceneFormat(_) => "SceneFormat",
            Error::CoincidentPoints { .. } => "CoincidentPoints",
            Error::OutsideDomain { .. } => "OutsideDomain",
            Error::SolverNotConverged { .. } => "SolverNotConverged",
            Error::QuadratureNotConverged { .. } => "QuadratureNotConverged",
            Error::NotNegativeDefinite { .. } => "NotNegativeDefinite",
            Error::TruncationRadiusExceeded { .. } => "TruncationRadiusExceeded",
            Error::VanishingThetaConstant { .. } => "VanishingThetaConstant",
            Error::TruncationExceeded(_) => "TruncationExceeded",
            Error::StepUnderflow => "StepUnderflow",
            Error::ParityDegenerate { .. } => "ParityDegenerate",
            Error::NotCircleMap(_) => "NotCircleMap",
            Error::PoleProximity { .. } => "PoleProximity",
            Error::OddDimension(_) => "OddDimension",
            Error::Unsupported(_) => "Unsupported",
        }
    }

    /// True for errors caused by inadmissible input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidScene(_)
                | Error::SceneFormat(_)
                | Error::CoincidentPoints { .. }
                | Error::OutsideDomain { .. }
                | Error::NotCircleMap(_)
                | Error::OddDimension(_)
                | Error::Unsupported(_)
        )
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
