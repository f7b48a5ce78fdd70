use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("tangential or corner hit: |n·θ| = {cos:.3e} is within tolerance {tol:.1e}")]
    TangentialHit { cos: f64, tol: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("ray trapped: more than {max_reflections} reflections")]
    TrappedRay { max_reflections: usize },

    #[error("clearance {clearance} too large for obstacle {obstacle}: {reason}")]
    ClearanceTooLarge {
        obstacle: usize,
        clearance: f64,
        reason: String,
    },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("adaptive quadrature did not converge on [{a}, {b}] (depth limit {depth})")]
    QuadratureNonconvergent { a: f64, b: f64, depth: u32 },

    #[error("transport step too large: unitarity defect {defect:.3e} at arclength {arclength}")]
    StepTooLarge { defect: f64, arclength: f64 },

    #[error("singular gauge: {0}")]
    SingularGauge(String),

    #[error("undersampled loop: phase jump {jump:.3} at sample {index}")]
    UndersampledLoop { index: usize, jump: f64 },

    #[error("no obstacle-avoiding path to ({x1}, {x2}) at t = {t}")]
    PathBlocked { x1: f64, x2: f64, t: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("linear solve failed at step {step}: relative residual {residual:.3e}")]
    LinearSolveFailure { step: usize, residual: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
