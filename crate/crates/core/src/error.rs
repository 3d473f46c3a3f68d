use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameter(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("point lies on the invariant axis x = y = 0, which has no polar chart")]
    OnAxis,
    #[error("chart mismatch: expected {expected}, found {found}")]
    ChartMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("step rejected: |z| * dt = {0} exceeds 0.5")]
    StepRejected(f64),
    #[error("state overflow at t = {t}: coordinate magnitude {value:e} exceeds 1e12")]
    Overflow { t: f64, value: f64 },
    #[error("degenerate diffusion: alpha must be strictly positive")]
    DegenerateDiffusion,
    #[error("singular discretisation: zero pivot at row {0}")]
    Singular(usize),
    #[error("linear solve failed: relative residual {residual:e} exceeds {tolerance:e}")]
    NonConvergence { residual: f64, tolerance: f64 },
    #[error("lambda = 0 leaves the sign of kappa undetermined")]
    ZeroLambda,
    #[error("point (theta = {theta}, z = {z}) lies outside the grid")]
    OutOfGrid { theta: f64, z: f64 },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("too few complete excursions: {found} < {required}")]
    TooFewExcursions { found: usize, required: usize },
    #[error("invalid bracket [{lo}, {hi}]: {reason}")]
    InvalidBracket { lo: f64, hi: f64, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no crossing: {0}")]
    NoCrossing(String),
}
