use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("standing wave table failed near endpoint {endpoint}: achieved error {achieved:e}")]
    StandingWave { endpoint: f64, achieved: f64 },

    #[error("invalid potential: {0}")]
    Potential(String),

    #[error("non-symmetric Hessian at zero {zero}: asymmetry {asymmetry:e}")]
    NonSymmetricHessian { zero: usize, asymmetry: f64 },

    #[error("separation violated: |h{next} - h{prev}| = {gap} < 2r = {two_r}")]
    SeparationViolated {
        prev: usize,
        next: usize,
        gap: f64,
        two_r: f64,
    },

    #[error("jump too close to boundary: h = {jump}, r = {r}, domain [{a}, {b}]")]
    JumpNearBoundary { jump: f64, r: f64, a: f64, b: f64 },

    #[error("invalid profile: {0}")]
    Profile(String),

    #[error("insufficient grid resolution: dx = {dx} > eps/4 = {limit}")]
    Resolution { dx: f64, limit: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("banded solve failed: zero pivot at row {row}")]
    SingularPivot { row: usize },

    #[error("solver failure at step {step} (t = {t}): {reason}")]
    Solver { step: u64, t: f64, reason: String },

    #[error("empty interface")]
    EmptyInterface,

    #[error("layer identity lost at t = {t}: {before} layers before, {after} after")]
    LayerIdentityLost { t: f64, before: usize, after: usize },

    #[error("descent diverged after {iterations} iterations: J trace {trace:?}")]
    DescentDiverged { iterations: usize, trace: Vec<f64> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
