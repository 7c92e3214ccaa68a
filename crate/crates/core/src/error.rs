use thiserror::Error;

/// Errors raised by the model, controllers, optimizer and harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KiteError {
    #[error("degenerate geometry: theta = {theta} rad is within the guard band of the wind axis")]
    DegenerateGeometry { theta: f64 },

    #[error("flight direction undefined: kite is (nearly) static on the sphere")]
    UndefinedDirection,

    #[error("singular air flow: v_w cos(theta) - l_dot = {denominator} is too close to zero")]
    SingularAirflow { denominator: f64 },

    #[error("course {gamma} rad is unreachable at c1 = {c1}")]
    NoSolution { gamma: f64, c1: f64 },

    #[error("no equilibrium: arcsin argument {argument} outside [-1, 1]")]
    OutOfRange { argument: f64 },

    #[error("air path speed {v_a} m/s below the gain-inversion floor")]
    LowAirspeed { v_a: f64 },

    #[error("position coincides with the target point; direction is undefined")]
    SingularAtTarget,

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("telemetry contains no complete cycle")]
    NoCompleteCycle,

    #[error("stall at t = {t:.3} s: air path speed {v_a:.3} m/s")]
    Stall { t: f64, v_a: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no periodic orbit: theta(T) - theta(0) = {residual} rad")]
    NotPeriodic { residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for KiteError {
    fn from(err: std::io::Error) -> Self {
        KiteError::Io(err.to_string())
    }
}

impl From<csv::Error> for KiteError {
    fn from(err: csv::Error) -> Self {
        KiteError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KiteError>;

pub(crate) fn check(cond: bool, name: &'static str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(KiteError::InvalidParameter {
            name,
            reason: reason.to_string(),
        })
    }
}
