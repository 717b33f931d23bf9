use thiserror::Error;

/// Errors produced by the simulation, estimation, optimization and fairness routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid population spec: {0}")]
    InvalidSpec(String),

    #[error("invalid rule schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error(
        "instrument has insufficient variation ({rounds} rounds, {required} required, condition number {condition:e})"
    )]
    InsufficientVariation {
        rounds: usize,
        required: usize,
        condition: f64,
    },

    #[error("stage-1 estimate rank-deficient (condition number {condition:e})")]
    Stage1RankDeficient { condition: f64 },

    #[error("singular regression design (minimum singular value {min_singular_value:e})")]
    SingularDesign { min_singular_value: f64 },

    #[error("bound vacuous at this T (denominator {denominator})")]
    VacuousBound { denominator: f64 },

    #[error("objective degenerate: every feasible rule optimal")]
    DegenerateObjective,

    #[error("iterate diverged at step {step} (norm {norm:e})")]
    Diverged { step: usize, norm: f64 },

    #[error("precondition violated: agents are at distance {distance:e}, formula requires 0")]
    NonZeroDistance { distance: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by degenerate numerics rather than bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InsufficientVariation { .. }
                | Error::Stage1RankDeficient { .. }
                | Error::SingularDesign { .. }
                | Error::VacuousBound { .. }
                | Error::DegenerateObjective
                | Error::Diverged { .. }
                | Error::NonZeroDistance { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
