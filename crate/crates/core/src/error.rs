use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Dimensions, horizons, schedules or options that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("rollout diverged in phase {phase} at step {step}")]
    RolloutDivergence { phase: usize, step: usize },

    #[error("non-finite {what} in phase {phase} at step {step}")]
    Numerical {
        what: &'static str,
        phase: usize,
        step: usize,
    },

    #[error("abstraction schedule exhausted")]
    ScheduleExhausted,

    #[error("singular contact dynamics (condition estimate {condition:.3e})")]
    SingularConfiguration { condition: f64 },

    #[error("singular contact inertia in impact map (condition estimate {condition:.3e})")]
    SingularContact { condition: f64 },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
