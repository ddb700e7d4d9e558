use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain an operation is defined on.
    #[error("domain error: {what} = {value} ({reason})")]
    Domain {
        what: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The integrand produced NaN or an infinity.
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },

    /// A tabulated CDF decreased by more than the allowed numerical noise.
    #[error("CDF decreases by {drop:e} between x = {from} and x = {to}")]
    ModelInconsistency { from: f64, to: f64, drop: f64 },

    #[error("invalid table: {0}")]
    InvalidTable(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configuration value failed validation; `path` is the dotted key.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("empty sample set")]
    EmptySamples,

    /// Wraps a lower-level failure with the stage that produced it.
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: impl FnOnce() -> String) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.in_stage(stage()))
    }
}
