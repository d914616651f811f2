use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} outside the admissible range [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("singular matrix in {context} (condition estimate {condition:.3e})")]
    SingularMatrix {
        context: &'static str,
        condition: f64,
    },

    #[error("decoupling violated: {what} residual {residual:.3e} exceeds {tolerance:.1e}")]
    DecouplingViolation {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("consistency check failed: {what} residual {residual:.3e} exceeds {tolerance:.1e}")]
    Consistency {
        what: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("index {index} outside the provider window [{lo}, {hi}]")]
    Window { index: i64, lo: i64, hi: i64 },

    #[error("reference too short: {what} needs {needed} samples, got {got}")]
    ReferenceLength {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("horizon too short: N = {n} must exceed head + tail = {required}")]
    HorizonTooShort { n: usize, required: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config schema violation at `{path}`: {message}")]
    ConfigSchema { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("step {step}: {source}")]
    AtStep {
        step: i64,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn at_step(self, step: i64) -> Self {
        match self {
            // keep the innermost index
            e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Step index attached to the error, if any.
    pub fn step(&self) -> Option<i64> {
        match self {
            Error::AtStep { step, .. } => Some(*step),
            _ => None,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::AtStep { source, .. } => source.class(),
            Error::InvalidParameter { .. }
            | Error::ConfigParse { .. }
            | Error::ConfigSchema { .. }
            | Error::HorizonTooShort { .. } => ErrorClass::Config,
            Error::Io { .. } | Error::Csv { .. } => ErrorClass::Io,
            Error::Domain { .. }
            | Error::SingularMatrix { .. }
            | Error::DecouplingViolation { .. }
            | Error::Consistency { .. }
            | Error::Window { .. }
            | Error::ReferenceLength { .. } => ErrorClass::Numerical,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AtStep { source, .. } => source.kind(),
            Error::Domain { .. } => "domain",
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::DecouplingViolation { .. } => "decoupling_violation",
            Error::Consistency { .. } => "consistency",
            Error::Window { .. } => "window",
            Error::ReferenceLength { .. } => "reference_length",
            Error::HorizonTooShort { .. } => "horizon_too_short",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::ConfigParse { .. } => "config_parse",
            Error::ConfigSchema { .. } => "config_schema",
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
        }
    }
}
