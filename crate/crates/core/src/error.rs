use thiserror::Error;

/// Errors raised across the skeleton, synthesis, p-adic and family layers.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("log-radius {value} lies beyond the configured horizon (last log-radius {limit})")]
    OutOfConfiguredRange { value: String, limit: String },
    #[error("stage plan is incomplete: {0}")]
    IncompletePlan(String),
    #[error("horizon exceeded: {0}")]
    HorizonExceeded(String),
    #[error("inconsistent plan: {0}")]
    InconsistentPlan(String),

    #[error("division by an element indistinguishable from zero")]
    DivisionByIndistinguishableZero,
    #[error("elements belong to different field contexts")]
    ContextMismatch,
    #[error("element is indistinguishable from zero at its precision")]
    IndistinguishableFromZero,
    #[error("Hensel condition failed: v(F) = {value_valuation}, v(F') = {derivative_valuation}")]
    HenselConditionFailed {
        value_valuation: String,
        derivative_valuation: String,
    },
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("unsupported extension: {0}")]
    UnsupportedExtension(String),
    #[error("valuation {0} is not in the value group of the context")]
    ValueGroupMismatch(String),

    #[error("tail bound unavailable: v(z) = {0} is not above -q_J")]
    TailBoundUnavailable(String),
    #[error("classification undecidable at current precision: {0}")]
    UndecidableAtPrecision(String),
    #[error("ramification degree {degree} exceeds the cap {cap}")]
    DegreeCapExceeded { degree: u64, cap: u64 },

    #[error("serialization: {0}")]
    Serialization(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable name used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::OutOfConfiguredRange { .. } => "OutOfConfiguredRange",
            Error::IncompletePlan(_) => "IncompletePlan",
            Error::HorizonExceeded(_) => "HorizonExceeded",
            Error::InconsistentPlan(_) => "InconsistentPlan",
            Error::DivisionByIndistinguishableZero => "DivisionByIndistinguishableZero",
            Error::ContextMismatch => "ContextMismatch",
            Error::IndistinguishableFromZero => "IndistinguishableFromZero",
            Error::HenselConditionFailed { .. } => "HenselConditionFailed",
            Error::PrecisionExhausted(_) => "PrecisionExhausted",
            Error::UnsupportedExtension(_) => "UnsupportedExtension",
            Error::ValueGroupMismatch(_) => "ValueGroupMismatch",
            Error::TailBoundUnavailable(_) => "TailBoundUnavailable",
            Error::UndecidableAtPrecision(_) => "UndecidableAtPrecision",
            Error::DegreeCapExceeded { .. } => "DegreeCapExceeded",
            Error::Serialization(_) => "Serialization",
            Error::Io(_) => "Io",
        }
    }

    /// Process exit code: 2 precondition error, 3 verification failure, 4 numeric exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PrecisionExhausted(_)
            | Error::DegreeCapExceeded { .. }
            | Error::UnsupportedExtension(_)
            | Error::UndecidableAtPrecision(_)
            | Error::IndistinguishableFromZero => EXIT_NUMERIC,
            Error::HenselConditionFailed { .. } | Error::InconsistentPlan(_) => EXIT_VERIFICATION,
            _ => EXIT_PRECONDITION,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub type Result<T> = std::result::Result<T, Error>;
