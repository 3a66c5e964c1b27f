use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("variable X{0} has no binding")]
    UnboundVariable(u8),

    #[error("invalid atom: {0}")]
    InvalidAtom(String),

    #[error("invalid clause: {0}")]
    InvalidClause(String),

    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("invalid language: {0}")]
    InvalidLanguage(String),

    #[error("invalid template: {0}")]
    InvalidTemplate(String),

    #[error("no admissible clause candidates for predicate {predicate}")]
    EmptyCandidateSpace { predicate: String },

    #[error(
        "estimated memory for {what} is {estimate} bytes ({:.2} GiB), above the cap of {cap} bytes ({:.2} GiB)",
        *estimate as f64 / GIB, *cap as f64 / GIB
    )]
    MemoryCapExceeded {
        what: &'static str,
        estimate: u64,
        cap: u64,
    },

    #[error("loss became non-finite at step {step} (last finite loss {last_finite})")]
    NonFiniteLoss { step: usize, last_finite: f64 },

    #[error("invalid training configuration: {0}")]
    InvalidTrainConfig(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("insufficient rows for class {class}: requested {requested}, available {available}")]
    InsufficientRows {
        class: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("edge {relation}({src},{dst}) is labeled both true and false")]
    DuplicateEdgeLabelConflict {
        src: String,
        dst: String,
        relation: String,
    },

    #[error("predicate {0} is recursive; the program cannot be flattened")]
    RecursivePredicate(String),

    #[error("predicate {predicate} has arity {arity}; only arity-1 programs compile to SQL")]
    UnsupportedArity { predicate: String, arity: usize },

    #[error("predictions and labels differ in length ({predictions} vs {labels})")]
    LengthMismatch { predictions: usize, labels: usize },

    #[error("nothing to evaluate: the example set is empty")]
    EmptyEvaluation,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

const GIB: f64 = (1u64 << 30) as f64;

/// Coarse failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Training,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::InvalidTemplate(_)
            | Error::InvalidTrainConfig(_)
            | Error::Parse { .. } => ErrorClass::Config,
            Error::SchemaMismatch(_)
            | Error::UnknownColumn(_)
            | Error::InsufficientRows { .. }
            | Error::DuplicateEdgeLabelConflict { .. }
            | Error::InvalidLanguage(_)
            | Error::InvalidAtom(_)
            | Error::EmptyEvaluation
            | Error::LengthMismatch { .. }
            | Error::UnboundVariable(_)
            | Error::Io(_)
            | Error::Csv(_) => ErrorClass::Data,
            Error::EmptyCandidateSpace { .. }
            | Error::MemoryCapExceeded { .. }
            | Error::NonFiniteLoss { .. }
            | Error::InvalidClause(_)
            | Error::InvalidProgram(_)
            | Error::RecursivePredicate(_)
            | Error::UnsupportedArity { .. } => ErrorClass::Training,
        }
    }
}
