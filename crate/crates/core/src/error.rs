use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by every module of the crate.
///
/// A query that is well formed but not realizable is *not* an error; see
/// [`crate::realize::Verdict`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("edge {0} -> {1} declared twice")]
    DuplicateEdge(String, String),
    #[error("directed edges contain a cycle through {0:?}")]
    Cycle(Vec<String>),
    #[error("domain of `{0}` has fewer than two values and is not flagged constant")]
    DomainTooSmall(String),
    #[error("domain of `{0}` repeats a value")]
    DuplicateDomainValue(String),
    #[error("at most {max} variables are supported, got {got}")]
    TooManyVariables { got: usize, max: usize },
    #[error("value `{value}` is not in the domain of `{var}`")]
    InvalidValue { var: String, value: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("containment violated for {var}: {first:?} and {second:?} overlap without nesting")]
    Containment { var: String, first: Vec<String>, second: Vec<String> },
    #[error("FCE violation: {0}")]
    Fce(String),
    #[error("action not available in this environment: {0}")]
    ActionUnavailable(String),
    #[error("gave up after {rejections} rejected units (estimated acceptance probability {acceptance:.3e})")]
    MaxRejections { rejections: u64, acceptance: f64 },
    #[error("estimate requires a non-empty batch")]
    EmptyBatch,
    #[error("expanded diagram violates the tree structure: {0}")]
    TreeStructure(String),
    #[error("mediator `{mediator}` reaches `{var}` through base variable `{via}`")]
    NoForks { mediator: String, var: String, via: String },
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("problem does not fit the bandit template: {0}")]
    Template(String),
    #[error("strategy context is not realizable: {0}")]
    UnrealizableStrategy(String),
    #[error("enumeration too large: {0}")]
    TooLarge(String),
    #[error("acceptance rate {rate:.3e} after {proposals} proposals ({accepted} accepted); try a larger epsilon")]
    LowAcceptance { rate: f64, proposals: u64, accepted: usize },
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Fixture(e.to_string())
    }
}
