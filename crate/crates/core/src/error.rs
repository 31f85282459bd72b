use thiserror::Error;

/// Errors produced by the game engine, the strategies and the oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("deck exhausted: all {rounds} cards have been drawn")]
    DeckExhausted { rounds: usize },

    #[error("label {label} is outside 1..={n}")]
    InvalidLabel { label: u32, n: u32 },

    #[error("transcript has {played} of {rounds} rounds")]
    IncompleteTranscript { played: usize, rounds: usize },

    #[error("round index {t} outside 1..={max}")]
    IndexOutOfRange { t: usize, max: usize },

    #[error("deck of {mn} cards exceeds the oracle limit of {limit}")]
    OracleLimitExceeded { mn: usize, limit: usize },

    #[error("history is inconsistent with every deck ordering")]
    InfeasibleHistory,

    #[error("strategy `{0}` is randomized; exact evaluation needs a deterministic strategy")]
    RandomizedStrategyUnsupported(String),

    #[error("strategy `{0}` requires complete feedback")]
    WrongFeedbackMode(String),

    #[error("bernoulli mean {0} outside [0, 1]")]
    NumericalRange(f64),

    #[error("cannot parse strategy `{0}`")]
    UnknownStrategy(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
