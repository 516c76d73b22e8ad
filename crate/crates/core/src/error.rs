use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("plaintext value {value} is outside [0, 32)")]
    ValueOutOfRange { value: i64 },

    #[error("noise variance {variance} exceeds the budget of {budget}")]
    NoiseBudgetExceeded { variance: u64, budget: u64 },

    #[error("refresh needs a value in [0, 16), got {value}")]
    ValueOutsideLutHalf { value: u8 },

    #[error("noise budget {budget} is below the minimum key variance {minimum}")]
    BudgetTooSmall { budget: u64, minimum: u64 },

    #[error("lookup table cannot represent the function at key {key}")]
    PackingViolation { key: u8 },

    #[error("character {0:?} is not in the alphabet")]
    CharNotInAlphabet(char),

    #[error("character {0:?} is not in the preprocessed subset")]
    CharNotInSubset(char),

    #[error("position {position} is outside 1..={len}")]
    PositionOutOfRange { position: usize, len: usize },

    #[error("band half-width {half_width} is narrower than the length difference of {m} and {n}")]
    BandTooNarrow {
        half_width: usize,
        m: usize,
        n: usize,
    },

    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),

    #[error("invalid circuit input: {0}")]
    InvalidCircuit(String),

    #[error("malformed data: {0}")]
    Format(String),
}
