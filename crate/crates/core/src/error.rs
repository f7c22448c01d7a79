use thiserror::Error;

use crate::tokenization::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("token surface at index {0} is empty")]
    EmptySurface(usize),

    #[error("duplicate token surface {0:?}")]
    DuplicateSurface(String),

    #[error("symbol 0x{0:02x} is not part of the alphabet")]
    SymbolOutsideAlphabet(u8),

    #[error("vocabulary is incomplete: symbol 0x{0:02x} has no single-symbol token")]
    IncompleteVocabulary(u8),

    #[error("token {surface:?} contains the reserved EOS symbol")]
    EosInsideToken { surface: String },

    #[error("unknown token id {0}")]
    UnknownToken(TokenId),

    #[error("unknown token surface {0:?}")]
    UnknownSurface(String),

    #[error("invalid merge #{rank}: {reason}")]
    InvalidMerge { rank: usize, reason: String },

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("prefix is not a valid token sequence for this tokenizer")]
    InvalidPrefix,

    #[error("prefix already ends the sequence with EOS")]
    AfterEos,

    #[error("distribution has {got} entries, expected {expected}")]
    DistributionLength { expected: usize, got: usize },

    #[error("distribution is not normalized (sum = {0})")]
    NotNormalized(f64),

    #[error("distribution has a negative or non-finite entry at index {0}")]
    BadProbability(usize),

    #[error("every continuation is invalid or has zero probability")]
    ZeroMass,

    #[error("token {0} has zero probability under the current distribution")]
    ZeroProbabilityToken(TokenId),

    #[error("top-k must be at least 1")]
    InvalidTopK,

    #[error("relative cover for a proper prefix of {0:?} is not cached")]
    MissingCover(Vec<TokenId>),

    #[error("canonical retokenization {canonical:?} disagrees with cover entry {entry:?}")]
    InconsistentCover {
        canonical: Vec<TokenId>,
        entry: Vec<TokenId>,
    },

    #[error("product of experts is zero everywhere (member supports: {supports:?})")]
    ZeroProduct { supports: Vec<Vec<TokenId>> },

    #[error("ensemble needs at least one member")]
    EmptyEnsemble,

    #[error("need at least {0} inputs")]
    TooFewInputs(usize),

    #[error("empty training corpus")]
    EmptyCorpus,

    #[error("n-gram model requires an EOS token")]
    MissingEos,

    #[error("enumeration budget of {0} token sequences exceeded")]
    BudgetExceeded(u64),

    #[error("ensemble member {member} failed: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
