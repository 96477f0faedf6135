use thiserror::Error;

/// Errors surfaced by the core library.
///
/// Data-quality findings on individual spells are not errors; `validate_spell`
/// reports those as plain strings so callers can collect them per row.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value or parameter set fails its invariants.
    #[error("configuration: {0}")]
    Config(String),

    /// An input violates a precondition (ordering, shape, emptiness).
    #[error("invalid input: {0}")]
    Input(String),

    /// A lookup into macro series or joined records found no entry.
    #[error("missing data: {0}")]
    MissingData(String),

    /// A spell failed structural validation where a valid spell is required.
    #[error("spell {borrower_id}/{spell_index} invalid: {details}")]
    InvalidSpell {
        borrower_id: u32,
        spell_index: u32,
        details: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
