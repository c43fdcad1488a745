use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range. `name` is the offending key.
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("missing required configuration key `{0}`")]
    MissingKey(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// The configured topology/protocol combination can never deliver a packet.
    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    /// A trial exceeded its slot budget without delivering every packet.
    #[error("trial stalled after {slots} slots with {delivered} of {packets} packets delivered")]
    Stalled {
        slots: u64,
        delivered: u64,
        packets: u64,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("markov chain is reducible; no unique stationary distribution")]
    ReducibleChain,

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
