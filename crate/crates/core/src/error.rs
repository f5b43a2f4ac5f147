use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// The capture header could not be read.
    #[error("pcap format error: {0}")]
    Format(String),
    #[error("unsupported pcap link type {0} (expected 105 or 127)")]
    UnsupportedLinkType(u32),
    #[error("configuration error: {0}")]
    Config(String),
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("unsupported classifier kind: {0}")]
    UnsupportedKind(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn evaluation(msg: impl Into<String>) -> Self {
        Error::Evaluation(msg.into())
    }
}
