use thiserror::Error;

/// Errors produced anywhere in the lab.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed distribution, instance document, or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The requested operation needs a capability the input does not have
    /// (e.g. exact enumeration over a continuous law).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A brute-force routine was asked to go beyond its configured cap.
    #[error("size limit exceeded for {what}: {actual} > {cap}")]
    Size {
        what: &'static str,
        actual: usize,
        cap: usize,
    },

    /// Arguments that do not fit the instance (bad orders, wrong arity, wrong kind).
    #[error("invalid input: {0}")]
    Input(String),

    /// A policy produced a decision outside the feasible family.
    #[error("policy contract violation: {0}")]
    Contract(String),

    /// An oracle failed on a particular instance; the instance label is attached.
    #[error("oracle failed on instance `{instance}`: {source}")]
    Oracle {
        instance: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
