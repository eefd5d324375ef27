use thiserror::Error;

use crate::bundle::Bundle;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("mechanism error: {0}")]
    Mechanism(String),
    #[error("taxation principle violated: {0}")]
    Taxation(String),
    #[error("characterization violated at bundle {bundle}: {detail}")]
    Characterization { bundle: Bundle, detail: String },
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("bound violated: {0}")]
    Bound(String),
    #[error("promise violated: {0}")]
    Promise(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("soundness violated: {0}")]
    Soundness(String),
    #[error("precision violated: {0}")]
    Precision(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
