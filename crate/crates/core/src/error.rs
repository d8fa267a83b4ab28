use std::io;

use crate::graph::Role;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{role:?} index {index} out of range (size {bound})")]
    OutOfRange { role: Role, index: usize, bound: usize },

    #[error("pair ({attacker}, {target}) carries both labels")]
    ConflictingLabel { attacker: usize, target: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("cannot build {k} folds from {records} records")]
    BadFoldCount { k: usize, records: usize },

    #[error("both classes are required")]
    SingleClass,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("node index {index} out of bounds for {nodes} nodes")]
    Index { index: usize, nodes: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("knock-out requires degree >= 1, got {0}")]
    BadDegree(usize),

    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
