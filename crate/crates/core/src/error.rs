use std::path::PathBuf;

use crate::tree::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
    #[error("invalid dimensions {width}x{height}: {reason}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        reason: &'static str,
    },
    #[error("previous manipulated set is not contained in the next one")]
    ContainmentViolation,
    #[error("region is empty")]
    EmptyRegion,
    #[error("node {0} is not a leaf")]
    NotALeaf(NodeId),
    #[error("the root node cannot be removed")]
    CannotRemoveRoot,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("tree has no manipulated nodes")]
    EmptyTree,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("region placement failed after {attempts} attempts")]
    PlacementFailed { attempts: usize },
    #[error("no valid copy-move source offset for the target region")]
    NoValidSourceOffset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("enumeration budget exceeded for a {rows}x{cols} matrix (limit {limit}x{limit})")]
    BudgetExceeded {
        rows: usize,
        cols: usize,
        limit: usize,
    },
    #[error("path set is empty")]
    EmptyPathSet,
    #[error("unknown perturbation mode `{0}`")]
    UnknownMode(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            left_w: left.0,
            left_h: left.1,
            right_w: right.0,
            right_h: right.1,
        }
    }
}
