use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("structure contains no atoms")]
    EmptyStructure,

    #[error("degenerate structure: {atoms} atom(s), at least 2 required")]
    DegenerateStructure { atoms: usize },

    #[error("unrecognised structure format for {0:?} (expected .pdb, .ent or .xyz)")]
    UnknownFormat(PathBuf),

    #[error("atom correspondence mismatch: {left} vs {right} atoms")]
    Correspondence { left: usize, right: usize },

    #[error("atoms {a} and {b} are coincident")]
    CoincidentAtoms { a: usize, b: usize },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("shape error in {op}: {msg}")]
    Shape { op: &'static str, msg: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fusion input is missing the {0} plex")]
    MissingPlex(&'static str),

    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },

    #[error("{path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("corrupt graph cache: {0}")]
    CorruptGraph(String),

    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("group {0:?} has no entries")]
    EmptyGroup(String),

    #[error("entry {entry}: {source}")]
    Entry {
        entry: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Shape {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn in_entry(self, entry: impl Into<String>) -> Self {
        Error::Entry {
            entry: entry.into(),
            source: Box::new(self),
        }
    }
}
