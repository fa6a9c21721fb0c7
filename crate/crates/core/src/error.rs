use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the toolkit. Electrode numbers in messages are 1-based.
#[derive(Debug, Error)]
pub enum Error {
    #[error("triangle {triangle} references node {node}, mesh has {count} nodes")]
    BadNodeIndex {
        triangle: usize,
        node: usize,
        count: usize,
    },
    #[error("triangle {0} is degenerate")]
    DegenerateTriangle(usize),
    #[error("non-manifold edge ({0}, {1}) shared by {2} triangles")]
    NonManifoldEdge(usize, usize, usize),
    #[error("multiple boundary components")]
    MultipleBoundaryComponents,
    #[error("node {0} is not referenced by any triangle")]
    UnreferencedNode(usize),
    #[error("empty mesh")]
    EmptyMesh,

    #[error("overlapping intervals: electrodes {0} and {1}")]
    OverlappingIntervals(usize, usize),
    #[error("electrode {0}: no interior boundary node")]
    NoInteriorNode(usize),
    #[error("electrodes {0} and {1}: missing separating node")]
    MissingSeparatingNode(usize, usize),
    #[error("electrode {0}: invalid interval ({1})")]
    InvalidInterval(usize, String),
    #[error("extended electrodes overlap: {0:?}")]
    ExtensionOverlap(Vec<(usize, usize)>),

    #[error("electrode {0} has zero contact")]
    ZeroContact(usize),
    #[error("matrix is not positive definite (pivot {pivot}, value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("covariance factorization failed after jitter {jitter:e} (diagonal range {min_diag:e}..{max_diag:e})")]
    CovarianceFactorization {
        jitter: f64,
        min_diag: f64,
        max_diag: f64,
    },
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("parameter index {index} out of range (count {count})")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("forward solution does not match the supplied parameters")]
    FingerprintMismatch,
    #[error("electrode {0}: center of mass undefined (zero net conductance)")]
    UndefinedCenter(usize),
    #[error("electrode {0}: net conductance is zero")]
    ZeroConductance(usize),
    #[error("linear solve failed: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dims(what: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            what: what.into(),
            expected,
            actual,
        }
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroContact(_)
                | Error::NotPositiveDefinite { .. }
                | Error::CovarianceFactorization { .. }
                | Error::Numerical(_)
                | Error::UndefinedCenter(_)
                | Error::ZeroConductance(_)
        )
    }
}
