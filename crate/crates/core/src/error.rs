use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum HopfError {
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),

    #[error("operation requires manifold {expected}, got {got}")]
    WrongManifold {
        expected: &'static str,
        got: &'static str,
    },

    #[error("field and geometry describe different lattices")]
    LatticeMismatch,

    /// Two field vectors sharing a plaquette are (nearly) antipodal, so the
    /// image area is undefined. Signals a discontinuous field.
    #[error("ill-conditioned plaquette at site {site}")]
    IllConditionedPlaquette { site: usize },

    #[error("net flux {flux} through {axis}-cross-sections: field is algebraically essential")]
    AlgebraicallyEssential { axis: usize, flux: i64 },

    #[error("cross-sections normal to axis {axis} carry different fluxes {first} and {other}")]
    CrossSectionDisagreement { axis: usize, first: i64, other: i64 },

    #[error("axis {0} has no closed cross-sections on this manifold")]
    OpenCrossSection(usize),

    #[error("profile violates boundary conditions: {0}")]
    BoundaryViolation(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("preimage extraction: {0}")]
    Preimage(String),

    #[error("field file: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = HopfError> = std::result::Result<T, E>;
