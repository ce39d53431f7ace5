//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A grid has fewer than 8 interior nodes.
    #[error("grid too coarse")]
    GridTooCoarse,

    /// A region to be discretized contains no nonpolar mass.
    #[error("empty compact set")]
    EmptyCompactSet,

    /// The Newtonian kernel was evaluated at coincident points.
    #[error("singular kernel")]
    SingularKernel,

    /// A sample carries a nonpositive patch radius.
    #[error("invalid patch radius")]
    InvalidPatchRadius,

    /// No regular level value was found for a smooth envelope.
    #[error("envelope failed")]
    EnvelopeFailed,

    /// A lattice cube has numerically polar complement, so the cube size does
    /// not exceed the capacity inradius.
    #[error("M too small")]
    MTooSmall,

    /// The subharmonic certificate produced a nonpositive Laplacian floor.
    #[error("certificate failed")]
    CertificateFailed,

    /// The certificate has no oscillation (upper bound equals lower bound), so
    /// the ratio-form eigenvalue bound is undefined.
    #[error("invalid: zero oscillation")]
    ZeroOscillation,

    /// Scene document could not be parsed.
    #[error("scene parse error: {0}")]
    SceneParse(String),

    /// A caller violated a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
