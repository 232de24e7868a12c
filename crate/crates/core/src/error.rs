//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Two inputs that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A minimal sample set produced a singular or rank-deficient system;
    /// the caller should draw a fresh sample.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Every RANSAC iteration drew a degenerate sample, so no candidate
    /// model exists for the block.
    #[error("no consensus model found for block")]
    NoModel,

    /// Gram-Schmidt lost orthogonality beyond tolerance; the requested
    /// polynomial degrees are numerically unusable at this block size.
    #[error("orthogonality loss {max_deviation:.3e} exceeds 1e-8 while building polynomial basis")]
    NumericalDegeneracy { max_deviation: f64 },

    /// The inlier ratio / model size combination underflows, so no finite
    /// iteration count reaches the requested confidence.
    #[error("requested confidence is unreachable: inlier_ratio^model_size underflows")]
    UnreachableConfidence,

    /// Malformed PNM (PGM/PPM) data.
    #[error("pnm: {0}")]
    Pnm(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
