use alloc::string::String;
use alloc::vec::Vec;

use crate::C64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    /// `G_h(z, z)` is `-inf`.
    #[error("Green's function evaluated on the diagonal")]
    Diagonal,

    #[error("degenerate measure: Gram matrix is not positive definite")]
    DegenerateMeasure,

    #[error("degenerate section: weighted norm is zero")]
    DegenerateSection,

    #[error("root finder did not converge (degree {})", coeffs.len().saturating_sub(1))]
    RootFinder { coeffs: Vec<C64> },

    #[error("zeros at infinity are not representable here")]
    ZerosAtInfinity,

    #[error("configuration has coincident zeros")]
    CoincidentZeros,

    #[error("full-mode Green energy needs a non-atomic (ring) measure")]
    AtomicMeasure,

    #[error("evaluation point is an atom of the measure")]
    AtomCollision,

    #[error("equilibrium solver failed to certify optimality (gap {gap:e} after {iterations} iterations)")]
    NotCertified { gap: f64, iterations: usize },

    #[error("transport problem is infeasible or unbalanced")]
    Transport,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
