//! Flowline glacier evolution on a 1D horizontal domain.
//!
//! The model couples two pieces:
//!
//! * a regularized Glen-law Stokes solver on the vertically extruded ice
//!   domain between bed `b(x)` and surface `s(x)`, discretized with
//!   Taylor-Hood `Q2 x Q1` quadrilaterals ([`stokes`]), and
//! * an implicit-step surface update posed as a variational inequality
//!   with the bed as obstacle, solved by a reduced-space active-set
//!   Newton method ([`surface`]).
//!
//! On top of those, [`experiments`] drives the bed-case simulations,
//! coercivity-ratio sampling, Halfar dome verification, and the
//! finite-element error-term diagnostics. All quantities are SI:
//! meters, seconds, kilograms, Pascals.

pub mod config;
pub mod experiments;
pub mod fem;
pub mod halfar;
pub mod mesh;
pub mod stokes;
pub mod surface;

/// Seconds per year used for all unit conversions (365.2422 d).
pub const SECONDS_PER_YEAR: f64 = 3.1556926e7;

/// Crate-wide error type.
///
/// Variants mirror the failure classes of the numerical pipeline:
/// bad caller input, geometric inadmissibility, linear-solver trouble,
/// and outer-iteration nonconvergence.
#[derive(Debug, Clone)]
pub enum Error {
    /// A precondition on caller-supplied data failed.
    InvalidArgument(String),
    /// Surface/bed geometry violates `s >= b`.
    InadmissibleGeometry(String),
    /// Sparse or dense factorization failed or produced an inaccurate
    /// solution; carries the diagnostic from the factorization.
    SolverFailure(String),
    /// An iteration hit its cap; carries the last residual norm.
    Nonconvergence { what: String, residual: f64, iterations: usize },
    /// A sampled pair of states is numerically indistinguishable.
    DegeneratePair { norm: f64, scale: f64 },
    /// Configuration file could not be parsed or validated.
    Config(String),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::InadmissibleGeometry(m) => write!(f, "inadmissible geometry: {m}"),
            Error::SolverFailure(m) => write!(f, "solver failure: {m}"),
            Error::Nonconvergence { what, residual, iterations } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::DegeneratePair { norm, scale } => write!(
                f,
                "degenerate sample pair: |r - s| = {norm:.3e} below 1e-12 * {scale:.3e}"
            ),
            Error::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
