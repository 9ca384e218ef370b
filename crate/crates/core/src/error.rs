//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
///
/// Variants are grouped by origin: argument validation, domain restrictions
/// of the closed-form kernels, geometry/data mismatches, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an argument outside its stated
    /// precondition (e.g. a grid with fewer than two samples).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A kernel or closed-form integral was evaluated outside its domain
    /// (e.g. `tilde_k_t` with a radius at or beyond the end time).
    #[error("domain error: {0}")]
    Domain(String),

    /// A time interpolation query fell outside the sampled interval.
    #[error("interpolation query out of range: {0}")]
    OutOfRange(String),

    /// A phantom primitive violates the support constraint.
    #[error("phantom primitive outside supported region: {0}")]
    OutOfSupport(String),

    /// An analytic evaluation was requested for a spec containing
    /// non-Gaussian primitives.
    #[error("unsupported phantom spec: {0}")]
    UnsupportedSpec(String),

    /// Two objects that must share a grid, detector geometry or time grid
    /// do not.
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    /// A reconstruction was handed a trace of the wrong kind.
    #[error("trace kind mismatch: {0}")]
    KindMismatch(String),

    /// The periodic computational box is too small for the requested end
    /// time; wrap-around images would reach the detectors.
    #[error("padded domain too small: {0}")]
    PadTooSmall(String),

    /// Mixed-data reconstruction with b = 0.
    #[error("invalid mixed-trace weights: {0}")]
    InvalidWeights(String),

    /// A theorem precondition (such as T >= diam) is not met.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A command needed a trace file that does not exist.
    #[error("missing trace: {0}")]
    MissingTrace(String),

    /// Experiment configuration failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// A data file disagrees with its sidecar or is otherwise malformed.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
