//! Error type shared by every module of the crate.

use core::fmt;

/// Failure modes of the forward and inverse pipelines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A domain type was constructed from out-of-range values.
    InvalidInput(&'static str),
    /// The finite-difference grid is too coarse for the requested mode count.
    Resolution { grid_points: usize, required: usize },
    /// The banded eigensolver failed to reach its tolerance.
    Convergence(&'static str),
    /// Too few data points for the requested estimate.
    InsufficientData { needed: usize, got: usize },
    /// Nonlinear least squares did not converge within the iteration cap.
    FitDiverged { iterations: usize },
    /// No mode pair falls inside the requested frequency band.
    EmptyBand,
    /// Two spectra on different frequency grids cannot be combined.
    GridMismatch,
    /// Order assignment found two near-equally-good integer offsets.
    AmbiguousAssignment,
    /// A fit window contains too few bins.
    WindowTooNarrow { bins: usize },
    /// A convergence model's plateau disagrees with the beam's ellipticity.
    InconsistentEllipticity,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(what) => write!(f, "invalid input: {what}"),
            Error::Resolution {
                grid_points,
                required,
            } => write!(
                f,
                "grid too coarse: {grid_points} points, need at least {required}"
            ),
            Error::Convergence(what) => write!(f, "eigensolver failed to converge: {what}"),
            Error::InsufficientData { needed, got } => {
                write!(f, "insufficient data: need {needed}, got {got}")
            }
            Error::FitDiverged { iterations } => {
                write!(f, "fit diverged after {iterations} iterations")
            }
            Error::EmptyBand => write!(f, "no mode pair inside the frequency band"),
            Error::GridMismatch => write!(f, "frequency grids do not match"),
            Error::AmbiguousAssignment => write!(f, "ambiguous mode-order assignment"),
            Error::WindowTooNarrow { bins } => write!(f, "fit window too narrow: {bins} bins"),
            Error::InconsistentEllipticity => {
                write!(f, "convergence model plateau disagrees with beam ellipticity")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
