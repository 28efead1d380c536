//! Error type shared across the pipeline stages.
//!
//! Stage failures are data, not aborts: the harness records the failure
//! reason per sample and keeps going, so every variant maps to a short
//! stable code that ends up in the results CSV.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Point set cannot be fit by an ellipse (collinear, or the best
    /// conic is a hyperbola/parabola).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// Ellipse violates a >= b > 0 or has a non-positive major axis.
    #[error("bad ellipse: {0}")]
    BadEllipse(String),

    /// No pupil-like blob passed the circularity and size gates.
    #[error("eye not found")]
    EyeNotFound,

    /// RANSAC could not find an ellipse with enough edge-point inliers.
    #[error("limbus not found")]
    LimbusNotFound,

    /// No connected component passed the color/brightness gate.
    #[error("object not found: {0}")]
    ObjectNotFound(String),

    /// The width constraint has no non-negative solution along the
    /// central reflected ray.
    #[error("no solution for device plane")]
    NoSolution,

    /// Left/right rays diverge such that the device width is never reached.
    #[error("divergent device edge rays")]
    DivergentRays,

    /// Pointer ray is parallel to the plane or intersects behind its origin.
    #[error("ray does not intersect plane")]
    NoIntersection,

    /// A metrics filter selected zero samples.
    #[error("empty selection")]
    EmptySelection,

    /// Configuration file or scene configuration is invalid.
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable code used as the `failure` column in results CSV.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::BadEllipse(_) => "BadEllipse",
            Error::EyeNotFound => "EyeNotFound",
            Error::LimbusNotFound => "LimbusNotFound",
            Error::ObjectNotFound(_) => "ObjectNotFound",
            Error::NoSolution => "NoSolution",
            Error::DivergentRays => "DivergentRays",
            Error::NoIntersection => "NoIntersection",
            Error::EmptySelection => "EmptySelection",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
