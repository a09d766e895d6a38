use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation is at z-x-y gimbal lock (|sin theta_x| = {0})")]
    GimbalLock(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("insufficient shared contact: {shared} pixels (need {required})")]
    InsufficientOverlap { shared: usize, required: usize },

    #[error("degenerate Hessian: condition number {condition:.3e} exceeds {limit:.3e}")]
    DegenerateHessian { condition: f64, limit: f64 },

    #[error("degenerate ICP system: condition number {condition:.3e} exceeds {limit:.3e}")]
    DegenerateSystem { condition: f64, limit: f64 },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("no contact in rendered frame{}", .frame.map(|i| format!(" {i}")).unwrap_or_default())]
    NoContact { frame: Option<usize> },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("row count mismatch: estimate has {estimate} rows, ground truth has {truth}")]
    RowMismatch { estimate: usize, truth: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::GimbalLock(_) => "gimbal_lock",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::InsufficientOverlap { .. } => "insufficient_overlap",
            Error::DegenerateHessian { .. } => "degenerate_hessian",
            Error::DegenerateSystem { .. } => "degenerate_system",
            Error::EmptyCloud => "empty_cloud",
            Error::NoContact { .. } => "no_contact",
            Error::InvalidLoop(_) => "invalid_loop",
            Error::RowMismatch { .. } => "row_mismatch",
            Error::Config(_) => "config",
            Error::Format(_) => "format",
            Error::File { .. } | Error::Io(_) => "io",
        }
    }

    /// True for failures caused by the data being unregistrable (as opposed to
    /// I/O or malformed input).
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateHessian { .. }
                | Error::DegenerateSystem { .. }
                | Error::InsufficientOverlap { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
