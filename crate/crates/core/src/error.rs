use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are not conformable.
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    NotSquare { rows: usize, cols: usize },
    /// An iterative solver hit its iteration cap.
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    InvalidArgument(String),
    /// The k-nearest-neighbor graph splits into several components.
    Disconnected { component_sizes: Vec<usize> },
    NonFinite(String),
    /// Training produced a non-finite loss.
    Divergence { epoch: usize },
    /// The decoded curve does not move, so speeds cannot be normalized.
    DegenerateCurve,
    /// Antipodal endpoints: infinitely many minimizing arcs.
    GeodesicNotUnique,
    /// A factorization or least-squares solve met a (numerically) singular system.
    Singular(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { op, left, right } => write!(
                f,
                "{op}: dimension mismatch between {}x{} and {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::NotSquare { rows, cols } => {
                write!(f, "matrix must be square, got {rows}x{cols}")
            }
            Error::NoConvergence {
                what,
                iterations,
                residual,
            } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::InvalidArgument(msg) => f.write_str(msg),
            Error::Disconnected { component_sizes } => write!(
                f,
                "neighborhood graph is disconnected: {} components with sizes {:?}",
                component_sizes.len(),
                component_sizes
            ),
            Error::NonFinite(ctx) => write!(f, "non-finite value in {ctx}"),
            Error::Divergence { epoch } => {
                write!(f, "training diverged (non-finite loss) at epoch {epoch}")
            }
            Error::DegenerateCurve => {
                f.write_str("degenerate curve: mean decoded speed is below 1e-12")
            }
            Error::GeodesicNotUnique => {
                f.write_str("geodesic not unique: endpoints are antipodal")
            }
            Error::Singular(what) => write!(f, "{what}: matrix is singular"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
