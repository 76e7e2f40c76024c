use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructor argument violated its invariant. Carries the field name.
    InvalidParameter {
        field: &'static str,
        reason: String,
    },
    InvalidTrajectory(String),
    /// A target point coincides with an antenna.
    DegenerateGeometry {
        antenna: usize,
    },
    /// No tangent through the array point touches the trajectory.
    TangentUnreachable {
        x_a: f64,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    NotHermitian {
        deviation: f64,
    },
    NoPrincipalComponent,
    MismatchedSampling,
    NumericalBreakdown(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { field, reason } => write!(f, "invalid `{field}`: {reason}"),
            Error::InvalidTrajectory(msg) => write!(f, "invalid trajectory: {msg}"),
            Error::DegenerateGeometry { antenna } => {
                write!(f, "target coincides with antenna {antenna}")
            }
            Error::TangentUnreachable { x_a } => {
                write!(f, "no tangent to the trajectory passes through x = {x_a} m")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NotHermitian { deviation } => {
                write!(f, "matrix is not Hermitian (max deviation {deviation:e})")
            }
            Error::NoPrincipalComponent => write!(f, "matrix has no principal component"),
            Error::MismatchedSampling => write!(f, "profiles do not share the same sample points"),
            Error::NumericalBreakdown(what) => write!(f, "numerical breakdown: {what}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}
