use core::fmt;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A depth range or sample count that cannot produce a valid depth list.
    InvalidRange(&'static str),
    /// A homography whose determinant vanishes.
    SingularHomography,
    /// An operation that needs at least one element received none.
    EmptyInput(&'static str),
    /// Array or image dimensions disagree.
    Shape(&'static str),
    /// A NaN or infinite value where finite numbers are required.
    Numeric(&'static str),
    /// A scalar parameter outside its admissible interval.
    OutOfRange(&'static str),
    /// A depth that is not part of the MPI's depth list.
    Membership,
    /// Camera parameters violating the pinhole model invariants.
    InvalidCamera(&'static str),
    /// Fewer than two input views.
    InsufficientViews(usize),
    /// Malformed `.cmpi` container.
    Format { offset: usize, reason: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidRange(msg) => write!(f, "invalid range: {msg}"),
            Error::SingularHomography => f.write_str("singular homography"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Numeric(msg) => write!(f, "non-finite value: {msg}"),
            Error::OutOfRange(msg) => write!(f, "value out of range: {msg}"),
            Error::Membership => f.write_str("depth is not part of the MPI depth list"),
            Error::InvalidCamera(msg) => write!(f, "invalid camera: {msg}"),
            Error::InsufficientViews(k) => {
                write!(f, "at least 2 input views are required, got {k}")
            }
            Error::Format { offset, reason } => {
                write!(f, "malformed container at byte {offset}: {reason}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
