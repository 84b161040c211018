use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the sampling core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, found: usize },
    /// Row `i` of the constraint matrix is identically zero.
    ZeroRow(usize),
    NonFinite,
    /// The point is on or outside the boundary of the open polytope.
    NotInterior,
    ZeroDirection,
    /// Box bounds with `lo[i] >= hi[i]`.
    DegenerateBounds(usize),
    NotPositiveDefinite,
    NotSymmetric,
    InvalidParameter(&'static str),
    /// The operation needs a strongly logconcave target (`alpha > 0`).
    RequiresStrongConvexity,
    MissingGradient,
    /// The Lewis weight solve needs a full column rank `A_x`.
    RankDeficient,
    LewisNotConverged { residual: f64, iterations: usize },
    /// The Lewis metric needs at least as many constraints as dimensions.
    TooFewConstraints { m: usize, n: usize },
    /// `f` returned a non-finite value at the given point.
    NonFiniteTarget,
    /// The ball `B(x1, r_tilde)` is not contained in the polytope.
    BallNotInside,
    /// The rejection oracle gave up after too many consecutive rejections.
    AcceptanceTooLow { accepted: usize, attempts: u64 },
    InconsistentQuery(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::ZeroRow(i) => write!(f, "constraint row {i} is all zeros"),
            Error::NonFinite => write!(f, "non-finite entry in input"),
            Error::NotInterior => write!(f, "point is not in the interior of the polytope"),
            Error::ZeroDirection => write!(f, "direction vector is zero"),
            Error::DegenerateBounds(i) => write!(f, "box bounds for coordinate {i} satisfy lo >= hi"),
            Error::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            Error::NotSymmetric => write!(f, "matrix is not symmetric"),
            Error::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
            Error::RequiresStrongConvexity => write!(f, "regime requires alpha > 0"),
            Error::MissingGradient => write!(f, "target does not provide a gradient"),
            Error::RankDeficient => write!(f, "scaled constraint matrix is rank deficient"),
            Error::LewisNotConverged { residual, iterations } => write!(
                f,
                "Lewis weights did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::TooFewConstraints { m, n } => write!(
                f,
                "Lewis metric needs m >= n (m = {m}, n = {n}); use the soft-threshold metric"
            ),
            Error::NonFiniteTarget => write!(f, "negative log-density is not finite"),
            Error::BallNotInside => write!(f, "inner ball is not contained in the polytope"),
            Error::AcceptanceTooLow { accepted, attempts } => write!(
                f,
                "rejection sampling acceptance too low ({accepted} accepted in {attempts} draws); \
                 precondition or shrink the instance"
            ),
            Error::InconsistentQuery(what) => write!(f, "inconsistent query: {what}"),
        }
    }
}

impl core::error::Error for Error {}
