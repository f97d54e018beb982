//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimension {0} not supported (must be 1..=3)")]
    BadDimension(usize),
    #[error("grid axis {axis} has {nodes} nodes, need at least {need}")]
    GridTooSmall {
        axis: usize,
        nodes: usize,
        need: usize,
    },
    #[error("grid spacing must be positive and finite, got {0}")]
    BadSpacing(f64),
    #[error("field has {got} values, grid wants {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("difference quotient step must be a nonzero integer multiple of the spacing, got {0}")]
    BadQuotientStep(f64),
    #[error("mollifier radius {eps} is below the grid resolution {h}")]
    EpsBelowResolution { eps: f64, h: f64 },
    #[error("mollifier radius {0} leaves no interior nodes")]
    EpsTooLarge(f64),
    #[error("sampling plan produced no pairs")]
    EmptyPlan,
    #[error("test function is nonzero at frozen node {0}")]
    SupportViolated(usize),
    #[error("boundary mask must freeze the two outermost layers (node {0} is free)")]
    BadMask(usize),
    #[error("non-finite volume encountered during descent at iteration {iter}")]
    NonFiniteVolume { iter: usize },
    #[error(
        "phase angle {theta} is outside the principal branch window (|theta| must be < pi)"
    )]
    BranchAmbiguity { theta: f64 },
    #[error("rotation angle {0} must lie in (0, pi/2)")]
    BadAngle(f64),
    #[error("rotation margin must be positive, got {0}")]
    BadMargin(f64),
    #[error(
        "semi-convexity hypothesis fails: margin {margin} at pair {x0:?} -> {x1:?}"
    )]
    SemiconvexityViolated {
        margin: f64,
        x0: Vec<f64>,
        x1: Vec<f64>,
    },
    #[error("input potential is not tan(kappa)-convex: margin {margin} at pair {x0:?} -> {x1:?}")]
    InputConvexityViolated {
        margin: f64,
        x0: Vec<f64>,
        x1: Vec<f64>,
    },
    #[error("coordinate inversion failed at {} target node(s); first: {:?}", failures.len(), failures.first())]
    InversionFailed { failures: Vec<InversionFailure> },
    #[error("condition margin at c = 0 is {0}, below the requested tolerance; the sampler is broken")]
    DegenerateMargin(f64),
    #[error("parameter out of range: {0}")]
    BadParameter(String),
    #[error("unsupported field file extension {0:?} (use .fld or .fldb)")]
    BadExtension(String),
    #[error("malformed field file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One unconverged target node from a coordinate inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionFailure {
    pub node: usize,
    pub target: Vec<f64>,
    pub residual: f64,
}
