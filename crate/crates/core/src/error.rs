use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density is not normalized: mass {mass} deviates from 1 by more than {tolerance:e}")]
    NonNormalized { mass: f64, tolerance: f64 },

    #[error("density takes the negative value {value:e} at x = {x}")]
    NegativeDensity { x: f64, value: f64 },

    #[error("entropy expansion fit rejected: residual log-log slope {slope} is not within 0.25 of 2")]
    FitRejected { slope: f64 },

    #[error("recipe rejected: {0}")]
    RecipeRejected(String),

    #[error("second moment {second_moment} exceeds the power budget {budget}")]
    PowerViolation { second_moment: f64, budget: f64 },

    #[error("no Gaussian maximizer: L = {l} must exceed 1")]
    NoGaussianMax { l: f64 },

    #[error("(K, L, u) = ({k}, {l}, {u}) is not a Gaussian stationary point: expected K = {expected}")]
    NotStationary { k: f64, l: f64, u: f64, expected: f64 },

    #[error("eigenvalue {eigenvalue} of K is not below the stability threshold {threshold}")]
    HypothesisFailed { eigenvalue: f64, threshold: f64 },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("envelope support point ({q1}, {q2}) lies on the tabulation boundary")]
    GridTooSmall { q1: f64, q2: f64 },

    #[error("not applicable: f1 = {f1} is below g1 = {g1}")]
    NotApplicable { f1: f64, g1: f64 },

    #[error("no verified positive-gap witness: {0}")]
    WitnessUnavailable(String),

    #[error("polygon is not strictly convex and counterclockwise")]
    NonConvexInput,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
