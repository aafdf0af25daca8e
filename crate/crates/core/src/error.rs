use thiserror::Error;

/// Errors raised by model construction and the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("point {0:?} lies outside the model support")]
    PointOutsideSupport(Vec<f64>),

    #[error("proposal density vanishes at {0:?} where the target is positive (support containment violated)")]
    ZeroProposalDensity(Vec<f64>),

    #[error(
        "weight function is unbounded (exceeded {threshold:e} near {near:?}): the chain is not geometrically ergodic"
    )]
    UnboundedWeight { threshold: f64, near: Vec<f64> },

    #[error("evaluation budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("state {0} has zero weight; the closed-form spectrum needs every weight positive")]
    ZeroWeightState(usize),

    #[error("rank-one perturbation is degenerate for eigenvector {index}: denominator {denominator:e}")]
    DegeneratePerturbation { index: usize, denominator: f64 },

    #[error("vector is not stationary for the matrix (residual {0:e})")]
    NotStationary(f64),

    #[error("d_max({t}) = {value:e} escapes the envelope [{lower:e}, {upper:e}]")]
    SandwichViolated {
        t: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("cannot fit a decay rate: {0}")]
    DegenerateFit(String),

    #[error("quadrature failed to reach tolerance: estimate {estimate:e}, error {error:e} after {subdivisions} subdivisions")]
    QuadratureFailure {
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("residual measure has a negative entry {value:e} at state {state}")]
    ResidualNegative { state: usize, value: f64 },

    #[error("theta = {0} is outside (0, 1]; for theta > 1 the weight exp(-(1-theta)x)/theta is unbounded, so the chain is not geometrically ergodic")]
    ThetaOutOfRange(f64),

    #[error("posterior mode undefined: alpha_i + x_i = {value} < 1 for category {index}")]
    ModeUndefined { index: usize, value: f64 },

    #[error("delta = {0} is outside [1, 2)")]
    DeltaOutOfRange(f64),

    #[error("target density is zero at the starting point {0:?}")]
    ZeroDensityAtStart(Vec<f64>),

    #[error("model specification error: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the model or its parameters rather than by
    /// a numerical routine.
    pub fn is_model_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidModel(_)
                | Error::PointOutsideSupport(_)
                | Error::ZeroProposalDensity(_)
                | Error::UnboundedWeight { .. }
                | Error::ThetaOutOfRange(_)
                | Error::ModeUndefined { .. }
                | Error::DeltaOutOfRange(_)
                | Error::Spec(_)
                | Error::ZeroWeightState(_)
                | Error::ZeroDensityAtStart(_)
                | Error::NotStationary(_)
        )
    }
}
