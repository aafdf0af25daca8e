//! Continuous-state machinery: sub-level-set masses of the weight, the
//! rejection function `λ`, the n-step kernel and rate reports.

mod kernel;
mod pair;
mod report;

pub use kernel::{n_step_kernel, t_n, t_n_direct, tv_at_point_general, TnTable};
pub use pair::{
    lambda_fn, rejection_probability, weight_cdf_pair, Estimate, LevelMasses, WeightCdfPair, LAMBDA_NODES, MC_DRAWS,
};
pub use report::{
    per_point_rate_general, rate_report, steps_to_eps, PointRate, RateReport, SpeedKind, StepsToEps, DEFAULT_EPS,
};
