//! Probability models for IMH chains and their weight function `w = π/p`.

mod density;
mod discrete_model;
mod general_model;
mod wstar;

pub(crate) use density::{ln_gamma, log_sum_exp, sample_dirichlet};
pub use density::{DensitySpec, MixtureComponent};
pub use discrete_model::DiscreteModel;
pub use general_model::{GeneralModel, Monotone, PointFn, Sampler, StructureHints, SupportDescriptor};
pub use wstar::{
    compute_wstar, default_budget, wstar_discrete, WeightSummary, WstarMethod, UNBOUNDED_WEIGHT_THRESHOLD,
};
pub(crate) use wstar::{log_weight_or_limit, truncated_bounds, GridMap};
