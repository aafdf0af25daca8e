//! Finite-state IMH: transition kernel, closed-form spectrum, exact n-step
//! total variation and per-state rates.
//!
//! Indices are canonical (weights in decreasing order); see
//! [`crate::measures::DiscreteModel`].

mod kernel;
mod random;
mod rates;
mod spectrum;
mod tv;

pub use kernel::{build_kernel, TransitionMatrix};
pub use random::{random_model, random_model_upto};
pub use rates::{per_point_rate_discrete, rate_bounds_discrete, DiscreteRates, SandwichReport, StateRate};
pub use spectrum::{liu_spectrum, rank_one_eigen, rank_one_eigenvectors, SpectralDecomposition};
pub use tv::{exact_tv, TvTrajectory};
