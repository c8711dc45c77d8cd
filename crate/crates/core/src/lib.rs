//! Bayesian optimization over mixed categorical–continuous spaces.
//!
//! The surrogate is an exact Gaussian process whose covariance blends a
//! Gaussian + Cauchy spectral mixture kernel on the continuous coordinates
//! with a weighted exponentiated Hamming kernel on the categorical ones.
//! Suggestions come from maximizing an acquisition function inside an
//! adaptive trust region, alternating between the continuous box and the
//! categorical Hamming ball.

pub mod acquisition;
pub mod bench;
pub mod domain;
pub mod gp;
pub mod kernels;
pub mod optimizer;

pub use acquisition::{AcqConfig, AcqKind, AcqSpec};
pub use domain::{CategoricalVar, ContinuousVar, MixedPoint, NormalizedPoint, SearchSpace, SpaceError, SpaceSpec, Violation};
pub use gp::{GpError, GpModel, HyperBudget, Posterior};
pub use kernels::KernelParams;
pub use optimizer::{
    initial_design, run_loop, Campaign, CampaignConfig, CampaignError, Direction, Incumbent, KernelConfig,
    Observation, RunError, SuggestConfig, Suggestion, Tag, TrustRegionState,
};
