//! Stochastic block model toolkit: instance generation, four spectral
//! clustering variants, a Gibbs sampler, mean-field variational Bayes,
//! variational EM, partition metrics and a reproducible sweep harness.

pub mod generator;
pub mod gibbs;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod model;
pub mod numkit;
pub mod rng;
mod special;
pub mod spectral;
pub mod vb;
pub mod vem;

pub use generator::{generate, GeneratedInstance};
pub use metrics::{ari, nmi};
pub use model::{
    AdjacencyMatrix, CommunityAssignment, CommunityProportions, KernelMatrix, Method, ModelError, RunRecord,
    ScenarioConfig,
};
pub use rng::{seeded_rng, RngHandle};
