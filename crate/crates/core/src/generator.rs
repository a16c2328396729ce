//! Planted-partition simulation: heterogeneous community proportions, the
//! `(3/2)rho` / `(1/2)rho` kernel, and Bernoulli adjacency sampling.

use rand::Rng;
use rand_distr::Open01;
use thiserror::Error;

use crate::model::{
    AdjacencyMatrix, CommunityAssignment, CommunityProportions, KernelMatrix, ModelError, ScenarioConfig,
};
use crate::rng::{seeded_rng, RngHandle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("rho = {0} must lie in (0, 2/3)")]
    RhoOutOfRange(f64),
    #[error("kernel has {kernel} communities but labels declare {labels}")]
    KernelMismatch { kernel: usize, labels: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A sampled network together with everything used to produce it.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub adjacency: AdjacencyMatrix,
    pub truth: CommunityAssignment,
    pub kernel: KernelMatrix,
    pub proportions: CommunityProportions,
    /// The uniforms `v_k` behind `proportions`.
    pub latent_uniforms: Vec<f64>,
    pub scenario: ScenarioConfig,
}

/// Draws `v_k ~ U(0,1)` and sets `alpha_k = v_k^beta / sum_i v_i^beta`.
///
/// Returns the proportions and the latent uniforms.
pub fn draw_proportions(k: usize, beta: f64, rng: &mut RngHandle) -> Result<(CommunityProportions, Vec<f64>), GeneratorError> {
    if k == 0 {
        return Err(ModelError::ZeroCommunities.into());
    }
    let latent: Vec<f64> = (0..k).map(|_| rng.sample(Open01)).collect();
    if beta == 0.0 {
        return Ok((CommunityProportions::uniform(k), latent));
    }
    let powered: Vec<f64> = latent.iter().map(|v| v.powf(beta)).collect();
    let total: f64 = powered.iter().sum();
    let alpha = powered.iter().map(|p| p / total).collect();
    Ok((CommunityProportions::new(alpha)?, latent))
}

/// Independent categorical labels with `P(label = k) = alpha_k`.
pub fn assign_communities(n: usize, alpha: &CommunityProportions, rng: &mut RngHandle) -> CommunityAssignment {
    let k = alpha.k();
    let mut cumulative = Vec::with_capacity(k);
    let mut acc = 0.0;
    for &a in alpha.as_slice() {
        acc += a;
        cumulative.push(acc);
    }
    let labels = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            cumulative.iter().position(|&c| u < c).unwrap_or(k - 1)
        })
        .collect();
    CommunityAssignment::new_unchecked(labels, k)
}

/// Planted-partition kernel: `(3/2)rho` on the diagonal, `(1/2)rho` off it.
pub fn build_kernel(k: usize, rho: f64) -> Result<KernelMatrix, GeneratorError> {
    if !(rho > 0.0 && rho < 2.0 / 3.0) {
        return Err(GeneratorError::RhoOutOfRange(rho));
    }
    let entries = (0..k * k)
        .map(|idx| if idx / k == idx % k { 1.5 * rho } else { 0.5 * rho })
        .collect();
    Ok(KernelMatrix::new(k, entries)?)
}

/// Samples the upper triangle from `Bernoulli(B[z_i][z_j])` and mirrors it.
pub fn sample_adjacency(
    truth: &CommunityAssignment,
    kernel: &KernelMatrix,
    rng: &mut RngHandle,
) -> Result<AdjacencyMatrix, GeneratorError> {
    if kernel.k() != truth.k() {
        return Err(GeneratorError::KernelMismatch { kernel: kernel.k(), labels: truth.k() });
    }
    let n = truth.len();
    let mut dense = vec![0u8; n * n];
    for i in 0..n {
        let zi = truth.label(i);
        for j in (i + 1)..n {
            let p = kernel.get(zi, truth.label(j));
            if rng.random::<f64>() < p {
                dense[i * n + j] = 1;
                dense[j * n + i] = 1;
            }
        }
    }
    Ok(AdjacencyMatrix::from_dense_unchecked(n, dense))
}

const STREAM_PROPORTIONS: u64 = 0;
const STREAM_LABELS: u64 = 1;
const STREAM_EDGES: u64 = 2;

/// Full simulation pipeline; a pure function of `scenario`.
pub fn generate(scenario: &ScenarioConfig) -> Result<GeneratedInstance, GeneratorError> {
    scenario.validate()?;
    let (proportions, latent_uniforms) =
        draw_proportions(scenario.k, scenario.beta, &mut seeded_rng(scenario.seed, STREAM_PROPORTIONS))?;
    let truth = assign_communities(scenario.n, &proportions, &mut seeded_rng(scenario.seed, STREAM_LABELS));
    let kernel = build_kernel(scenario.k, scenario.rho())?;
    let adjacency = sample_adjacency(&truth, &kernel, &mut seeded_rng(scenario.seed, STREAM_EDGES))?;
    Ok(GeneratedInstance { adjacency, truth, kernel, proportions, latent_uniforms, scenario: *scenario })
}
