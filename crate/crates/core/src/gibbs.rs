//! Gibbs sampler for the hierarchical block model
//!
//! ```text
//! z_i ~ Mul(pi),  B_kl ~ Beta(a, b),  pi ~ Dir(alpha),  A_ij | z, B ~ Ber(B[z_i][z_j])
//! ```
//!
//! with the likelihood taken over ordered pairs `i != j`. Each undirected
//! edge therefore enters twice, consistently in the label and kernel
//! conditionals. `B` is symmetric: the upper triangle is sampled and mirrored.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use thiserror::Error;

use crate::model::{AdjacencyMatrix, CommunityAssignment, CommunityProportions, KernelMatrix};
use crate::rng::RngHandle;
use crate::special::{ln_beta, ln_gamma, softmax_in_place};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GibbsError {
    #[error("invalid Gibbs configuration: {0}")]
    InvalidConfig(String),
    #[error("need 1 <= k <= n, got k={k}, n={n}")]
    InvalidCount { k: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    /// Beta prior first shape.
    pub a: f64,
    /// Beta prior second shape.
    pub b_prior: f64,
    /// Dirichlet concentration per community; `None` means all ones.
    pub alpha_dir: Option<Vec<f64>>,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Use `Beta(a + A[kl], 1 + n_kl - A[kl])` for every block, as printed in
    /// the original derivation, instead of the exact conjugate update.
    pub paper_literal_beta: bool,
    /// Visit nodes in a fresh random order each sweep instead of `0..n`.
    pub randomized_sweep: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            a: 2.0,
            b_prior: 2.0,
            alpha_dir: None,
            n_iter: 2000,
            burn_in: 1000,
            thin: 1,
            paper_literal_beta: false,
            randomized_sweep: false,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self, k: usize) -> Result<(), GibbsError> {
        let bad = |msg: String| Err(GibbsError::InvalidConfig(msg));
        if !(self.a > 0.0) || !(self.b_prior > 0.0) {
            return bad(format!("Beta shapes must be positive (a={}, b={})", self.a, self.b_prior));
        }
        if let Some(alpha) = &self.alpha_dir {
            if alpha.len() != k {
                return bad(format!("alpha_dir has {} entries, expected {k}", alpha.len()));
            }
            if alpha.iter().any(|&x| !(x > 0.0)) {
                return bad("Dirichlet concentrations must be positive".into());
            }
        }
        if self.burn_in >= self.n_iter {
            return bad(format!("burn_in ({}) must be below n_iter ({})", self.burn_in, self.n_iter));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        Ok(())
    }

    fn dirichlet(&self, k: usize) -> Vec<f64> {
        self.alpha_dir.clone().unwrap_or_else(|| vec![1.0; k])
    }
}

/// Block sufficient statistics over ordered pairs `i != j`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockStats {
    pub k: usize,
    /// `n_k`.
    pub sizes: Vec<usize>,
    /// `n_kl = n_k n_l - n_k 1{k = l}`, row-major.
    pub pairs: Vec<usize>,
    /// `A[kl]`: sum of `A_ij` over ordered pairs in blocks `(k, l)`, row-major.
    pub edges: Vec<usize>,
}

impl BlockStats {
    #[inline]
    pub fn pairs(&self, k: usize, l: usize) -> usize {
        self.pairs[k * self.k + l]
    }

    #[inline]
    pub fn edges(&self, k: usize, l: usize) -> usize {
        self.edges[k * self.k + l]
    }
}

pub fn count_stats(z: &CommunityAssignment, a: &AdjacencyMatrix) -> BlockStats {
    let k = z.k();
    let sizes = z.sizes();
    let mut pairs = vec![0; k * k];
    for r in 0..k {
        for c in 0..k {
            pairs[r * k + c] = sizes[r] * sizes[c] - if r == c { sizes[r] } else { 0 };
        }
    }
    let mut edges = vec![0; k * k];
    for (i, j) in a.edges() {
        let (zi, zj) = (z.label(i), z.label(j));
        edges[zi * k + zj] += 1;
        edges[zj * k + zi] += 1;
    }
    BlockStats { k, sizes, pairs, edges }
}

/// Current parameter values of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState {
    pub z: CommunityAssignment,
    pub b_mat: KernelMatrix,
    pub pi: CommunityProportions,
}

fn proportions_from_weights(weights: Vec<f64>) -> CommunityProportions {
    let floored: Vec<f64> = weights.into_iter().map(|w| w.max(f64::MIN_POSITIVE)).collect();
    let total: f64 = floored.iter().sum();
    let mut alpha: Vec<f64> = floored.iter().map(|w| w / total).collect();
    // absorb rounding so the simplex invariant holds to the last bit we can
    let drift: f64 = 1.0 - alpha.iter().sum::<f64>();
    let largest = (0..alpha.len()).max_by(|&x, &y| alpha[x].total_cmp(&alpha[y])).unwrap();
    alpha[largest] += drift;
    CommunityProportions::new(alpha).expect("normalized positive weights")
}

fn draw_dirichlet(concentration: &[f64], rng: &mut RngHandle) -> CommunityProportions {
    if concentration.len() == 1 {
        return CommunityProportions::uniform(1);
    }
    let weights = concentration
        .iter()
        .map(|&c| Gamma::new(c, 1.0).expect("positive shape").sample(rng))
        .collect();
    proportions_from_weights(weights)
}

/// `pi | . ~ Dir(alpha_1 + n_1, ..., alpha_K + n_K)`.
pub fn sample_pi(stats: &BlockStats, config: &GibbsConfig, rng: &mut RngHandle) -> CommunityProportions {
    let alpha = config.dirichlet(stats.k);
    let posterior: Vec<f64> = alpha.iter().zip(&stats.sizes).map(|(a, &n)| a + n as f64).collect();
    draw_dirichlet(&posterior, rng)
}

/// Beta shapes of the full conditional of `B_kl`.
pub fn beta_posterior(stats: &BlockStats, config: &GibbsConfig, k: usize, l: usize) -> (f64, f64) {
    let successes = stats.edges(k, l) as f64;
    let failures = (stats.pairs(k, l) - stats.edges(k, l)) as f64;
    if config.paper_literal_beta {
        return (config.a + successes, 1.0 + failures);
    }
    // Off-diagonal entries appear in blocks (k,l) and (l,k) of the ordered-pair likelihood.
    let multiplicity = if k == l { 1.0 } else { 2.0 };
    (config.a + multiplicity * successes, config.b_prior + multiplicity * failures)
}

const B_FLOOR: f64 = 1e-300;
const B_CEIL: f64 = 1.0 - f64::EPSILON;

/// Samples the upper triangle of `B` from its Beta conditionals and mirrors it.
pub fn sample_b(stats: &BlockStats, config: &GibbsConfig, rng: &mut RngHandle) -> KernelMatrix {
    let k = stats.k;
    let mut entries = vec![0.0; k * k];
    for r in 0..k {
        for c in r..k {
            let (s1, s2) = beta_posterior(stats, config, r, c);
            let draw: f64 = Beta::new(s1, s2).expect("positive shapes").sample(rng);
            let draw = draw.clamp(B_FLOOR, B_CEIL);
            entries[r * k + c] = draw;
            entries[c * k + r] = draw;
        }
    }
    KernelMatrix::new(k, entries).expect("symmetric probabilities")
}

struct LogKernel {
    k: usize,
    log_b: Vec<f64>,
    log_1mb: Vec<f64>,
}

impl LogKernel {
    fn new(b: &KernelMatrix) -> Self {
        let k = b.k();
        let log_b = b.entries().iter().map(|p| p.ln()).collect();
        let log_1mb = b.entries().iter().map(|p| (-p).ln_1p()).collect();
        Self { k, log_b, log_1mb }
    }
}

/// Unnormalized log conditional `log P(z_i = c | .)` for every `c`, split
/// into the `pi` term, the row product (`A_ij`, `B[c][z_j]`) and the column
/// product (`A_ji`, `B[z_j][c]`).
pub fn label_log_conditional(state: &GibbsState, a: &AdjacencyMatrix, i: usize) -> Vec<(f64, f64, f64)> {
    let lk = LogKernel::new(&state.b_mat);
    let mut linked = vec![0usize; lk.k];
    let mut others = state.z.sizes();
    others[state.z.label(i)] -= 1;
    label_terms(&lk, &state.pi, state.z.labels(), a, &others, &mut linked, i)
}

fn label_terms(
    lk: &LogKernel,
    pi: &CommunityProportions,
    labels: &[usize],
    a: &AdjacencyMatrix,
    others: &[usize],
    linked: &mut [usize],
    i: usize,
) -> Vec<(f64, f64, f64)> {
    let k = lk.k;
    linked.iter_mut().for_each(|m| *m = 0);
    for &j in a.neighbors(i) {
        linked[labels[j as usize]] += 1;
    }
    (0..k)
        .map(|c| {
            let mut row = 0.0;
            let mut col = 0.0;
            for l in 0..k {
                let on = linked[l] as f64;
                let off = (others[l] - linked[l]) as f64;
                if on > 0.0 {
                    row += on * lk.log_b[c * k + l];
                    col += on * lk.log_b[l * k + c];
                }
                if off > 0.0 {
                    row += off * lk.log_1mb[c * k + l];
                    col += off * lk.log_1mb[l * k + c];
                }
            }
            (pi.as_slice()[c].ln(), row, col)
        })
        .collect()
}

/// One sequential sweep resampling every label from its full conditional.
/// `order` lists the nodes to visit.
pub fn sample_z(state: &GibbsState, a: &AdjacencyMatrix, order: &[usize], rng: &mut RngHandle) -> CommunityAssignment {
    let k = state.z.k();
    if k == 1 {
        return state.z.clone();
    }
    let lk = LogKernel::new(&state.b_mat);
    let mut labels = state.z.labels().to_vec();
    let mut sizes = state.z.sizes();
    let mut linked = vec![0usize; k];
    let mut probs = vec![0.0; k];
    for &i in order {
        sizes[labels[i]] -= 1;
        let terms = label_terms(&lk, &state.pi, &labels, a, &sizes, &mut linked, i);
        for (p, (prior, row, col)) in probs.iter_mut().zip(terms) {
            *p = prior + row + col;
        }
        softmax_in_place(&mut probs);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut choice = k - 1;
        for (c, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                choice = c;
                break;
            }
        }
        sizes[choice] += 1;
        labels[i] = choice;
    }
    CommunityAssignment::new_unchecked(labels, k)
}

/// Unnormalized log joint: Dirichlet prior, Beta priors on the upper
/// triangle, multinomial labels and the ordered-pair Bernoulli likelihood.
pub fn log_posterior(state: &GibbsState, a: &AdjacencyMatrix, config: &GibbsConfig) -> f64 {
    log_posterior_with_stats(state, &count_stats(&state.z, a), config)
}

fn log_posterior_with_stats(state: &GibbsState, stats: &BlockStats, config: &GibbsConfig) -> f64 {
    let k = stats.k;
    let alpha = config.dirichlet(k);
    let pi = state.pi.as_slice();
    let alpha_sum: f64 = alpha.iter().sum();
    let mut total = ln_gamma(alpha_sum);
    for c in 0..k {
        total += -ln_gamma(alpha[c]) + (alpha[c] - 1.0 + stats.sizes[c] as f64) * pi[c].ln();
    }
    let prior_norm = -ln_beta(config.a, config.b_prior);
    for r in 0..k {
        for c in 0..k {
            let p = state.b_mat.get(r, c);
            let (lp, l1p) = (p.ln(), (-p).ln_1p());
            if c >= r {
                total += prior_norm + (config.a - 1.0) * lp + (config.b_prior - 1.0) * l1p;
            }
            let on = stats.edges(r, c) as f64;
            let off = (stats.pairs(r, c) - stats.edges(r, c)) as f64;
            if on > 0.0 {
                total += on * lp;
            }
            if off > 0.0 {
                total += off * l1p;
            }
        }
    }
    total
}

/// Outcome of a full chain.
#[derive(Debug, Clone)]
pub struct GibbsOutput {
    /// Retained sample with the highest log posterior.
    pub assignment: CommunityAssignment,
    pub best_log_posterior: f64,
    /// Sweep index (1-based) of the retained sample.
    pub best_sweep: usize,
    /// Log posterior after every sweep.
    pub trace: Vec<f64>,
    pub sweeps: usize,
}

/// A running chain; drives the `(pi, B, z)` update cycle.
pub struct GibbsChain<'a> {
    adjacency: &'a AdjacencyMatrix,
    config: GibbsConfig,
    state: GibbsState,
    stats: BlockStats,
    order: Vec<usize>,
    rng: RngHandle,
    sweeps: usize,
}

impl<'a> GibbsChain<'a> {
    /// Labels start uniform at random; `pi` and `B` are drawn from their priors.
    pub fn new(adjacency: &'a AdjacencyMatrix, k: usize, config: GibbsConfig, mut rng: RngHandle) -> Result<Self, GibbsError> {
        let n = adjacency.n();
        if k == 0 || k > n {
            return Err(GibbsError::InvalidCount { k, n });
        }
        config.validate(k)?;
        let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
        let z = CommunityAssignment::new_unchecked(labels, k);
        let pi = draw_dirichlet(&config.dirichlet(k), &mut rng);
        let empty = BlockStats { k, sizes: vec![0; k], pairs: vec![0; k * k], edges: vec![0; k * k] };
        let prior_config = GibbsConfig { paper_literal_beta: false, ..config.clone() };
        let b_mat = sample_b(&empty, &prior_config, &mut rng);
        let stats = count_stats(&z, adjacency);
        Ok(Self { adjacency, config, state: GibbsState { z, b_mat, pi }, stats, order: (0..n).collect(), rng, sweeps: 0 })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn log_posterior(&self) -> f64 {
        log_posterior_with_stats(&self.state, &self.stats, &self.config)
    }

    /// One `(pi, B, z)` cycle.
    pub fn sweep(&mut self) {
        self.state.pi = sample_pi(&self.stats, &self.config, &mut self.rng);
        self.state.b_mat = sample_b(&self.stats, &self.config, &mut self.rng);
        if self.config.randomized_sweep {
            for i in (1..self.order.len()).rev() {
                let j = self.rng.random_range(0..=i);
                self.order.swap(i, j);
            }
        }
        self.state.z = sample_z(&self.state, self.adjacency, &self.order, &mut self.rng);
        self.stats = count_stats(&self.state.z, self.adjacency);
        self.sweeps += 1;
    }
}

/// Runs `n_iter` sweeps and returns the highest-posterior retained sample.
pub fn run_gibbs(a: &AdjacencyMatrix, k: usize, config: &GibbsConfig, rng: RngHandle) -> Result<GibbsOutput, GibbsError> {
    let mut chain = GibbsChain::new(a, k, config.clone(), rng)?;
    let mut trace = Vec::with_capacity(config.n_iter);
    let mut best: Option<(f64, usize, CommunityAssignment)> = None;
    for sweep in 1..=config.n_iter {
        chain.sweep();
        let lp = chain.log_posterior();
        trace.push(lp);
        let retained = sweep > config.burn_in && (sweep - config.burn_in) % config.thin == 0;
        if retained && best.as_ref().is_none_or(|(b, _, _)| lp > *b) {
            best = Some((lp, sweep, chain.state().z.clone()));
        }
    }
    let (best_log_posterior, best_sweep, assignment) = best.expect("burn_in < n_iter retains a sample");
    Ok(GibbsOutput { assignment, best_log_posterior, best_sweep, trace, sweeps: config.n_iter })
}
