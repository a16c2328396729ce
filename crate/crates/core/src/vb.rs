//! Mean-field variational Bayes with point-mass labels, a Gaussian kernel
//! factor `N(mu, Sigma)` and a one-parameter scale factor indexed by `a`
//! (tracked through `delta = 1 + sqrt(2 beta / a)`).
//!
//! Each iteration runs, in order: label update (randomized node order,
//! argmin of `v_ic`), `a`/`delta` update, `mu`/`Sigma` update, objective.

use rand::Rng;
use thiserror::Error;

use crate::model::{AdjacencyMatrix, CommunityAssignment};
use crate::rng::{seeded_rng, RngHandle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VbError {
    #[error("initial labels leave community {0} empty")]
    EmptyClusterInit(usize),
    #[error("need 1 <= k <= n, got k={k}, n={n}")]
    InvalidCount { k: usize, n: usize },
    #[error("invalid VB configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VbConfig {
    /// `beta` of the scale-factor family.
    pub beta_hyper: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Additive constant `D` in the objective; never affects the updates.
    pub d_const: f64,
}

impl Default for VbConfig {
    fn default() -> Self {
        Self { beta_hyper: 1.0, max_iter: 100, tol: 1e-6, d_const: 0.0 }
    }
}

impl VbConfig {
    pub fn validate(&self) -> Result<(), VbError> {
        if !(self.beta_hyper > 0.0) {
            return Err(VbError::InvalidConfig(format!("beta must be positive, got {}", self.beta_hyper)));
        }
        if self.max_iter == 0 {
            return Err(VbError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(VbError::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VbState {
    pub z: CommunityAssignment,
    /// Community sizes at the last `mu`/`Sigma` update (`n^{[t-1]}` during an iteration).
    pub prev_sizes: Vec<usize>,
    pub a_par: f64,
    pub delta: f64,
    /// `k x k`, row-major.
    pub mu: Vec<f64>,
    /// `k x k`, row-major; `Sigma_cd = 1 / (delta n_c n_d)`.
    pub sigma: Vec<f64>,
    pub objective: f64,
}

impl VbState {
    pub fn k(&self) -> usize {
        self.z.k()
    }

    #[inline]
    pub fn mu(&self, c: usize, d: usize) -> f64 {
        self.mu[c * self.k() + d]
    }
}

fn delta_of(beta: f64, a_par: f64) -> f64 {
    1.0 + (2.0 * beta / a_par).sqrt()
}

/// Ordered-pair edge counts `sum_ij A_ij 1{z_i = c, z_j = d}`.
fn block_edges(z: &CommunityAssignment, a: &AdjacencyMatrix) -> Vec<f64> {
    let k = z.k();
    let mut e = vec![0.0; k * k];
    for (i, j) in a.edges() {
        let (c, d) = (z.label(i), z.label(j));
        e[c * k + d] += 1.0;
        e[d * k + c] += 1.0;
    }
    e
}

fn mu_sigma(z: &CommunityAssignment, a: &AdjacencyMatrix, delta: f64) -> (Vec<f64>, Vec<f64>) {
    let k = z.k();
    let sizes = z.sizes();
    let edges = block_edges(z, a);
    let mut mu = vec![0.0; k * k];
    let mut sigma = vec![0.0; k * k];
    for c in 0..k {
        for d in 0..k {
            let scale = 1.0 / (delta * sizes[c] as f64 * sizes[d] as f64);
            sigma[c * k + d] = scale;
            mu[c * k + d] = scale * edges[c * k + d];
        }
    }
    (mu, sigma)
}

/// Initial state: `a = n^2`, `delta = 1 + sqrt(2 beta / n^2)`, block-average `mu`.
pub fn vb_init(a: &AdjacencyMatrix, z0: CommunityAssignment, config: &VbConfig) -> Result<VbState, VbError> {
    let sizes = z0.sizes();
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(VbError::EmptyClusterInit(empty + 1));
    }
    let n = a.n() as f64;
    let a_par = n * n;
    let delta = delta_of(config.beta_hyper, a_par);
    let (mu, sigma) = mu_sigma(&z0, a, delta);
    Ok(VbState { z: z0, prev_sizes: sizes, a_par, delta, mu, sigma, objective: f64::INFINITY })
}

/// `v_ic` for every `c`, given the labels of all other nodes.
///
/// Entries for a community that only `i` occupies are `-inf` (the
/// `log(1 + 1/0)` term), which pins `i` in place.
pub fn label_scores(state: &VbState, a: &AdjacencyMatrix, labels: &[usize], sizes: &[usize], i: usize) -> Vec<f64> {
    let k = state.k();
    let mut others = sizes.to_vec();
    others[labels[i]] -= 1;
    let mut linked = vec![0.0; k];
    for &j in a.neighbors(i) {
        linked[labels[j as usize]] += 1.0;
    }
    let size_ratio: f64 = (0..k).map(|r| others[r] as f64 / state.prev_sizes[r] as f64).sum();
    (0..k)
        .map(|c| {
            if others[c] == 0 {
                return f64::NEG_INFINITY;
            }
            let log_term = -(k as f64) * (1.0 / others[c] as f64).ln_1p();
            let mut data = 0.0;
            let mut square = 0.0;
            for l in 0..k {
                let m = state.mu(c, l);
                data += linked[l] * m;
                square += others[l] as f64 * m * m;
            }
            let mcc = state.mu(c, c);
            let spread = size_ratio + 1.0 / state.prev_sizes[c] as f64;
            log_term - 2.0 * data + state.delta * (square + 0.5 * mcc * mcc) + 0.5 * spread * spread
        })
        .collect()
}

/// Sets each `z_i`, in `order`, to the argmin of `v_ic`. Moves that would
/// empty a community are rejected. Returns the number of labels changed.
pub fn vb_update_labels(state: &mut VbState, a: &AdjacencyMatrix, order: &[usize]) -> usize {
    let k = state.k();
    if k == 1 {
        return 0;
    }
    let mut labels = state.z.labels().to_vec();
    let mut sizes = state.z.sizes();
    let mut changed = 0;
    for &i in order {
        let scores = label_scores(state, a, &labels, &sizes, i);
        let mut best = 0;
        for c in 1..k {
            if scores[c] < scores[best] {
                best = c;
            }
        }
        let current = labels[i];
        if best != current && sizes[current] > 1 {
            sizes[current] -= 1;
            sizes[best] += 1;
            labels[i] = best;
            changed += 1;
        }
    }
    state.z = CommunityAssignment::new_unchecked(labels, k);
    changed
}

/// `a = sum_ij mu_{z_i z_j}^2 + delta^{-1} (sum_c n_c / n_c^{prev})^2`, then `delta`.
pub fn vb_update_a_delta(state: &mut VbState, config: &VbConfig) {
    let k = state.k();
    let sizes = state.z.sizes();
    let mut squares = 0.0;
    for c in 0..k {
        for d in 0..k {
            let m = state.mu(c, d);
            squares += sizes[c] as f64 * sizes[d] as f64 * m * m;
        }
    }
    let ratio: f64 = (0..k).map(|c| sizes[c] as f64 / state.prev_sizes[c] as f64).sum();
    state.a_par = squares + ratio * ratio / state.delta;
    state.delta = delta_of(config.beta_hyper, state.a_par);
}

pub fn vb_update_mu_sigma(state: &mut VbState, a: &AdjacencyMatrix) {
    let (mu, sigma) = mu_sigma(&state.z, a, state.delta);
    state.mu = mu;
    state.sigma = sigma;
    state.prev_sizes = state.z.sizes();
}

/// `L = k(k+1)/4 log(delta / (4 beta e^2)) + sqrt(a beta / 2)
///      - 1/2 sum_ij A_ij mu_{z_i z_j} + (D + 1)(k(k+1)/2 + n log k)`.
pub fn vb_objective(state: &VbState, a: &AdjacencyMatrix, config: &VbConfig) -> f64 {
    let k = state.k() as f64;
    let n = a.n() as f64;
    let beta = config.beta_hyper;
    let edges = block_edges(&state.z, a);
    let fit: f64 = edges.iter().zip(&state.mu).map(|(e, m)| e * m).sum();
    k * (k + 1.0) / 4.0 * (state.delta / (4.0 * beta * std::f64::consts::E.powi(2))).ln()
        + (state.a_par * beta / 2.0).sqrt()
        - 0.5 * fit
        + (config.d_const + 1.0) * (0.5 * k * (k + 1.0) + n * k.ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VbTraceRow {
    pub t: usize,
    pub objective: f64,
    pub labels_changed: usize,
    /// Seed of the stream that shuffled this iteration's node order.
    pub order_seed: u64,
}

#[derive(Debug, Clone)]
pub struct VbOutput {
    pub assignment: CommunityAssignment,
    pub state: VbState,
    pub trace: Vec<VbTraceRow>,
    pub converged: bool,
    pub iterations: usize,
}

/// Uniform initial labels with every community occupied: `k` distinct
/// random nodes seed one community each, the rest are uniform.
pub fn initial_labels(n: usize, k: usize, rng: &mut RngHandle) -> CommunityAssignment {
    let mut nodes: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        nodes.swap(i, j);
    }
    let mut labels = vec![0; n];
    for (slot, &node) in nodes.iter().enumerate() {
        labels[node] = if slot < k { slot } else { rng.random_range(0..k) };
    }
    CommunityAssignment::new_unchecked(labels, k)
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded_rng(seed, 0);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

/// Iterates until `|L_{t-1} - L_t| <= tol` or `max_iter` iterations.
pub fn run_vb(a: &AdjacencyMatrix, k: usize, config: &VbConfig, mut rng: RngHandle) -> Result<VbOutput, VbError> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(VbError::InvalidCount { k, n });
    }
    config.validate()?;
    let z0 = initial_labels(n, k, &mut rng);
    run_vb_from(a, z0, config, rng)
}

/// As [`run_vb`] from given initial labels.
pub fn run_vb_from(a: &AdjacencyMatrix, z0: CommunityAssignment, config: &VbConfig, mut rng: RngHandle) -> Result<VbOutput, VbError> {
    config.validate()?;
    let mut state = vb_init(a, z0, config)?;
    let mut trace = Vec::new();
    let mut t = 0;
    let mut change = f64::INFINITY;
    while t < config.max_iter && change > config.tol {
        t += 1;
        let order_seed = rng.fork_seed();
        let order = shuffled(a.n(), order_seed);
        let labels_changed = vb_update_labels(&mut state, a, &order);
        vb_update_a_delta(&mut state, config);
        vb_update_mu_sigma(&mut state, a);
        let objective = vb_objective(&state, a, config);
        change = (state.objective - objective).abs();
        state.objective = objective;
        trace.push(VbTraceRow { t, objective, labels_changed, order_seed });
    }
    Ok(VbOutput { assignment: state.z.clone(), converged: change <= config.tol, iterations: t, state, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn cliques() -> AdjacencyMatrix {
        AdjacencyMatrix::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap()
    }

    #[test]
    fn init_delta_for_ten_nodes() {
        let a = AdjacencyMatrix::empty(10);
        let z0 = CommunityAssignment::new((0..10).map(|i| i % 2).collect(), 2).unwrap();
        let s = vb_init(&a, z0, &VbConfig::default()).unwrap();
        assert_eq!(s.a_par, 100.0);
        assert!((s.delta - (1.0 + 0.02f64.sqrt())).abs() < 1e-15);
        assert!((s.delta - 1.141_421).abs() < 1e-6);
        assert!(s.mu.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn init_mu_on_cliques() {
        let z0 = CommunityAssignment::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let s = vb_init(&cliques(), z0, &VbConfig::default()).unwrap();
        // A[cc] = 6 ordered pairs, n_c = 3
        assert!((s.mu(0, 0) - 6.0 / 9.0 / s.delta).abs() < 1e-15);
        assert!((s.mu(1, 1) - 6.0 / 9.0 / s.delta).abs() < 1e-15);
        assert_eq!(s.mu(0, 1), 0.0);
        assert!((s.sigma[0] - 1.0 / (9.0 * s.delta)).abs() < 1e-15);
    }

    #[test]
    fn init_rejects_empty_cluster() {
        let z0 = CommunityAssignment::new(vec![0, 0, 0], 2).unwrap();
        assert_eq!(vb_init(&AdjacencyMatrix::empty(3), z0, &VbConfig::default()), Err(VbError::EmptyClusterInit(2)));
    }

    #[test]
    fn a_update_with_zero_mu() {
        let z0 = CommunityAssignment::new(vec![0, 1, 2, 0, 1, 2], 3).unwrap();
        let mut s = vb_init(&AdjacencyMatrix::empty(6), z0, &VbConfig::default()).unwrap();
        let delta = s.delta;
        vb_update_a_delta(&mut s, &VbConfig::default());
        assert!((s.a_par - 9.0 / delta).abs() < 1e-12);
        assert!((s.delta - (1.0 + (2.0 / s.a_par).sqrt())).abs() < 1e-12);
        assert!(s.delta > 1.0);
    }

    #[test]
    fn bipartite_block_mu() {
        // communities c (nodes 0,1) and d (nodes 2,3,4) fully linked across
        let edges: Vec<(usize, usize)> = (0..2).flat_map(|i| (2..5).map(move |j| (i, j))).collect();
        let a = AdjacencyMatrix::from_edges(5, &edges).unwrap();
        let z = CommunityAssignment::new(vec![0, 0, 1, 1, 1], 2).unwrap();
        let mut s = vb_init(&a, z, &VbConfig::default()).unwrap();
        vb_update_mu_sigma(&mut s, &a);
        // 6 ordered pairs with z_i = c, z_j = d; n_c n_d = 6
        assert!((s.mu(0, 1) - 1.0 / s.delta).abs() < 1e-15);
        assert_eq!(s.mu(0, 1), s.mu(1, 0));
        assert!(s.sigma.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn single_community_labels_fixed() {
        let z0 = CommunityAssignment::new(vec![0; 6], 1).unwrap();
        let mut s = vb_init(&cliques(), z0.clone(), &VbConfig::default()).unwrap();
        assert_eq!(vb_update_labels(&mut s, &cliques(), &[0, 1, 2, 3, 4, 5]), 0);
        assert_eq!(s.z, z0);
    }

    #[test]
    fn objective_without_data() {
        let cfg = VbConfig::default();
        let z0 = CommunityAssignment::new(vec![0, 1, 0, 1], 2).unwrap();
        let s = vb_init(&AdjacencyMatrix::empty(4), z0, &cfg).unwrap();
        let k = 2.0f64;
        let expected = k * (k + 1.0) / 4.0 * (s.delta / (4.0 * std::f64::consts::E.powi(2))).ln()
            + (s.a_par / 2.0).sqrt()
            + (0.5 * k * (k + 1.0) + 4.0 * k.ln());
        assert!((vb_objective(&s, &AdjacencyMatrix::empty(4), &cfg) - expected).abs() < 1e-12);
        let shifted = VbConfig { d_const: 2.5, ..cfg };
        let diff = vb_objective(&s, &AdjacencyMatrix::empty(4), &shifted) - vb_objective(&s, &AdjacencyMatrix::empty(4), &cfg);
        assert!((diff - 2.5 * (0.5 * k * (k + 1.0) + 4.0 * k.ln())).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_trace() {
        let x = run_vb(&cliques(), 2, &VbConfig::default(), seeded_rng(4, 0)).unwrap();
        let y = run_vb(&cliques(), 2, &VbConfig::default(), seeded_rng(4, 0)).unwrap();
        assert_eq!(x.trace, y.trace);
        assert_eq!(x.assignment, y.assignment);
    }

    #[test]
    fn initial_labels_cover_every_community() {
        for seed in 0..50 {
            let z = initial_labels(12, 5, &mut seeded_rng(seed, 0));
            assert!(z.sizes().iter().all(|&s| s > 0));
        }
        assert!(initial_labels(3, 3, &mut seeded_rng(0, 0)).sizes().iter().all(|&s| s == 1));
    }
}
