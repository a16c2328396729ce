//! Variational EM for the blockmodel with Bernoulli or Gaussian emissions.
//!
//! Responsibilities `tau` are updated by sequential fixed-point sweeps that
//! maximize `J + entropy` one row at a time; the M step maximizes `J` in
//! closed form. Every pairwise sum is reduced to the block moments
//! `N = tau' A tau` and `D_ql = S_q S_l - sum_i tau_iq tau_il`, so a cycle
//! costs `O(|E| K + N K^2)`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::model::{AdjacencyMatrix, CommunityAssignment, CommunityProportions};
use crate::rng::RngHandle;
use crate::special::softmax_in_place;
use crate::spectral::{spectral_cluster, SpectralError, SpectralKind, SpectralVariant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VemError {
    #[error("need 1 <= k <= n, got k={k}, n={n}")]
    InvalidCount { k: usize, n: usize },
    #[error("invalid VEM configuration: {0}")]
    InvalidConfig(String),
    #[error("spectral initialization failed: {0}")]
    Init(#[from] SpectralError),
    #[error("responsibilities must be {n}x{k}, got {len} entries")]
    TauShape { n: usize, k: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VemModel {
    Bernoulli,
    Gaussian,
}

impl std::str::FromStr for VemModel {
    type Err = VemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" => Ok(Self::Bernoulli),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(VemError::InvalidConfig(format!("unknown emission model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VemConfig {
    pub model: VemModel,
    pub tol: f64,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max: usize,
    /// Mass moved off the spectral label at initialization.
    pub eta: f64,
    pub eps_p: f64,
    pub sigma2_min: f64,
}

impl VemConfig {
    pub fn new(model: VemModel) -> Self {
        Self { model, tol: 1e-6, max_iter: 100, inner_tol: 1e-8, inner_max: 50, eta: 0.1, eps_p: 1e-6, sigma2_min: 1e-8 }
    }

    pub fn validate(&self) -> Result<(), VemError> {
        let bad = |m: String| Err(VemError::InvalidConfig(m));
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_iter == 0 || self.inner_max == 0 {
            return bad("iteration limits must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 1), got {}", self.eta));
        }
        if !(self.eps_p > 0.0 && self.eps_p < 0.5) {
            return bad(format!("eps_p must lie in (0, 0.5), got {}", self.eps_p));
        }
        if !(self.sigma2_min > 0.0) {
            return bad(format!("sigma2_min must be positive, got {}", self.sigma2_min));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    /// Edge probabilities, `k x k` row-major, symmetric.
    Bernoulli { pi: Vec<f64> },
    /// Block means, `k x k` row-major, symmetric, with a shared variance.
    Gaussian { mu: Vec<f64>, sigma2: f64 },
}

impl Emission {
    /// Per-block coefficients `(c1, c0)` with `log f_ql(x) = x c1_ql + c0_ql`
    /// for `x` in {0, 1}.
    fn linear_form(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Emission::Bernoulli { pi } => {
                let c0: Vec<f64> = pi.iter().map(|p| (-p).ln_1p()).collect();
                let c1 = pi.iter().zip(&c0).map(|(p, z)| p.ln() - z).collect();
                (c1, c0)
            }
            Emission::Gaussian { mu, sigma2 } => {
                let norm = -0.5 * (2.0 * PI * sigma2).ln();
                let c0: Vec<f64> = mu.iter().map(|m| norm - m * m / (2.0 * sigma2)).collect();
                // (1 - m)^2 - m^2 = 1 - 2m
                let c1 = mu.iter().map(|m| -(1.0 - 2.0 * m) / (2.0 * sigma2)).collect();
                (c1, c0)
            }
        }
    }

    /// `log f_ql(x)` for a real `x`.
    pub fn log_density(&self, k: usize, q: usize, l: usize, x: f64) -> f64 {
        match self {
            Emission::Bernoulli { pi } => {
                let p = pi[q * k + l];
                x * p.ln() + (1.0 - x) * (-p).ln_1p()
            }
            Emission::Gaussian { mu, sigma2 } => {
                let r = x - mu[q * k + l];
                -0.5 * (2.0 * PI * sigma2).ln() - r * r / (2.0 * sigma2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VemState {
    pub k: usize,
    /// `n x k` row-major.
    pub tau: Vec<f64>,
    pub alpha: Vec<f64>,
    pub emission: Emission,
    pub objective: f64,
}

impl VemState {
    pub fn n(&self) -> usize {
        self.tau.len() / self.k
    }

    pub fn tau_row(&self, i: usize) -> &[f64] {
        &self.tau[i * self.k..(i + 1) * self.k]
    }

    pub fn proportions(&self) -> Result<CommunityProportions, crate::model::ModelError> {
        CommunityProportions::new(self.alpha.clone())
    }

    /// Hard labels by row argmax; ties go to the lowest index.
    pub fn hard_labels(&self) -> CommunityAssignment {
        let labels = (0..self.n())
            .map(|i| {
                let row = self.tau_row(i);
                (1..self.k).fold(0, |best, q| if row[q] > row[best] { q } else { best })
            })
            .collect();
        CommunityAssignment::new_unchecked(labels, self.k)
    }
}

/// `(A tau)_il = sum_{j in N(i)} tau_jl`.
fn adjacency_times(tau: &[f64], k: usize, a: &AdjacencyMatrix) -> Vec<f64> {
    let mut out = vec![0.0; tau.len()];
    for i in 0..a.n() {
        let row = &mut out[i * k..(i + 1) * k];
        for &j in a.neighbors(i) {
            let j = j as usize;
            for (o, t) in row.iter_mut().zip(&tau[j * k..(j + 1) * k]) {
                *o += t;
            }
        }
    }
    out
}

/// Weighted block moments over ordered pairs `i != j`:
/// `edges_ql = sum tau_iq tau_jl A_ij` and `pairs_ql = sum tau_iq tau_jl`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMoments {
    pub k: usize,
    pub edges: Vec<f64>,
    pub pairs: Vec<f64>,
}

pub fn block_moments(tau: &[f64], k: usize, a: &AdjacencyMatrix) -> BlockMoments {
    let n = a.n();
    let at = adjacency_times(tau, k, a);
    let mut edges = vec![0.0; k * k];
    let mut sums = vec![0.0; k];
    let mut self_pairs = vec![0.0; k * k];
    for i in 0..n {
        let t = &tau[i * k..(i + 1) * k];
        let ati = &at[i * k..(i + 1) * k];
        for q in 0..k {
            sums[q] += t[q];
            for l in 0..k {
                edges[q * k + l] += t[q] * ati[l];
                self_pairs[q * k + l] += t[q] * t[l];
            }
        }
    }
    let pairs = (0..k * k).map(|ql| sums[ql / k] * sums[ql % k] - self_pairs[ql]).collect();
    BlockMoments { k, edges, pairs }
}

fn symmetrize(m: &mut [f64], k: usize) {
    for q in 0..k {
        for l in q + 1..k {
            let avg = 0.5 * (m[q * k + l] + m[l * k + q]);
            m[q * k + l] = avg;
            m[l * k + q] = avg;
        }
    }
}

fn column_means(tau: &[f64], k: usize) -> Vec<f64> {
    let n = tau.len() / k;
    let mut alpha = vec![0.0; k];
    for row in tau.chunks_exact(k) {
        for (a, t) in alpha.iter_mut().zip(row) {
            *a += t;
        }
    }
    alpha.iter_mut().for_each(|a| *a /= n as f64);
    alpha
}

/// Raw weighted means `edges / pairs`; `None` where the weight is zero.
pub fn block_means(m: &BlockMoments) -> Vec<Option<f64>> {
    m.edges.iter().zip(&m.pairs).map(|(e, p)| if *p > 0.0 { Some(e / p) } else { None }).collect()
}

/// Returns `(alpha, pi)`; zero-weight blocks get 0.5 before clamping.
pub fn vem_m_step_bernoulli(tau: &[f64], k: usize, a: &AdjacencyMatrix, eps_p: f64) -> (Vec<f64>, Emission) {
    let moments = block_moments(tau, k, a);
    let mut pi: Vec<f64> = block_means(&moments).into_iter().map(|m| m.unwrap_or(0.5)).collect();
    symmetrize(&mut pi, k);
    pi.iter_mut().for_each(|p| *p = p.clamp(eps_p, 1.0 - eps_p));
    (column_means(tau, k), Emission::Bernoulli { pi })
}

/// Returns `(alpha, (mu, sigma2))`; zero-weight blocks take the overall mean.
pub fn vem_m_step_gaussian(tau: &[f64], k: usize, a: &AdjacencyMatrix, sigma2_min: f64) -> (Vec<f64>, Emission) {
    let moments = block_moments(tau, k, a);
    let total_pairs: f64 = moments.pairs.iter().sum();
    let overall = if total_pairs > 0.0 { moments.edges.iter().sum::<f64>() / total_pairs } else { 0.0 };
    let mut mu: Vec<f64> = block_means(&moments).into_iter().map(|m| m.unwrap_or(overall)).collect();
    symmetrize(&mut mu, k);
    // A is binary, so sum w (A - m)^2 = edges (1 - 2m) + pairs m^2.
    let rss: f64 = (0..k * k)
        .map(|ql| moments.edges[ql] * (1.0 - 2.0 * mu[ql]) + moments.pairs[ql] * mu[ql] * mu[ql])
        .sum();
    let sigma2 = if total_pairs > 0.0 { (rss / total_pairs).max(sigma2_min) } else { sigma2_min };
    (column_means(tau, k), Emission::Gaussian { mu, sigma2 })
}

pub fn vem_m_step(tau: &[f64], k: usize, a: &AdjacencyMatrix, config: &VemConfig) -> (Vec<f64>, Emission) {
    match config.model {
        VemModel::Bernoulli => vem_m_step_bernoulli(tau, k, a, config.eps_p),
        VemModel::Gaussian => vem_m_step_gaussian(tau, k, a, config.sigma2_min),
    }
}

fn x_log_y(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `J = sum_iq tau_iq log alpha_q + sum_{i != j} sum_ql tau_iq tau_jl log f_ql(A_ij)`.
pub fn vem_objective(state: &VemState, a: &AdjacencyMatrix) -> f64 {
    let k = state.k;
    let prior: f64 = state.tau.chunks_exact(k).flat_map(|row| row.iter().zip(&state.alpha)).map(|(&t, &al)| x_log_y(t, al)).sum();
    let moments = block_moments(&state.tau, k, a);
    let (c1, c0) = state.emission.linear_form();
    let data: f64 = (0..k * k).map(|ql| moments.edges[ql] * c1[ql] + moments.pairs[ql] * c0[ql]).sum();
    prior + data
}

/// `-sum tau log tau`.
pub fn tau_entropy(tau: &[f64]) -> f64 {
    -tau.iter().map(|&t| x_log_y(t, t)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EStepReport {
    pub sweeps: usize,
    /// Largest row change in the final sweep.
    pub last_change: f64,
}

/// Sequential sweeps of `tau_iq ∝ alpha_q exp(sum_{j != i} sum_l tau_jl
/// [log f_ql(A_ij) + log f_lq(A_ji)])` until the largest entry change in a
/// sweep is below `inner_tol`.
pub fn vem_e_step(state: &mut VemState, a: &AdjacencyMatrix, inner_tol: f64, inner_max: usize) -> EStepReport {
    let k = state.k;
    let n = state.n();
    let (c1, c0) = state.emission.linear_form();
    let log_alpha: Vec<f64> = state.alpha.iter().map(|x| x.ln()).collect();
    let mut sums = column_means(&state.tau, k);
    sums.iter_mut().for_each(|s| *s *= n as f64);
    let mut linked = vec![0.0; k];
    let mut row = vec![0.0; k];
    let mut report = EStepReport { sweeps: 0, last_change: f64::INFINITY };
    while report.sweeps < inner_max && report.last_change >= inner_tol {
        let mut change = 0.0f64;
        for i in 0..n {
            linked.iter_mut().for_each(|x| *x = 0.0);
            for &j in a.neighbors(i) {
                let j = j as usize;
                for (x, t) in linked.iter_mut().zip(&state.tau[j * k..(j + 1) * k]) {
                    *x += t;
                }
            }
            let old = &state.tau[i * k..(i + 1) * k];
            for q in 0..k {
                let mut e = 0.0;
                for l in 0..k {
                    e += linked[l] * c1[q * k + l] + (sums[l] - old[l]) * c0[q * k + l];
                }
                // emissions are symmetric, so both orientations contribute equally
                row[q] = log_alpha[q] + 2.0 * e;
            }
            softmax_in_place(&mut row);
            let old = &mut state.tau[i * k..(i + 1) * k];
            for q in 0..k {
                change = change.max((row[q] - old[q]).abs());
                sums[q] += row[q] - old[q];
                old[q] = row[q];
            }
        }
        report.sweeps += 1;
        report.last_change = change;
    }
    report
}

/// `(1 - eta)` on the given label, `eta / (k - 1)` elsewhere.
pub fn soften_labels(z: &CommunityAssignment, eta: f64) -> Vec<f64> {
    let k = z.k();
    if k == 1 {
        return vec![1.0; z.len()];
    }
    let off = eta / (k - 1) as f64;
    let mut tau = vec![off; z.len() * k];
    for (i, &l) in z.labels().iter().enumerate() {
        tau[i * k + l] = 1.0 - eta;
    }
    tau
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VemTraceRow {
    pub cycle: usize,
    pub objective: f64,
    pub entropy: f64,
    pub max_tau_change: f64,
    pub e_sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct VemOutput {
    pub assignment: CommunityAssignment,
    /// The iterate with the largest `J`.
    pub state: VemState,
    pub trace: Vec<VemTraceRow>,
    pub converged: bool,
    pub iterations: usize,
}

/// Builds a state from responsibilities by running one M step.
pub fn vem_state_from_tau(tau: Vec<f64>, k: usize, a: &AdjacencyMatrix, config: &VemConfig) -> Result<VemState, VemError> {
    let n = a.n();
    if tau.len() != n * k {
        return Err(VemError::TauShape { n, k, len: tau.len() });
    }
    let (alpha, emission) = vem_m_step(&tau, k, a, config);
    let mut state = VemState { k, tau, alpha, emission, objective: 0.0 };
    state.objective = vem_objective(&state, a);
    Ok(state)
}

/// Spectral-initialized VEM.
pub fn run_vem(a: &AdjacencyMatrix, k: usize, config: &VemConfig, mut rng: RngHandle) -> Result<VemOutput, VemError> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(VemError::InvalidCount { k, n });
    }
    config.validate()?;
    let init = spectral_cluster(a, k, &SpectralVariant::new(SpectralKind::Vanilla), &mut rng)?;
    run_vem_from(a, soften_labels(&init, config.eta), k, config)
}

/// Alternates E and M steps from the given responsibilities until
/// `|Delta J| <= tol` or `max_iter` cycles.
pub fn run_vem_from(a: &AdjacencyMatrix, tau: Vec<f64>, k: usize, config: &VemConfig) -> Result<VemOutput, VemError> {
    config.validate()?;
    let mut state = vem_state_from_tau(tau, k, a, config)?;
    let mut best = state.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut cycle = 0;
    while cycle < config.max_iter {
        cycle += 1;
        let before = state.tau.clone();
        let e = vem_e_step(&mut state, a, config.inner_tol, config.inner_max);
        let (alpha, emission) = vem_m_step(&state.tau, k, a, config);
        state.alpha = alpha;
        state.emission = emission;
        let previous = state.objective;
        state.objective = vem_objective(&state, a);
        let max_tau_change = before.iter().zip(&state.tau).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        trace.push(VemTraceRow {
            cycle,
            objective: state.objective,
            entropy: tau_entropy(&state.tau),
            max_tau_change,
            e_sweeps: e.sweeps,
        });
        if state.objective > best.objective {
            best = state.clone();
        }
        if (state.objective - previous).abs() <= config.tol {
            converged = true;
            break;
        }
    }
    Ok(VemOutput { assignment: best.hard_labels(), state: best, trace, converged, iterations: cycle })
}
