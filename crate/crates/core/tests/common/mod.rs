//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;

use sbmlab_core::metrics::same_partition;
use sbmlab_core::model::{AdjacencyMatrix, CommunityAssignment};
use sbmlab_core::numkit::DenseMatrix;
use sbmlab_core::rng::seeded_rng;
use sbmlab_core::gibbs::{GibbsChain, GibbsConfig};
use sbmlab_core::vb::{label_scores, vb_objective, vb_update_a_delta, vb_update_mu_sigma, VbConfig, VbState};
use sbmlab_core::RngHandle;

pub fn two_cliques(size: usize) -> (AdjacencyMatrix, CommunityAssignment) {
    let mut edges = Vec::new();
    for base in [0, size] {
        for i in 0..size {
            for j in i + 1..size {
                edges.push((base + i, base + j));
            }
        }
    }
    let truth = CommunityAssignment::new((0..2 * size).map(|i| i / size).collect(), 2).unwrap();
    (AdjacencyMatrix::from_edges(2 * size, &edges).unwrap(), truth)
}

pub fn random_graph(n: usize, p: f64, rng: &mut RngHandle) -> AdjacencyMatrix {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    AdjacencyMatrix::from_edges(n, &edges).unwrap()
}

pub fn a_ij(a: &AdjacencyMatrix, i: usize, j: usize) -> f64 {
    if a.get(i, j) {
        1.0
    } else {
        0.0
    }
}

pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `ln B(x, y)` for positive integer shapes.

pub fn ln_beta_int(x: usize, y: usize) -> f64 {
    ln_factorial(x - 1) + ln_factorial(y - 1) - ln_factorial(x + y - 1)
}

/// Exact posterior over labelings with `pi ~ Dir(1, 1)` and `B_rc ~ Beta(2, 2)`

/// integrated out. Each unordered pair enters the ordered-pair likelihood

/// twice, so every block exponent counts unordered pairs times two.

pub fn exact_label_posterior(a: &AdjacencyMatrix) -> Vec<(Vec<usize>, f64)> {
    let n = a.n();
    let mut weights = Vec::new();
    for code in 0..(1usize << n) {
        let z: Vec<usize> = (0..n).map(|i| (code >> i) & 1).collect();
        let sizes = [z.iter().filter(|&&l| l == 0).count(), z.iter().filter(|&&l| l == 1).count()];
        let mut logw = ln_factorial(sizes[0]) + ln_factorial(sizes[1]);
        let mut on = [[0usize; 2]; 2];
        let mut total = [[0usize; 2]; 2];
        for i in 0..n {
            for j in i + 1..n {
                let (r, c) = (z[i].min(z[j]), z[i].max(z[j]));
                total[r][c] += 1;
                if a.get(i, j) {
                    on[r][c] += 1;
                }
            }
        }
        for (r, c) in [(0, 0), (0, 1), (1, 1)] {
            let s = 2 * on[r][c];
            let f = 2 * (total[r][c] - on[r][c]);
            logw += ln_beta_int(2 + s, 2 + f) - ln_beta_int(2, 2);
        }
        weights.push((z, logw));
    }
    let top = weights.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = weights.iter().map(|w| (w.1 - top).exp()).sum();
    weights.into_iter().map(|(z, w)| (z, (w - top).exp() / norm)).collect()
}

/// Hubert-Arabie ARI from the four pair classes.

pub fn pair_counting_ari(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len();
    let (mut both, mut only_x, mut only_y, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_x += 1.0,
                (false, true) => only_y += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_x) * (only_x + neither) + (both + only_y) * (only_y + neither);
    if denom == 0.0 {
        return if same_partition(x, y) { 1.0 } else { 0.0 };
    }
    2.0 * (both * neither - only_x * only_y) / denom
}

pub fn all_labelings(n: usize, classes: usize) -> Vec<Vec<usize>> {
    let total = classes.pow(n as u32);
    (0..total)
        .map(|mut code| {
            (0..n)
                .map(|_| {
                    let l = code % classes;
                    code /= classes;
                    l
                })
                .collect()
        })
        .collect()
}

pub fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = seeded_rng(seed, 0);
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn residual(m: &DenseMatrix, v: &[f64], lambda: f64) -> f64 {
    (0..m.rows())
        .map(|i| {
            let mv: f64 = m.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
            (mv - lambda * v[i]).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// A 6-node, 3-community state with every field drawn at random.

pub fn random_state(rng: &mut RngHandle) -> (AdjacencyMatrix, VbState) {
    let a = random_graph(6, 0.5, rng);
    let mut labels = vec![0, 1, 2];
    labels.extend((0..3).map(|_| rng.random_range(0..3)));
    for i in (1..6).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let z = CommunityAssignment::new(labels, 3).unwrap();
    let prev_sizes = (0..3).map(|_| rng.random_range(1..5)).collect();
    let mu = (0..9).map(|_| rng.random_range(-0.5..1.0)).collect();
    let sigma = (0..9).map(|_| rng.random_range(0.01..1.0)).collect();
    let state = VbState {
        z,
        prev_sizes,
        a_par: rng.random_range(1.0..50.0),
        delta: rng.random_range(1.01..2.0),
        mu,
        sigma,
        objective: 0.0,
    };
    (a, state)
}

/// `v_ic` written out node by node.

pub fn brute_v(state: &VbState, a: &AdjacencyMatrix, i: usize, c: usize) -> f64 {
    let k = state.k();
    let n = a.n();
    let z = state.z.labels();
    let mu = |p: usize, q: usize| state.mu[p * k + q];
    let n_other = |r: usize| (0..n).filter(|&j| j != i && z[j] == r).count() as f64;
    let mut v = -(k as f64) * (1.0 + 1.0 / n_other(c)).ln();
    for j in (0..n).filter(|&j| j != i) {
        v -= 2.0 * a_ij(a, i, j) * mu(c, z[j]);
    }
    let squares: f64 = (0..n).filter(|&j| j != i).map(|j| mu(c, z[j]).powi(2)).sum();
    v += state.delta * (squares + 0.5 * mu(c, c).powi(2));
    let ratio: f64 = (0..k).map(|r| n_other(r) / state.prev_sizes[r] as f64).sum::<f64>() + 1.0 / state.prev_sizes[c] as f64;
    v + 0.5 * ratio * ratio
}

pub fn sizes(z: &[usize], k: usize) -> Vec<f64> {
    (0..k).map(|c| z.iter().filter(|&&l| l == c).count() as f64).collect()
}

pub fn brute_a_delta(state: &VbState, beta: f64) -> (f64, f64) {
    let k = state.k();
    let z = state.z.labels();
    let n = z.len();
    let mut a_par = 0.0;
    for i in 0..n {
        for j in 0..n {
            a_par += state.mu[z[i] * k + z[j]].powi(2);
        }
    }
    let now = sizes(z, k);
    let ratio: f64 = (0..k).map(|c| now[c] / state.prev_sizes[c] as f64).sum();
    a_par += ratio * ratio / state.delta;
    (a_par, 1.0 + (2.0 * beta / a_par).sqrt())
}

pub fn brute_mu_sigma(state: &VbState, a: &AdjacencyMatrix) -> (Vec<f64>, Vec<f64>) {
    let k = state.k();
    let z = state.z.labels();
    let n = z.len();
    let s = sizes(z, k);
    let mut mu = vec![0.0; k * k];
    let mut sigma = vec![0.0; k * k];
    for c in 0..k {
        for d in 0..k {
            let mut count = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if z[i] == c && z[j] == d {
                        count += a_ij(a, i, j);
                    }
                }
            }
            sigma[c * k + d] = 1.0 / (state.delta * s[c] * s[d]);
            mu[c * k + d] = count / (state.delta * s[c] * s[d]);
        }
    }
    (mu, sigma)
}

pub fn brute_objective(state: &VbState, a: &AdjacencyMatrix, beta: f64, d: f64) -> f64 {
    let k = state.k() as f64;
    let z = state.z.labels();
    let n = z.len();
    let mut fit = 0.0;
    for i in 0..n {
        for j in 0..n {
            fit += a_ij(a, i, j) * state.mu[z[i] * state.k() + z[j]];
        }
    }
    let e2 = std::f64::consts::E * std::f64::consts::E;
    (k * (k + 1.0) / 4.0) * (state.delta / (4.0 * beta * e2)).ln() + (state.a_par * beta / 2.0).sqrt() - 0.5 * fit
        + (d + 1.0) * (0.5 * k * (k + 1.0) + n as f64 * k.ln())
}

pub fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-10 * x.abs().max(1.0)
}
/// Runs the VB updates on random 6-node states and compares each against
/// the node-by-node transcription at a relative tolerance of 1e-10.
pub fn check_vb_transcription(rounds: usize, seed: u64) -> Result<(), String> {
    let mut rng = seeded_rng(seed, 0);
    for round in 0..rounds {
        let (a, state) = random_state(&mut rng);
        let labels = state.z.labels().to_vec();
        let counts = state.z.sizes();
        for i in 0..6 {
            let scores = label_scores(&state, &a, &labels, &counts, i);
            for c in 0..3 {
                let want = brute_v(&state, &a, i, c);
                let ok = if want.is_infinite() { scores[c] == want } else { close(scores[c], want) };
                if !ok {
                    return Err(format!("round {round}, v[{i}][{c}]: {} vs {want}", scores[c]));
                }
            }
        }

        let beta = rng.random_range(0.2..3.0);
        let config = VbConfig { beta_hyper: beta, d_const: rng.random_range(-1.0..2.0), ..VbConfig::default() };
        let (a_want, delta_want) = brute_a_delta(&state, beta);
        let mut s = state.clone();
        vb_update_a_delta(&mut s, &config);
        if !(close(s.a_par, a_want) && close(s.delta, delta_want)) {
            return Err(format!("round {round}: a/delta"));
        }

        let (mu_want, sigma_want) = brute_mu_sigma(&s, &a);
        vb_update_mu_sigma(&mut s, &a);
        if !s.mu.iter().zip(&mu_want).all(|(x, y)| close(*x, *y)) || !s.sigma.iter().zip(&sigma_want).all(|(x, y)| close(*x, *y)) {
            return Err(format!("round {round}: mu/sigma"));
        }

        let l = vb_objective(&s, &a, &config);
        let want = brute_objective(&s, &a, beta, config.d_const);
        if !close(l, want) {
            return Err(format!("round {round}: objective {l} vs {want}"));
        }
    }
    Ok(())
}

/// The five-node toy graph used for the enumeration check.
pub fn toy_graph() -> AdjacencyMatrix {
    AdjacencyMatrix::from_edges(5, &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]).unwrap()
}

/// Runs a two-community chain on the toy graph and returns the total
/// variation distance over labelings and the largest co-assignment gap,
/// both against exact enumeration.
pub fn toy_chain_distances(seed: u64, samples: usize) -> (f64, f64) {
    let a = toy_graph();
    let exact = exact_label_posterior(&a);
    let burn_in = 1000;
    let config = GibbsConfig { n_iter: burn_in + samples, burn_in, ..GibbsConfig::default() };
    let mut chain = GibbsChain::new(&a, 2, config, seeded_rng(seed, 0)).unwrap();
    for _ in 0..burn_in {
        chain.sweep();
    }
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..samples {
        chain.sweep();
        *counts.entry(chain.state().z.labels().to_vec()).or_default() += 1;
    }
    let freq = |c: usize| c as f64 / samples as f64;
    let tv = 0.5 * exact.iter().map(|(z, p)| (freq(counts.get(z).copied().unwrap_or(0)) - p).abs()).sum::<f64>();
    let mut gap: f64 = 0.0;
    for i in 0..5 {
        for j in i + 1..5 {
            let want: f64 = exact.iter().filter(|(z, _)| z[i] == z[j]).map(|(_, p)| p).sum();
            let got = freq(counts.iter().filter(|(z, _)| z[i] == z[j]).map(|(_, &c)| c).sum());
            gap = gap.max((got - want).abs());
        }
    }
    (tv, gap)
}
