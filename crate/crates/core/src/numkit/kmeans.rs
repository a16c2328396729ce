//! Lloyd's K-means with k-means++ seeding and best-of-`n_init` restarts.

use rand::Rng;

use super::{squared_distance, DenseMatrix};
use crate::model::CommunityAssignment;
use crate::rng::{seeded_rng, RngHandle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub n_init: usize,
    pub max_iter: usize,
    /// Relative WCSS change that stops Lloyd iterations.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { n_init: 10, max_iter: 300, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: CommunityAssignment,
    /// `k x d` cluster means.
    pub centers: DenseMatrix,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    pub iterations: usize,
    /// WCSS after each assignment step of the winning restart.
    pub wcss_trace: Vec<f64>,
}

pub fn kmeans(points: &DenseMatrix, k: usize, rng: &mut RngHandle) -> KMeansResult {
    kmeans_with(points, k, &KMeansConfig::default(), rng)
}

/// Runs `config.n_init` restarts on independent streams and keeps the
/// lowest WCSS, ties going to the earliest restart.
///
/// Panics if `k == 0` or there are fewer points than clusters.
pub fn kmeans_with(points: &DenseMatrix, k: usize, config: &KMeansConfig, rng: &mut RngHandle) -> KMeansResult {
    assert!(k >= 1 && points.rows() >= k, "kmeans needs n >= k >= 1");
    let base = rng.fork_seed();
    let mut best: Option<KMeansResult> = None;
    for restart in 0..config.n_init.max(1) {
        let mut restart_rng = seeded_rng(base, restart as u64);
        let result = lloyd(points, k, config, &mut restart_rng);
        if best.as_ref().is_none_or(|b| result.wcss < b.wcss) {
            best = Some(result);
        }
    }
    best.unwrap()
}

fn plus_plus_seeds(points: &DenseMatrix, k: usize, rng: &mut RngHandle) -> DenseMatrix {
    let n = points.rows();
    let mut centers = DenseMatrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| squared_distance(points.row(i), centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in closest.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), centers.row(c)));
        }
    }
    centers
}

fn assign(points: &DenseMatrix, centers: &DenseMatrix, labels: &mut [usize], dist: &mut [f64]) -> (f64, bool) {
    let mut changed = false;
    let mut wcss = 0.0;
    for i in 0..points.rows() {
        let p = points.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centers.rows() {
            let d = squared_distance(p, centers.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if labels[i] != best {
            changed = true;
            labels[i] = best;
        }
        dist[i] = best_d;
        wcss += best_d;
    }
    (wcss, changed)
}

fn means(points: &DenseMatrix, labels: &[usize], k: usize) -> (DenseMatrix, Vec<usize>) {
    let mut centers = DenseMatrix::zeros(k, points.cols());
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (c, &x) in centers.row_mut(l).iter_mut().zip(points.row(i)) {
            *c += x;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            centers.row_mut(c).iter_mut().for_each(|x| *x /= count as f64);
        }
    }
    (centers, counts)
}

fn lloyd(points: &DenseMatrix, k: usize, config: &KMeansConfig, rng: &mut RngHandle) -> KMeansResult {
    let n = points.rows();
    let mut centers = plus_plus_seeds(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut previous = f64::INFINITY;
    loop {
        let (wcss, changed) = assign(points, &centers, &mut labels, &mut dist);
        trace.push(wcss);
        iterations += 1;
        let stalled = previous.is_finite() && (previous - wcss).abs() <= config.tol * previous.max(f64::MIN_POSITIVE);
        if !changed || stalled || iterations >= config.max_iter {
            break;
        }
        previous = wcss;
        let (mut next, counts) = means(points, &labels, k);
        // Empty clusters restart on the point currently farthest from its center.
        let mut taken = vec![false; n];
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = (0..n)
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .unwrap();
            taken[far] = true;
            next.row_mut(c).copy_from_slice(points.row(far));
        }
        centers = next;
    }

    // Guarantee nonempty clusters (duplicate points can tie every center).
    let mut sizes = vec![0usize; k];
    labels.iter().for_each(|&l| sizes[l] += 1);
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..n)
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .expect("n >= k leaves a donor");
        sizes[labels[donor]] -= 1;
        labels[donor] = c;
        sizes[c] += 1;
    }
    let (centers, _) = means(points, &labels, k);
    let wcss = (0..n).map(|i| squared_distance(points.row(i), centers.row(labels[i]))).sum();
    KMeansResult {
        assignment: CommunityAssignment::new_unchecked(labels, k),
        centers,
        wcss,
        iterations,
        wcss_trace: trace,
    }
}
