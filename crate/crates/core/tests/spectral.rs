use sbmlab_core::generator::{assign_communities, build_kernel, sample_adjacency};
use sbmlab_core::metrics::ari;
use sbmlab_core::model::{AdjacencyMatrix, CommunityAssignment, CommunityProportions};
use sbmlab_core::numkit::DenseMatrix;
use sbmlab_core::rng::seeded_rng;
use sbmlab_core::spectral::{
    eigen_embedding, embed, embed_score_matrix, l2_normalize_rows, score_ratios, spectral_cluster, SpectralKind,
    SpectralVariant,
};

const KINDS: [SpectralKind; 4] = [SpectralKind::Vanilla, SpectralKind::Score, SpectralKind::L2Norm, SpectralKind::Regularized];

fn planted(n: usize, k: usize, rho: f64, seed: u64) -> (AdjacencyMatrix, CommunityAssignment) {
    let truth = assign_communities(n, &CommunityProportions::uniform(k), &mut seeded_rng(seed, 1));
    let a = sample_adjacency(&truth, &build_kernel(k, rho).unwrap(), &mut seeded_rng(seed, 2)).unwrap();
    (a, truth)
}

fn distances(m: &DenseMatrix) -> Vec<f64> {
    let n = m.rows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(m.row(i).iter().zip(m.row(j)).map(|(x, y)| (x - y) * (x - y)).sum());
        }
    }
    out
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn planted_two_blocks_recovered_by_every_variant() {
    for kind in KINDS {
        for seed in 0..10 {
            let (a, truth) = planted(200, 2, 0.3, seed);
            let z = spectral_cluster(&a, 2, &SpectralVariant::new(kind), &mut seeded_rng(seed, 7)).unwrap();
            let score = ari(&truth, &z).unwrap();
            assert!(score > 0.9, "{kind:?} seed {seed}: ARI {score}");
        }
    }
}

#[test]
fn disjoint_cliques_are_recovered_exactly() {
    let mut edges = Vec::new();
    for base in [0, 5, 10] {
        for i in 0..5 {
            for j in i + 1..5 {
                edges.push((base + i, base + j));
            }
        }
    }
    let a = AdjacencyMatrix::from_edges(15, &edges).unwrap();
    let truth = CommunityAssignment::new((0..15).map(|i| i / 5).collect(), 3).unwrap();
    for kind in [SpectralKind::Vanilla, SpectralKind::L2Norm, SpectralKind::Regularized] {
        let z = spectral_cluster(&a, 3, &SpectralVariant::new(kind), &mut seeded_rng(1, 0)).unwrap();
        assert_eq!(ari(&truth, &z).unwrap(), 1.0, "{kind:?}");
    }
}

/// `Theta Z B Z' Theta` with a strictly positive `B`, so the leading
/// eigenvector is positive and the SCORE ratios are finite.
fn dcbm_expectation(sizes: &[usize], b: &[f64], theta: &[f64]) -> (DenseMatrix, Vec<usize>) {
    let k = sizes.len();
    let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let n = labels.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = theta[i] * theta[j] * b[labels[i] * k + labels[j]];
        }
    }
    (DenseMatrix::from_vec(n, n, data), labels)
}

#[test]
fn score_cancels_multiplicative_degree_heterogeneity() {
    let b = [0.6, 0.2, 0.1, 0.2, 0.5, 0.15, 0.1, 0.15, 0.55];
    let sizes = [12, 9, 15];
    let n: usize = sizes.iter().sum();
    let theta: Vec<f64> = (0..n).map(|i| 0.4 + 0.6 * ((i * 7919) % 23) as f64 / 22.0).collect();
    let (m, labels) = dcbm_expectation(&sizes, &b, &theta);
    let ratios = embed_score_matrix(&m, 3, 1e6).unwrap();
    assert_eq!(ratios.cols(), 2);
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                assert!(max_abs_diff(ratios.row(i), ratios.row(j)) < 1e-6, "rows {i}, {j}");
            }
        }
    }
    // the vanilla embedding does not collapse under heterogeneity
    let u = eigen_embedding(&m, 3).unwrap();
    assert!(max_abs_diff(u.row(0), u.row(1)) > 1e-3);
}

#[test]
fn noiseless_blocks_collapse_for_vanilla_and_l2() {
    let b = [0.7, 0.1, 0.2, 0.1, 0.6, 0.15, 0.2, 0.15, 0.8];
    let sizes = [20, 25, 15];
    let n: usize = sizes.iter().sum();
    let (mut m, labels) = dcbm_expectation(&sizes, &b, &vec![1.0; n]);
    for (i, &l) in labels.iter().enumerate() {
        let v = m.row(i)[i] - b[l * 3 + l];
        m.row_mut(i)[i] = v;
    }
    let u = eigen_embedding(&m, 3).unwrap();
    let (l2, zero_rows) = l2_normalize_rows(&u);
    assert_eq!(zero_rows, 0);
    for emb in [&u, &l2] {
        for i in 0..n {
            for j in 0..n {
                if labels[i] == labels[j] {
                    assert!(max_abs_diff(emb.row(i), emb.row(j)) < 1e-6);
                }
            }
        }
    }
}

fn flip_column(m: &DenseMatrix, col: usize) -> DenseMatrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        out.row_mut(i)[col] *= -1.0;
    }
    out
}

#[test]
fn distances_are_invariant_to_eigenvector_signs() {
    let (a, _) = planted(80, 3, 0.4, 5);
    let m = DenseMatrix::from_vec(80, 80, a.to_f64());
    let u = eigen_embedding(&m, 3).unwrap();
    for col in 0..3 {
        let flipped = flip_column(&u, col);
        assert_eq!(distances(&u), distances(&flipped));
        assert_eq!(distances(&l2_normalize_rows(&u).0), distances(&l2_normalize_rows(&flipped).0));
        let clip = (80f64).ln();
        let d0 = distances(&score_ratios(&u, clip).unwrap());
        let d1 = distances(&score_ratios(&flipped, clip).unwrap());
        assert!(max_abs_diff(&d0, &d1) < 1e-12, "column {col}");
    }
}

#[test]
fn embeddings_are_permutation_equivariant() {
    let (a, _) = planted(90, 3, 0.35, 11);
    let perm: Vec<usize> = (0..90).map(|i| (i * 37 + 5) % 90).collect();
    let permuted = a.permuted(&perm);
    for kind in KINDS {
        let variant = SpectralVariant::new(kind);
        let x = embed(&a, 3, &variant).unwrap();
        let y = embed(&permuted, 3, &variant).unwrap();
        let dx = distances(&x);
        let dy = distances(&y);
        let mut worst = 0.0f64;
        // permuted(perm) places old node perm[i] at position i
        for i in 0..90 {
            for j in 0..90 {
                worst = worst.max((dy[i * 90 + j] - dx[perm[i] * 90 + perm[j]]).abs());
            }
        }
        assert!(worst < 1e-8, "{kind:?}: {worst}");
    }
}

#[test]
fn sparse_graphs_with_isolated_nodes_embed() {
    let scenario = sbmlab_core::ScenarioConfig::new(500, 5, 0.0, 1.0, 2).unwrap();
    let inst = sbmlab_core::generate(&scenario).unwrap();
    assert!(inst.adjacency.degrees().contains(&0));
    for kind in [SpectralKind::Vanilla, SpectralKind::L2Norm, SpectralKind::Regularized] {
        embed(&inst.adjacency, 5, &SpectralVariant::new(kind)).unwrap();
    }
}
