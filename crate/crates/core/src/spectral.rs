//! Spectral community detection: vanilla adjacency embedding, SCORE ratios,
//! row-L2 normalization and regularized spectral clustering, each followed
//! by K-means on the embedded rows.

use thiserror::Error;

use crate::model::{AdjacencyMatrix, CommunityAssignment};
use crate::numkit::{kmeans, topk_eigen, DenseMatrix, EigenError};
use crate::rng::RngHandle;

/// Leading-vector entries below this magnitude count as zero for SCORE.
pub const SCORE_ZERO_THRESHOLD: f64 = 1e-12;
/// SCORE refuses to run when more than this fraction of the leading vector is zero.
pub const SCORE_MAX_ZERO_FRACTION: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("need 1 <= k <= n, got k={k}, n={n}")]
    InvalidCount { k: usize, n: usize },
    #[error("SCORE needs k >= 2")]
    ScoreNeedsTwoCommunities,
    #[error("leading eigenvector has {zeros} of {n} entries near zero")]
    DegenerateLeadingVector { zeros: usize, n: usize },
    #[error("SCORE clip threshold must be positive, got {0}")]
    InvalidClip(f64),
    #[error("RSC tau must be positive, got {0}")]
    InvalidTau(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralKind {
    Vanilla,
    Score,
    L2Norm,
    Regularized,
}

/// Degree regularizer for RSC.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RscTau {
    /// Total degree `sum_i D_ii`.
    #[default]
    TotalDegree,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralVariant {
    pub kind: SpectralKind,
    /// SCORE ratio clip; `None` means `ln(n)`.
    pub score_clip: Option<f64>,
    pub rsc_tau: RscTau,
}

impl SpectralVariant {
    pub fn new(kind: SpectralKind) -> Self {
        Self { kind, score_clip: None, rsc_tau: RscTau::TotalDegree }
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if let Some(clip) = self.score_clip {
            if !(clip > 0.0) {
                return Err(SpectralError::InvalidClip(clip));
            }
        }
        if let RscTau::Value(tau) = self.rsc_tau {
            if !(tau > 0.0) {
                return Err(SpectralError::InvalidTau(tau));
            }
        }
        Ok(())
    }
}

fn check_k(k: usize, n: usize) -> Result<(), SpectralError> {
    if k == 0 || k > n {
        return Err(SpectralError::InvalidCount { k, n });
    }
    Ok(())
}

fn adjacency_matrix(a: &AdjacencyMatrix) -> DenseMatrix {
    DenseMatrix::from_vec(a.n(), a.n(), a.to_f64())
}

/// Top-`k` eigenvectors (by `|lambda|`) of any symmetric matrix.
pub fn eigen_embedding(m: &DenseMatrix, k: usize) -> Result<DenseMatrix, SpectralError> {
    check_k(k, m.rows())?;
    Ok(topk_eigen(m, k)?.vectors)
}

/// Rows of the top-`k` eigenvector matrix of `A`.
pub fn embed_vanilla(a: &AdjacencyMatrix, k: usize) -> Result<DenseMatrix, SpectralError> {
    eigen_embedding(&adjacency_matrix(a), k)
}

/// Divides columns `2..k` of `u` entrywise by column 1 and clips to
/// `[-clip, clip]`; the constant first ratio column is dropped.
pub fn score_ratios(u: &DenseMatrix, clip: f64) -> Result<DenseMatrix, SpectralError> {
    if !(clip > 0.0) {
        return Err(SpectralError::InvalidClip(clip));
    }
    let (n, k) = (u.rows(), u.cols());
    if k < 2 {
        return Err(SpectralError::ScoreNeedsTwoCommunities);
    }
    let zeros = (0..n).filter(|&i| u[(i, 0)].abs() < SCORE_ZERO_THRESHOLD).count();
    if zeros as f64 > SCORE_MAX_ZERO_FRACTION * n as f64 {
        return Err(SpectralError::DegenerateLeadingVector { zeros, n });
    }
    let mut out = DenseMatrix::zeros(n, k - 1);
    for i in 0..n {
        let lead = u[(i, 0)];
        for j in 1..k {
            let ratio = u[(i, j)] / lead;
            let value = if ratio.is_nan() { 0.0 } else { ratio.clamp(-clip, clip) };
            out[(i, j - 1)] = value;
        }
    }
    Ok(out)
}

pub fn embed_score_matrix(m: &DenseMatrix, k: usize, clip: f64) -> Result<DenseMatrix, SpectralError> {
    if k < 2 {
        return Err(SpectralError::ScoreNeedsTwoCommunities);
    }
    score_ratios(&eigen_embedding(m, k)?, clip)
}

pub fn embed_score(a: &AdjacencyMatrix, k: usize, clip: f64) -> Result<DenseMatrix, SpectralError> {
    embed_score_matrix(&adjacency_matrix(a), k, clip)
}

/// Scales each row to unit norm; zero rows stay zero. Returns the number of
/// zero rows alongside.
pub fn l2_normalize_rows(u: &DenseMatrix) -> (DenseMatrix, usize) {
    let mut out = u.clone();
    let mut zero_rows = 0;
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        } else {
            zero_rows += 1;
        }
    }
    (out, zero_rows)
}

pub fn embed_l2(a: &AdjacencyMatrix, k: usize) -> Result<DenseMatrix, SpectralError> {
    Ok(l2_normalize_rows(&embed_vanilla(a, k)?).0)
}

/// `D_tau^{-1/2} A D_tau^{-1/2}` with `D_tau = D + tau I`. The returned
/// tau is the one actually used (1 for an edgeless graph under the default).
pub fn regularized_laplacian(a: &AdjacencyMatrix, tau: RscTau) -> Result<(DenseMatrix, f64), SpectralError> {
    let degrees = a.degrees();
    let tau = match tau {
        RscTau::Value(t) if t > 0.0 => t,
        RscTau::Value(t) => return Err(SpectralError::InvalidTau(t)),
        RscTau::TotalDegree => {
            let total: usize = degrees.iter().sum();
            if total == 0 {
                1.0
            } else {
                total as f64
            }
        }
    };
    let n = a.n();
    let scale: Vec<f64> = degrees.iter().map(|&d| 1.0 / (d as f64 + tau).sqrt()).collect();
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for &j in a.neighbors(i) {
            let j = j as usize;
            l[(i, j)] = scale[i] * scale[j];
        }
    }
    Ok((l, tau))
}

/// Top-`k` eigenvectors of the regularized Laplacian, rows L2-normalized.
pub fn embed_rsc(a: &AdjacencyMatrix, k: usize, tau: RscTau) -> Result<DenseMatrix, SpectralError> {
    let (l, _) = regularized_laplacian(a, tau)?;
    Ok(l2_normalize_rows(&eigen_embedding(&l, k)?).0)
}

pub fn default_score_clip(n: usize) -> f64 {
    (n as f64).ln().max(1.0)
}

/// Embedding for the chosen variant.
pub fn embed(a: &AdjacencyMatrix, k: usize, variant: &SpectralVariant) -> Result<DenseMatrix, SpectralError> {
    variant.validate()?;
    check_k(k, a.n())?;
    match variant.kind {
        SpectralKind::Vanilla => embed_vanilla(a, k),
        SpectralKind::Score => {
            embed_score(a, k, variant.score_clip.unwrap_or_else(|| default_score_clip(a.n())))
        }
        SpectralKind::L2Norm => embed_l2(a, k),
        SpectralKind::Regularized => embed_rsc(a, k, variant.rsc_tau),
    }
}

/// Embeds per variant and clusters the rows with K-means.
pub fn spectral_cluster(
    a: &AdjacencyMatrix,
    k: usize,
    variant: &SpectralVariant,
    rng: &mut RngHandle,
) -> Result<CommunityAssignment, SpectralError> {
    check_k(k, a.n())?;
    variant.validate()?;
    if k == 1 {
        return Ok(CommunityAssignment::uniform(a.n(), 1));
    }
    let embedding = embed(a, k, variant)?;
    Ok(kmeans(&embedding, k, rng).assignment)
}
