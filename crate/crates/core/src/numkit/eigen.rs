//! Dense symmetric eigensolver returning the `k` eigenpairs of largest
//! magnitude.
//!
//! Householder reduction to tridiagonal form, implicit QL for the full
//! spectrum, then inverse iteration on the tridiagonal matrix for the
//! selected eigenvalues only (with re-orthogonalization inside clusters of
//! close eigenvalues), back-transformed through the stored reflectors.

use thiserror::Error;

use super::{dot, DenseMatrix};

const QL_MAX_SWEEPS: usize = 60;
const INVERSE_ITERATION_MAX: usize = 8;
/// Relative gap below which eigenvalues are treated as one cluster.
const CLUSTER_GAP: f64 = 1e-3;
const SYMMETRY_TOLERANCE: f64 = 1e-12;
const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("requested {k} eigenpairs from a {n}x{n} matrix")]
    InvalidCount { k: usize, n: usize },
    #[error("eigensolver did not converge (worst residual {worst_residual:e})")]
    ConvergenceFailure { worst_residual: f64 },
}

/// Eigenpairs ordered by descending `|value|`; `vectors` is `n x k` with
/// orthonormal columns, each signed so its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

struct Reflector {
    /// First row the reflector acts on.
    offset: usize,
    tau: f64,
    v: Vec<f64>,
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[i]` couples rows `i` and `i + 1`; the last entry is zero.
    off: Vec<f64>,
    reflectors: Vec<Reflector>,
}

fn tridiagonalize(m: &DenseMatrix) -> Tridiagonal {
    let n = m.rows();
    let mut a = m.as_slice().to_vec();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(1) {
        diag[k] = a[k * n + k];
        let start = k + 1;
        let len = n - start;
        let x: Vec<f64> = a[k * n + start..k * n + n].to_vec();
        let tail_norm_sq: f64 = x[1..].iter().map(|v| v * v).sum();
        if tail_norm_sq == 0.0 {
            off[k] = x[0];
            continue;
        }
        let norm = (x[0] * x[0] + tail_norm_sq).sqrt();
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let tau = 2.0 / dot(&v, &v);
        off[k] = alpha;

        // p = tau * S v over the trailing block S = a[start.., start..]
        for (i, pi) in p[..len].iter_mut().enumerate() {
            let row = &a[(start + i) * n + start..(start + i) * n + n];
            *pi = tau * dot(row, &v);
        }
        let half = 0.5 * tau * dot(&p[..len], &v);
        for (pi, vi) in p[..len].iter_mut().zip(&v) {
            *pi -= half * vi;
        }
        // S -= v w' + w v'
        for i in 0..len {
            let (vi, wi) = (v[i], p[i]);
            let row = &mut a[(start + i) * n + start..(start + i) * n + n];
            for ((s, &vj), &wj) in row.iter_mut().zip(&v).zip(&p[..len]) {
                *s -= vi * wj + wi * vj;
            }
        }
        reflectors.push(Reflector { offset: start, tau, v });
    }
    if n > 0 {
        diag[n - 1] = a[(n - 1) * n + (n - 1)];
    }
    Tridiagonal { diag, off, reflectors }
}

/// Implicit QL with Wilkinson shifts, eigenvalues only. An off-diagonal
/// is zeroed once below `eps * max(|d_m| + |d_m+1|, scale)`; the
/// absolute floor matters when neighbouring diagonals vanish (isolated nodes).
fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64], scale: f64) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd.max(scale) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Some(d)
}

/// LU factorization of `T - shift I` with partial pivoting; the factor has
/// two superdiagonals.
struct TridiagonalLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, tiny: f64) -> Self {
        let n = diag.len();
        let mut u0: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        let mut u1: Vec<f64> = off.to_vec();
        let mut u2 = vec![0.0; n];
        let mut mult = vec![0.0; n];
        let mut swapped = vec![false; n];
        for i in 0..n.saturating_sub(1) {
            let sub = off[i];
            let next_diag = diag[i + 1] - shift;
            let next_super = if i + 2 < n { off[i + 1] } else { 0.0 };
            if u0[i].abs() >= sub.abs() {
                let pivot = if u0[i] == 0.0 { tiny } else { u0[i] };
                u0[i] = pivot;
                let l = sub / pivot;
                mult[i] = l;
                u0[i + 1] = next_diag - l * u1[i];
                u1[i + 1] = next_super;
            } else {
                let l = u0[i] / sub;
                mult[i] = l;
                swapped[i] = true;
                let old_super = u1[i];
                u0[i] = sub;
                u1[i] = next_diag;
                u2[i] = next_super;
                u0[i + 1] = old_super - l * next_diag;
                u1[i + 1] = -l * next_super;
            }
        }
        for p in u0.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        Self { u0, u1, u2, mult, swapped }
    }

    fn solve(&self, y: &mut [f64]) {
        let n = y.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.mult[i] * y[i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            if i + 1 < n {
                acc -= self.u1[i] * y[i + 1];
            }
            if i + 2 < n {
                acc -= self.u2[i] * y[i + 2];
            }
            y[i] = acc / self.u0[i];
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn tridiagonal_residual(diag: &[f64], off: &[f64], lambda: f64, y: &[f64]) -> f64 {
    let n = diag.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut r = (diag[i] - lambda) * y[i];
        if i > 0 {
            r += off[i - 1] * y[i - 1];
        }
        if i + 1 < n {
            r += off[i] * y[i + 1];
        }
        acc += r * r;
    }
    acc.sqrt()
}

/// Deterministic, well-spread start vector.
fn start_vector(n: usize, salt: usize) -> Vec<f64> {
    let mut state = 0x2545_F491_4F6C_DD1D_u64 ^ (salt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state = crate::rng::mix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    normalize(&mut v);
    v
}

/// The `k` eigenpairs of largest absolute eigenvalue of a symmetric matrix.
pub fn topk_eigen(m: &DenseMatrix, k: usize) -> Result<EigenPairs, EigenError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(EigenError::NotSymmetric(f64::INFINITY));
    }
    if k == 0 || k > n {
        return Err(EigenError::InvalidCount { k, n });
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Err(EigenError::NotSymmetric(asym));
    }

    let tri = tridiagonalize(m);
    let norm = (0..n)
        .map(|i| tri.diag[i].abs() + tri.off[i].abs() + if i > 0 { tri.off[i - 1].abs() } else { 0.0 })
        .fold(0.0f64, f64::max);
    if norm == 0.0 {
        let mut vectors = DenseMatrix::zeros(n, k);
        for j in 0..k {
            vectors[(j, j)] = 1.0;
        }
        return Ok(EigenPairs { values: vec![0.0; k], vectors });
    }

    let spectrum = tridiagonal_eigenvalues(&tri.diag, &tri.off, norm)
        .ok_or(EigenError::ConvergenceFailure { worst_residual: f64::INFINITY })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        spectrum[b]
            .abs()
            .total_cmp(&spectrum[a].abs())
            .then(spectrum[b].total_cmp(&spectrum[a]))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    let values: Vec<f64> = order.iter().map(|&i| spectrum[i]).collect();

    // Inverse iteration in ascending order so neighbours share a cluster.
    let mut ascending: Vec<usize> = (0..k).collect();
    ascending.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let eps = f64::EPSILON;
    let tiny = eps * norm;
    let mut tri_vectors: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut cluster: Vec<usize> = Vec::new();
    let mut previous_shift = f64::NEG_INFINITY;
    let mut worst_tri_residual = 0.0f64;
    for (pos, &slot) in ascending.iter().enumerate() {
        let lambda = values[slot];
        if pos > 0 && lambda - values[ascending[pos - 1]] > CLUSTER_GAP * norm {
            cluster.clear();
        }
        let mut shift = lambda;
        if shift - previous_shift < 10.0 * tiny {
            shift = previous_shift + 10.0 * tiny;
        }
        previous_shift = shift;

        let lu = TridiagonalLu::factor(&tri.diag, &tri.off, shift, tiny);
        let mut y = start_vector(n, pos);
        let mut residual = f64::INFINITY;
        let mut converged_once = false;
        for _ in 0..INVERSE_ITERATION_MAX {
            lu.solve(&mut y);
            for _ in 0..2 {
                for &other in &cluster {
                    let q: &Vec<f64> = &tri_vectors[other];
                    let proj = dot(&y, q);
                    y.iter_mut().zip(q).for_each(|(a, b)| *a -= proj * b);
                }
            }
            if normalize(&mut y) == 0.0 {
                y = start_vector(n, pos + 7919);
                continue;
            }
            residual = tridiagonal_residual(&tri.diag, &tri.off, lambda, &y);
            if residual <= 1e-3 * RESIDUAL_TOLERANCE * norm.max(1.0) {
                if converged_once {
                    break;
                }
                converged_once = true;
            }
        }
        worst_tri_residual = worst_tri_residual.max(residual / norm.max(1.0));
        cluster.push(slot);
        tri_vectors[slot] = y;
    }

    let mut vectors = DenseMatrix::zeros(n, k);
    for (j, mut y) in tri_vectors.into_iter().enumerate() {
        for r in tri.reflectors.iter().rev() {
            let seg = &mut y[r.offset..];
            let scale = r.tau * dot(seg, &r.v);
            seg.iter_mut().zip(&r.v).for_each(|(a, b)| *a -= scale * b);
        }
        let pivot = y.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in y.into_iter().enumerate() {
            vectors[(i, j)] = sign * x;
        }
    }

    // Verify against the input matrix.
    let mut worst = 0.0f64;
    let mut mu = vec![0.0; n];
    for j in 0..k {
        let u = vectors.column(j);
        for (i, out) in mu.iter_mut().enumerate() {
            *out = dot(m.row(i), &u);
        }
        let res: f64 = mu.iter().zip(&u).map(|(a, b)| (a - values[j] * b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(res / values[j].abs().max(1.0));
    }
    if worst > RESIDUAL_TOLERANCE || !worst.is_finite() {
        return Err(EigenError::ConvergenceFailure { worst_residual: worst.max(worst_tri_residual) });
    }
    Ok(EigenPairs { values, vectors })
}
