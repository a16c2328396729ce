//! Partition agreement: adjusted Rand index and normalized mutual
//! information (geometric-mean normalization, natural log).

use thiserror::Error;

use crate::model::CommunityAssignment;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum MetricError {
    #[error("label length mismatch: truth has {truth}, prediction has {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("at least {0} nodes are required")]
    TooFewNodes(usize),
}

/// Cross-tabulation of two labelings; rows follow `truth`, columns `pred`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub total: usize,
}

fn check_lengths(truth: &[usize], pred: &[usize]) -> Result<(), MetricError> {
    if truth.len() != pred.len() {
        return Err(MetricError::LengthMismatch { truth: truth.len(), pred: pred.len() });
    }
    Ok(())
}

/// Table over raw label values; rows and columns are sized by the largest
/// label present, so empty classes produce zero rows/columns.
pub fn contingency_labels(truth: &[usize], pred: &[usize]) -> Result<ContingencyTable, MetricError> {
    check_lengths(truth, pred)?;
    let rows = truth.iter().max().map_or(0, |m| m + 1);
    let cols = pred.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; cols]; rows];
    for (&t, &p) in truth.iter().zip(pred) {
        counts[t][p] += 1;
    }
    let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..cols).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
    Ok(ContingencyTable { counts, row_sums, col_sums, total: truth.len() })
}

/// Table sized by each assignment's declared community count.
pub fn contingency(truth: &CommunityAssignment, pred: &CommunityAssignment) -> Result<ContingencyTable, MetricError> {
    let mut table = contingency_labels(truth.labels(), pred.labels())?;
    for row in table.counts.iter_mut() {
        row.resize(pred.k(), 0);
    }
    table.counts.resize(truth.k(), vec![0; pred.k()]);
    table.row_sums.resize(truth.k(), 0);
    table.col_sums.resize(pred.k(), 0);
    Ok(table)
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index on raw labels.
pub fn ari_labels(truth: &[usize], pred: &[usize]) -> Result<f64, MetricError> {
    let table = contingency_labels(truth, pred)?;
    if table.total < 2 {
        return Err(MetricError::TooFewNodes(2));
    }
    let index: f64 = table.counts.iter().flatten().map(|&c| choose2(c)).sum();
    let rows: f64 = table.row_sums.iter().map(|&c| choose2(c)).sum();
    let cols: f64 = table.col_sums.iter().map(|&c| choose2(c)).sum();
    let expected = rows * cols / choose2(table.total);
    let max = 0.5 * (rows + cols);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(if same_partition(truth, pred) { 1.0 } else { 0.0 });
    }
    Ok(((index - expected) / denom).clamp(-1.0, 1.0))
}

pub fn ari(truth: &CommunityAssignment, pred: &CommunityAssignment) -> Result<f64, MetricError> {
    ari_labels(truth.labels(), pred.labels())
}

fn entropy(sums: &[usize], total: f64) -> f64 {
    let mut terms: Vec<f64> = sums
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// NMI = I(T;P) / sqrt(H(T) H(P)) on raw labels.
pub fn nmi_labels(truth: &[usize], pred: &[usize]) -> Result<f64, MetricError> {
    let table = contingency_labels(truth, pred)?;
    if table.total < 1 {
        return Err(MetricError::TooFewNodes(1));
    }
    let n = table.total as f64;
    let h_truth = entropy(&table.row_sums, n);
    let h_pred = entropy(&table.col_sums, n);
    if h_truth == 0.0 || h_pred == 0.0 {
        return Ok(if same_partition(truth, pred) { 1.0 } else { 0.0 });
    }
    // Terms are summed in sorted order so swapping the arguments is exact.
    let mut terms = Vec::new();
    for (r, row) in table.counts.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let joint = count as f64 / n;
            let outer = (table.row_sums[r] as f64 / n) * (table.col_sums[c] as f64 / n);
            terms.push(joint * (joint / outer).ln());
        }
    }
    terms.sort_by(f64::total_cmp);
    let mutual: f64 = terms.iter().sum();
    Ok((mutual / (h_truth * h_pred).sqrt()).clamp(0.0, 1.0))
}

pub fn nmi(truth: &CommunityAssignment, pred: &CommunityAssignment) -> Result<f64, MetricError> {
    nmi_labels(truth.labels(), pred.labels())
}

/// True when the two labelings induce the same partition up to relabeling.
pub fn same_partition(x: &[usize], y: &[usize]) -> bool {
    if x.len() != y.len() {
        return false;
    }
    let mut forward = std::collections::HashMap::new();
    let mut backward = std::collections::HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        if *forward.entry(a).or_insert(b) != b || *backward.entry(b).or_insert(a) != a {
            return false;
        }
    }
    true
}
