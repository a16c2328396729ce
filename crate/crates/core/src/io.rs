//! File formats: Matrix Market adjacency, one-label-per-line partitions and
//! the instance metadata sidecar.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AdjacencyMatrix, CommunityAssignment, ModelError};

pub const MATRIX_MARKET_HEADER: &str = "%%MatrixMarket matrix coordinate pattern symmetric";

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, message: message.into() }
}

/// Writes the lower triangle (`row > col`), 1-based.
pub fn write_matrix_market<W: Write>(adjacency: &AdjacencyMatrix, mut out: W) -> io::Result<()> {
    let n = adjacency.n();
    writeln!(out, "{MATRIX_MARKET_HEADER}")?;
    writeln!(out, "{n} {n} {}", adjacency.edge_count())?;
    for j in 0..n {
        for &i in adjacency.neighbors(j) {
            let i = i as usize;
            if i > j {
                writeln!(out, "{} {}", i + 1, j + 1)?;
            }
        }
    }
    Ok(())
}

/// Reads a symmetric pattern matrix. Entries may be given in either
/// triangle; diagonal entries are rejected.
pub fn read_matrix_market<R: Read>(input: R) -> Result<AdjacencyMatrix, IoError> {
    let reader = BufReader::new(input);
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5
        || tokens[0] != "%%matrixmarket"
        || tokens[1] != "matrix"
        || tokens[2] != "coordinate"
        || tokens[3] != "pattern"
        || tokens[4] != "symmetric"
    {
        return Err(parse_err(1, format!("expected header `{MATRIX_MARKET_HEADER}`")));
    }
    let mut size: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "size line must be `rows cols entries`"));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|_| parse_err(lineno, format!("bad integer `{s}`")));
                let (rows, cols, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if rows != cols {
                    return Err(parse_err(lineno, "matrix must be square"));
                }
                size = Some((rows, nnz));
                edges.reserve(nnz);
            }
            Some((n, _)) => {
                if fields.len() != 2 {
                    return Err(parse_err(lineno, "pattern entry must be `row col`"));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|_| parse_err(lineno, format!("bad index `{s}`")));
                let (i, j) = (parse(fields[0])?, parse(fields[1])?);
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(parse_err(lineno, format!("index ({i}, {j}) out of range for n={n}")));
                }
                if i == j {
                    return Err(ModelError::NonZeroDiagonal { row: i, col: j }.into());
                }
                edges.push((i - 1, j - 1));
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if edges.len() != nnz {
        return Err(parse_err(0, format!("header declares {nnz} entries, found {}", edges.len())));
    }
    Ok(AdjacencyMatrix::from_edges(n, &edges)?)
}

/// One 1-based label per line.
pub fn write_labels<W: Write>(labels: &CommunityAssignment, mut out: W) -> io::Result<()> {
    for label in labels.one_based() {
        writeln!(out, "{label}")?;
    }
    Ok(())
}

/// Reads 1-based labels; `k` defaults to the largest label seen.
pub fn read_labels<R: Read>(input: R, k: Option<usize>) -> Result<CommunityAssignment, IoError> {
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let label = trimmed
            .parse::<usize>()
            .map_err(|_| parse_err(idx + 1, format!("bad label `{trimmed}`")))?;
        labels.push(label);
    }
    let k = k.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(1));
    Ok(CommunityAssignment::from_one_based(&labels, k)?)
}

/// Metadata written next to a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetadata {
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub b: f64,
    pub seed: u64,
    pub rho: f64,
    pub alpha: Vec<f64>,
}

pub fn write_metadata<W: Write>(meta: &InstanceMetadata, mut out: W) -> Result<(), IoError> {
    serde_json::to_writer_pretty(&mut out, meta)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_metadata<R: Read>(input: R) -> Result<InstanceMetadata, IoError> {
    Ok(serde_json::from_reader(input)?)
}

pub fn read_matrix_market_file(path: &Path) -> Result<AdjacencyMatrix, IoError> {
    read_matrix_market(fs::File::open(path)?)
}

pub fn read_labels_file(path: &Path, k: Option<usize>) -> Result<CommunityAssignment, IoError> {
    read_labels(fs::File::open(path)?, k)
}
