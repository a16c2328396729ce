//! Per-cell summaries of run records and the files derived from them.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::sweep::HarnessError;
use crate::model::{Method, RunRecord};

/// Column order of summary CSV files.
pub const SUMMARY_COLUMNS: [&str; 13] = [
    "method", "n", "k", "beta", "b", "median_ari", "q25_ari", "q75_ari", "median_nmi", "q25_nmi", "q75_nmi",
    "n_runs", "n_converged",
];

/// Boxplot statistics for one method in one cell. Quantiles cover the runs
/// that produced a partition and are `None` when every run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub n: usize,
    pub k: usize,
    pub beta: f64,
    pub b: f64,
    pub median_ari: Option<f64>,
    pub q25_ari: Option<f64>,
    pub q75_ari: Option<f64>,
    pub median_nmi: Option<f64>,
    pub q25_nmi: Option<f64>,
    pub q75_nmi: Option<f64>,
    pub n_runs: usize,
    pub n_converged: usize,
}

/// Quantile of sorted data by linear interpolation between order
/// statistics (`h = (m - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Median by the same rule; `None` for empty input.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

fn quartiles(mut values: Vec<f64>) -> [Option<f64>; 3] {
    values.sort_by(f64::total_cmp);
    [quantile_sorted(&values, 0.5), quantile_sorted(&values, 0.25), quantile_sorted(&values, 0.75)]
}

fn cell_key(r: &RunRecord) -> (usize, usize, u64, u64) {
    (r.scenario.n, r.scenario.k, r.scenario.beta.to_bits(), r.scenario.b.to_bits())
}

/// One row per (cell, method), ordered by n, k, beta, b (sparsest first),
/// then method.
pub fn aggregate(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<((usize, usize, u64, u64), Method, Vec<&RunRecord>)> = Vec::new();
    for r in records {
        let key = cell_key(r);
        match groups.iter_mut().find(|(k, m, _)| *k == key && *m == r.method) {
            Some((_, _, rows)) => rows.push(r),
            None => groups.push((key, r.method, vec![r])),
        }
    }
    groups.sort_by(|a, b| {
        let (x, y) = (a.2[0], b.2[0]);
        (x.scenario.n, x.scenario.k)
            .cmp(&(y.scenario.n, y.scenario.k))
            .then(x.scenario.beta.total_cmp(&y.scenario.beta))
            .then(y.scenario.b.total_cmp(&x.scenario.b))
            .then(a.1.cmp(&b.1))
    });
    groups
        .into_iter()
        .map(|(_, method, rows)| {
            let ok: Vec<&&RunRecord> = rows.iter().filter(|r| !r.failed()).collect();
            let [median_ari, q25_ari, q75_ari] = quartiles(ok.iter().map(|r| r.ari).collect());
            let [median_nmi, q25_nmi, q75_nmi] = quartiles(ok.iter().map(|r| r.nmi).collect());
            let s = rows[0].scenario;
            SummaryRow {
                method,
                n: s.n,
                k: s.k,
                beta: s.beta,
                b: s.b,
                median_ari,
                q25_ari,
                q75_ari,
                median_nmi,
                q25_nmi,
                q75_nmi,
                n_runs: rows.len(),
                n_converged: rows.iter().filter(|r| r.converged).count(),
            }
        })
        .collect()
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.beta.to_string(),
            r.b.to_string(),
            opt(r.median_ari),
            opt(r.q25_ari),
            opt(r.q75_ari),
            opt(r.median_nmi),
            opt(r.q25_nmi),
            opt(r.q75_nmi),
            r.n_runs.to_string(),
            r.n_converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_opt(s: &str) -> Result<Option<f64>, String> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|e| format!("{e}"))
    }
}

pub fn read_summary<R: std::io::Read>(input: R) -> Result<Vec<SummaryRow>, String> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(SUMMARY_COLUMNS) {
        return Err(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        let line = row.position().map_or(0, |p| p.line());
        let ctx = |e: String| format!("line {line}: {e}");
        let num = |i: usize| row[i].parse::<f64>().map_err(|e| ctx(e.to_string()));
        let count = |i: usize| row[i].parse::<usize>().map_err(|e| ctx(e.to_string()));
        out.push(SummaryRow {
            method: row[0].parse().map_err(|e: crate::model::UnknownMethod| ctx(e.to_string()))?,
            n: count(1)?,
            k: count(2)?,
            beta: num(3)?,
            b: num(4)?,
            median_ari: parse_opt(&row[5]).map_err(ctx)?,
            q25_ari: parse_opt(&row[6]).map_err(ctx)?,
            q75_ari: parse_opt(&row[7]).map_err(ctx)?,
            median_nmi: parse_opt(&row[8]).map_err(ctx)?,
            q25_nmi: parse_opt(&row[9]).map_err(ctx)?,
            q75_nmi: parse_opt(&row[10]).map_err(ctx)?,
            n_runs: count(11)?,
            n_converged: count(12)?,
        });
    }
    Ok(out)
}

/// Per-run values in long format: one row per (run, metric).
pub fn write_long<W: Write>(records: &[RunRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "n", "k", "beta", "b", "seed", "metric", "value"])?;
    for r in records.iter().filter(|r| !r.failed()) {
        let s = &r.scenario;
        for (metric, value) in [("ari", r.ari), ("nmi", r.nmi)] {
            w.write_record([
                r.method.to_string(),
                s.n.to_string(),
                s.k.to_string(),
                s.beta.to_string(),
                s.b.to_string(),
                s.seed.to_string(),
                metric.to_string(),
                value.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Cells at `b >= 1` sit at the exact-recovery threshold where no method
/// is expected to recover anything.
pub fn is_threshold_cell(b: f64) -> bool {
    b >= 1.0
}

/// Plain-text ranking: for each cell, methods by descending median ARI.
/// Methods with no successful run are listed last as failed.
pub fn ranking_report(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mut start = 0;
    while start < rows.len() {
        let first = &rows[start];
        let same = |r: &SummaryRow| r.n == first.n && r.k == first.k && r.beta == first.beta && r.b == first.b;
        let end = start + rows[start..].iter().take_while(|r| same(r)).count();
        let mut cell: Vec<&SummaryRow> = rows[start..end].iter().collect();
        cell.sort_by(|x, y| match (x.median_ari, y.median_ari) {
            (Some(a), Some(b)) => b.total_cmp(&a).then(x.method.cmp(&y.method)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => x.method.cmp(&y.method),
        });
        let _ = write!(out, "cell n={} k={} beta={} b={}", first.n, first.k, first.beta, first.b);
        if is_threshold_cell(first.b) {
            out.push_str("  [excluded: sparsest regime, no method expected to recover]");
        }
        out.push('\n');
        for (rank, r) in cell.iter().enumerate() {
            let _ = match r.median_ari {
                Some(m) => writeln!(
                    out,
                    "  {:>2}. {:<6} median ARI {:.4} (IQR {:.4}..{:.4})  runs {}  converged {}",
                    rank + 1,
                    r.method.name(),
                    m,
                    r.q25_ari.unwrap_or(m),
                    r.q75_ari.unwrap_or(m),
                    r.n_runs,
                    r.n_converged
                ),
                None => writeln!(out, "  {:>2}. {:<6} failed on all {} runs", rank + 1, r.method.name(), r.n_runs),
            };
        }
        out.push('\n');
        start = end;
    }
    out
}

/// Paths written by [`emit_plot_data`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    pub summary: PathBuf,
    pub long: PathBuf,
    pub ranking: PathBuf,
}

/// Writes `summary.csv`, `runs_long.csv` and `ranking.txt` into `dir`.
pub fn emit_plot_data(summaries: &[SummaryRow], records: &[RunRecord], dir: &Path) -> Result<PlotFiles, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let files = PlotFiles { summary: dir.join("summary.csv"), long: dir.join("runs_long.csv"), ranking: dir.join("ranking.txt") };
    write_summary(summaries, File::create(&files.summary)?)?;
    write_long(records, File::create(&files.long)?)?;
    std::fs::write(&files.ranking, ranking_report(summaries))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScenarioConfig;

    fn record(method: Method, ari: f64, b: f64, seed: u64) -> RunRecord {
        RunRecord {
            method,
            scenario: ScenarioConfig { n: 10, k: 2, beta: 0.0, b, seed },
            ari,
            nmi: ari.max(0.0),
            runtime_ms: 1.0,
            converged: true,
            iterations: 3,
            error: None,
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.2, 0.4, 0.6];
        assert_eq!(quantile_sorted(&v, 0.5), Some(0.4));
        assert!((quantile_sorted(&v, 0.25).unwrap() - 0.3).abs() < 1e-15);
        assert!((quantile_sorted(&v, 0.75).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(quantile_sorted(&[0.7], 0.25), Some(0.7));
        assert_eq!(quantile_sorted(&[], 0.5), None);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    }

    #[test]
    fn aggregate_groups_and_excludes_failures() {
        let mut failed = record(Method::Score, f64::NAN, 0.5, 1);
        failed.error = Some("x".into());
        failed.converged = false;
        let rows = aggregate(&[record(Method::Sc, 0.2, 0.5, 1), record(Method::Sc, 0.6, 0.5, 2), record(Method::Sc, 0.4, 0.5, 3), failed]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].method, Method::Sc);
        assert_eq!(rows[0].median_ari, Some(0.4));
        assert!(rows[0].q25_ari.unwrap() <= rows[0].median_ari.unwrap());
        assert_eq!(rows[1].median_ari, None);
        assert_eq!((rows[1].n_runs, rows[1].n_converged), (1, 0));
    }

    #[test]
    fn summary_round_trip_and_ranking() {
        let rows = aggregate(&[record(Method::Sc, 0.5, 0.1, 1), record(Method::Gibbs, 0.9, 0.1, 1), record(Method::Vb, 0.1, 1.0, 1)]);
        let mut buf = Vec::new();
        write_summary(&rows, &mut buf).unwrap();
        assert_eq!(read_summary(buf.as_slice()).unwrap(), rows);
        let report = ranking_report(&rows);
        let gibbs = report.find("GIBBS").unwrap();
        assert!(gibbs < report.find("SC ").unwrap());
        assert!(report.contains("b=1  [excluded"));
    }
}
