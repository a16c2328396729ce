//! Acceptance suite. Runs the desk sweep twice plus the small exact checks
//! and prints one PASS/FAIL line per criterion. Exits nonzero on any FAIL.
//!
//! `cargo test -p sbmlab-core --test acceptance`

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use sbmlab_core::harness::{median, parse_config, run_sweep, SweepOptions};
use sbmlab_core::metrics::ari_labels;
use sbmlab_core::numkit::{kmeans, topk_eigen, DenseMatrix};
use sbmlab_core::rng::seeded_rng;
use sbmlab_core::{Method, RunRecord};

mod common;
use common::*;

struct Verdict {
    id: usize,
    pass: bool,
    detail: String,
}

fn in_cell(r: &RunRecord, n: usize, k: usize, beta: f64, b: f64) -> bool {
    r.scenario.n == n && r.scenario.k == k && r.scenario.beta == beta && r.scenario.b == b
}

/// Median ARI over the runs that produced a partition.
fn median_ari<'a>(records: impl Iterator<Item = &'a RunRecord>, method: Method) -> Option<f64> {
    let values: Vec<f64> = records.filter(|r| r.method == method && !r.failed()).map(|r| r.ari).collect();
    median(&values)
}

fn cell_median(records: &[RunRecord], cell: (usize, usize, f64, f64), method: Method) -> Option<f64> {
    let (n, k, beta, b) = cell;
    median_ari(records.iter().filter(|r| in_cell(r, n, k, beta, b)), method)
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| format!("{v:.4}"))
}

fn null_model(records: &[RunRecord]) -> Verdict {
    let cell = (500, 5, 0.0, 1.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for m in Method::ALL {
        let med = cell_median(records, cell, m);
        // a method that fails on every replicate recovers nothing
        pass &= med.is_none_or(|v| v < 0.05);
        parts.push(format!("{}={}", m.name(), show(med)));
    }
    let compute_s: f64 =
        records.iter().filter(|r| in_cell(r, 500, 5, 0.0, 1.0)).map(|r| r.runtime_ms).sum::<f64>() / 1000.0;
    pass &= compute_s < 300.0;
    Verdict { id: 1, pass, detail: format!("{} compute={compute_s:.1}s", parts.join(" ")) }
}

fn dense_cell(records: &[RunRecord]) -> Verdict {
    let cell = (500, 5, 0.0, 0.1);
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Method::Sc, Method::Score, Method::L2, Method::Vemb, Method::Vemg, Method::Gibbs] {
        let med = cell_median(records, cell, m);
        pass &= med.is_some_and(|v| v > 0.9);
        parts.push(format!("{}={}", m.name(), show(med)));
    }
    Verdict { id: 2, pass, detail: parts.join(" ") }
}

fn score_versus_spectral(records: &[RunRecord]) -> Verdict {
    let dense: Vec<&RunRecord> = records.iter().filter(|r| r.scenario.b == 0.5 || r.scenario.b == 0.1).collect();
    let mut cells: Vec<(usize, usize, f64, f64)> =
        dense.iter().map(|r| (r.scenario.n, r.scenario.k, r.scenario.beta, r.scenario.b)).collect();
    cells.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cells.dedup();
    let wins = cells
        .iter()
        .filter(|&&c| match (cell_median(records, c, Method::Score), cell_median(records, c, Method::Rsc)) {
            (Some(s), Some(r)) => s >= r,
            (Some(_), None) => true,
            _ => false,
        })
        .count();
    let share = wins as f64 / cells.len() as f64;
    let grand = |m| median_ari(dense.iter().copied(), m);
    let score = grand(Method::Score);
    let mut pass = share >= 0.9;
    let mut parts = vec![format!("SCORE>=RSC in {wins}/{} cells", cells.len()), format!("grand SCORE={}", show(score))];
    for m in [Method::Sc, Method::L2, Method::Rsc] {
        let other = grand(m);
        pass &= match (score, other) {
            (Some(s), Some(o)) => s >= o,
            (Some(_), None) => true,
            _ => false,
        };
        parts.push(format!("{}={}", m.name(), show(other)));
    }
    Verdict { id: 3, pass, detail: parts.join(" ") }
}

fn vb_versus_vem(records: &[RunRecord]) -> Verdict {
    let cell = (500, 5, 0.0, 0.5);
    let vb = cell_median(records, cell, Method::Vb);
    let b = cell_median(records, cell, Method::Vemb);
    let g = cell_median(records, cell, Method::Vemg);
    let pass = match (vb, b, g) {
        (Some(v), Some(b), Some(g)) => v <= b.min(g),
        _ => false,
    };
    Verdict { id: 4, pass, detail: format!("VB={} VEMB={} VEMG={}", show(vb), show(b), show(g)) }
}

fn gibbs_small_dense(records: &[RunRecord]) -> Verdict {
    let cell = (250, 5, 0.0, 0.1);
    let gibbs = cell_median(records, cell, Method::Gibbs);
    let mut pass = gibbs.is_some();
    let mut parts = vec![format!("GIBBS={}", show(gibbs))];
    for m in Method::ALL.into_iter().filter(|&m| m != Method::Gibbs) {
        let other = cell_median(records, cell, m);
        if let (Some(g), Some(o)) = (gibbs, other) {
            pass &= g >= o;
        }
        parts.push(format!("{}={}", m.name(), show(other)));
    }
    Verdict { id: 5, pass, detail: parts.join(" ") }
}

fn vemb_versus_sc(records: &[RunRecord]) -> Verdict {
    let vemb = median_ari(records.iter(), Method::Vemb);
    let sc = median_ari(records.iter(), Method::Sc);
    let pass = matches!((vemb, sc), (Some(v), Some(s)) if v >= s);
    Verdict { id: 6, pass, detail: format!("VEMB={} SC={}", show(vemb), show(sc)) }
}

fn gibbs_toy() -> Verdict {
    let start = Instant::now();
    let (tv, gap) = toy_chain_distances(2718, 50_000);
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        id: 7,
        pass: gap <= 0.05 && secs < 60.0,
        detail: format!("max co-assignment gap={gap:.4} labeling TV={tv:.4} time={secs:.1}s"),
    }
}

fn ari_exhaustive() -> Verdict {
    let mut worst: f64 = 0.0;
    for n in 2..=6 {
        let labelings = all_labelings(n, 3);
        for x in &labelings {
            for y in &labelings {
                worst = worst.max((ari_labels(x, y).unwrap() - pair_counting_ari(x, y)).abs());
            }
        }
    }
    let example = ari_labels(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
    let pass = worst <= 1e-12 && (example - 4.0 / 7.0).abs() <= 1e-12;
    Verdict { id: 8, pass, detail: format!("max deviation={worst:.2e} example={example:.12}") }
}

fn numerics() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let m = random_symmetric(50, seed);
        let pairs = topk_eigen(&m, 5).unwrap();
        for j in 0..5 {
            let lambda = pairs.values[j];
            worst = worst.max(residual(&m, &pairs.vectors.column(j), lambda) / lambda.abs().max(1.0));
        }
    }
    let mut monotone = true;
    for seed in 0..50 {
        let mut rng = seeded_rng(seed, 1);
        let data: Vec<f64> = (0..200 * 3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let result = kmeans(&DenseMatrix::from_vec(200, 3, data), 4, &mut seeded_rng(seed, 2));
        monotone &= result.wcss_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
    }
    let vb = check_vb_transcription(200, 600);
    let pass = worst <= 1e-8 && monotone && vb.is_ok();
    Verdict {
        id: 9,
        pass,
        detail: format!(
            "eigen residual={worst:.2e} kmeans monotone={monotone} vb transcription={}",
            vb.err().unwrap_or_else(|| "ok".to_string())
        ),
    }
}

/// Run-level CSV rows with the runtime column removed.
fn rows_without_runtime(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    let skip = rows[0].iter().position(|h| h == "runtime_ms").expect("runtime_ms column");
    rows.iter().map(|r| r.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, f)| f.to_string()).collect()).collect()
}

fn reproducibility(first: &Path, second: &Path) -> Verdict {
    let (a, b) = (rows_without_runtime(first), rows_without_runtime(second));
    let differing = a.iter().zip(&b).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    Verdict { id: 10, pass: differing == 0, detail: format!("{} rows, {differing} differ", a.len()) }
}

fn main() -> ExitCode {
    let config_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let config = parse_config(&config_path).expect("desk config");
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<PathBuf> = ["first.csv", "second.csv"].iter().map(|f| dir.path().join(f)).collect();

    // the exact checks are cheap, so they run before the sweeps
    let exact = [gibbs_toy(), ari_exhaustive(), numerics()];

    let start = Instant::now();
    let records = run_sweep(&config, &SweepOptions { threads: None, output: Some(runs[0].clone()) }).unwrap();
    eprintln!("desk sweep: {} runs in {:.0}s", records.len(), start.elapsed().as_secs_f64());

    let mut verdicts = vec![
        null_model(&records),
        dense_cell(&records),
        score_versus_spectral(&records),
        vb_versus_vem(&records),
        gibbs_small_dense(&records),
        vemb_versus_sc(&records),
    ];
    verdicts.extend(exact);

    let start = Instant::now();
    run_sweep(&config, &SweepOptions { threads: None, output: Some(runs[1].clone()) }).unwrap();
    eprintln!("repeat sweep: {:.0}s", start.elapsed().as_secs_f64());
    verdicts.push(reproducibility(&runs[0], &runs[1]));

    for v in &verdicts {
        println!("criterion {:>2}: {} {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if verdicts.iter().all(|v| v.pass) { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
