//! Running methods on generated instances and streaming run records.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{Cell, ConfigError, MethodSettings, SweepConfig};
use crate::generator::{generate, GeneratedInstance};
use crate::gibbs::run_gibbs;
use crate::metrics::{ari, nmi};
use crate::model::{AdjacencyMatrix, CommunityAssignment, Method, RunRecord, ScenarioConfig};
use crate::rng::{hash_words, seeded_rng, RngHandle};
use crate::spectral::{spectral_cluster, SpectralKind};
use crate::vb::run_vb;
use crate::vem::{run_vem, VemModel};

/// Column order of run-level CSV files.
pub const RUN_COLUMNS: [&str; 11] =
    ["method", "n", "k", "beta", "b", "seed", "ari", "nmi", "runtime_ms", "converged", "iterations"];

/// Method streams start here so they never collide with generator streams.
const METHOD_STREAM_BASE: u64 = 16;

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "SBMLAB_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error("cannot build thread pool: {0}")]
    Threads(String),
}

/// What a method produced on one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub assignment: CommunityAssignment,
    pub converged: bool,
    /// Sweeps or outer iterations; 0 for the one-shot spectral methods.
    pub iterations: usize,
}

/// RNG for `method` on the instance generated from `scenario`.
pub fn method_rng(scenario: &ScenarioConfig, method: Method) -> RngHandle {
    seeded_rng(scenario.seed, METHOD_STREAM_BASE + method.index())
}

/// Runs one method with the given settings.
pub fn run_method(
    a: &AdjacencyMatrix,
    k: usize,
    method: Method,
    settings: &MethodSettings,
    mut rng: RngHandle,
) -> Result<MethodOutcome, String> {
    let spectral = |kind, rng: &mut RngHandle| {
        spectral_cluster(a, k, &settings.spectral_variant(kind), rng)
            .map(|assignment| MethodOutcome { assignment, converged: true, iterations: 0 })
            .map_err(|e| e.to_string())
    };
    match method {
        Method::Sc => spectral(SpectralKind::Vanilla, &mut rng),
        Method::Score => spectral(SpectralKind::Score, &mut rng),
        Method::L2 => spectral(SpectralKind::L2Norm, &mut rng),
        Method::Rsc => spectral(SpectralKind::Regularized, &mut rng),
        Method::Gibbs => run_gibbs(a, k, &settings.gibbs_config(), rng)
            .map(|o| MethodOutcome { assignment: o.assignment, converged: true, iterations: o.sweeps })
            .map_err(|e| e.to_string()),
        Method::Vb => run_vb(a, k, &settings.vb_config(), rng)
            .map(|o| MethodOutcome { assignment: o.assignment, converged: o.converged, iterations: o.iterations })
            .map_err(|e| e.to_string()),
        Method::Vemb | Method::Vemg => {
            let model = if method == Method::Vemb { VemModel::Bernoulli } else { VemModel::Gaussian };
            run_vem(a, k, &settings.vem_config(model), rng)
                .map(|o| MethodOutcome { assignment: o.assignment, converged: o.converged, iterations: o.iterations })
                .map_err(|e| e.to_string())
        }
    }
}

fn failed_record(method: Method, scenario: ScenarioConfig, runtime_ms: f64, error: String) -> RunRecord {
    RunRecord { method, scenario, ari: f64::NAN, nmi: f64::NAN, runtime_ms, converged: false, iterations: 0, error: Some(error) }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    let detail = payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown payload".into());
    format!("panic: {detail}")
}

/// Times `run`, scores its partition against `truth`, and turns errors and
/// panics into a failed record.
pub fn score_run(
    method: Method,
    scenario: ScenarioConfig,
    truth: &CommunityAssignment,
    run: impl FnOnce() -> Result<MethodOutcome, String>,
) -> RunRecord {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(run));
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let outcome = match result {
        Ok(Ok(outcome)) => outcome,
        Ok(Err(message)) => return failed_record(method, scenario, runtime_ms, message),
        Err(payload) => return failed_record(method, scenario, runtime_ms, panic_message(payload)),
    };
    match (ari(truth, &outcome.assignment), nmi(truth, &outcome.assignment)) {
        (Ok(ari), Ok(nmi)) => RunRecord {
            method,
            scenario,
            ari,
            nmi,
            runtime_ms,
            converged: outcome.converged,
            iterations: outcome.iterations,
            error: None,
        },
        (Err(e), _) | (_, Err(e)) => failed_record(method, scenario, runtime_ms, e.to_string()),
    }
}

fn run_on_instance(instance: &GeneratedInstance, method: Method, settings: &MethodSettings) -> RunRecord {
    let scenario = instance.scenario;
    score_run(method, scenario, &instance.truth, || {
        run_method(&instance.adjacency, scenario.k, method, settings, method_rng(&scenario, method))
    })
}

/// Generates the scenario's instance, runs `method` on it and scores the
/// result. Deterministic in `(scenario, method, settings)` apart from timing.
pub fn run_cell(scenario: &ScenarioConfig, method: Method, settings: &MethodSettings) -> RunRecord {
    match generate(scenario) {
        Ok(instance) => run_on_instance(&instance, method, settings),
        Err(e) => failed_record(method, *scenario, 0.0, e.to_string()),
    }
}

/// Seed of replicate `seed_index` of `cell`.
pub fn scenario_seed(base_seed: u64, cell: &Cell, seed_index: usize) -> u64 {
    hash_words(&[base_seed, cell.n as u64, cell.k as u64, cell.beta.to_bits(), cell.b.to_bits(), seed_index as u64])
}

/// Identity of a run row, used for resuming and ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub method: Method,
    pub n: usize,
    pub k: usize,
    pub beta: u64,
    pub b: u64,
    pub seed: u64,
}

impl RunKey {
    pub fn new(s: &ScenarioConfig, method: Method) -> Self {
        Self { method, n: s.n, k: s.k, beta: s.beta.to_bits(), b: s.b.to_bits(), seed: s.seed }
    }

    pub fn of(record: &RunRecord) -> Self {
        Self::new(&record.scenario, record.method)
    }
}

fn format_metric(x: f64, failed: bool) -> String {
    if failed {
        String::new()
    } else {
        x.to_string()
    }
}

fn record_fields(r: &RunRecord) -> [String; 11] {
    let s = &r.scenario;
    [
        r.method.to_string(),
        s.n.to_string(),
        s.k.to_string(),
        s.beta.to_string(),
        s.b.to_string(),
        s.seed.to_string(),
        format_metric(r.ari, r.failed()),
        format_metric(r.nmi, r.failed()),
        format!("{:.3}", r.runtime_ms),
        r.converged.to_string(),
        r.iterations.to_string(),
    ]
}

/// Writes records (with header) in the fixed column order. Failed runs have
/// empty `ari`/`nmi` fields.
pub fn write_records<W: Write>(records: &[RunRecord], out: W) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(RUN_COLUMNS)?;
    for r in records {
        writer.write_record(record_fields(r))?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(row: &csv::StringRecord, idx: usize, line: u64) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    row[idx].parse().map_err(|e| format!("line {line}, column {}: {e}", RUN_COLUMNS[idx]))
}

/// Reads a run-level CSV written by [`write_records`].
pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>, String> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().ne(RUN_COLUMNS) {
        return Err(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| e.to_string())?;
        let line = row.position().map_or(0, |p| p.line());
        let method: Method = parse_field(&row, 0, line)?;
        let scenario = ScenarioConfig {
            n: parse_field(&row, 1, line)?,
            k: parse_field(&row, 2, line)?,
            beta: parse_field(&row, 3, line)?,
            b: parse_field(&row, 4, line)?,
            seed: parse_field(&row, 5, line)?,
        };
        let failed = row[6].is_empty();
        let (ari, nmi) = if failed { (f64::NAN, f64::NAN) } else { (parse_field(&row, 6, line)?, parse_field(&row, 7, line)?) };
        out.push(RunRecord {
            method,
            scenario,
            ari,
            nmi,
            runtime_ms: parse_field(&row, 8, line)?,
            converged: parse_field(&row, 9, line)?,
            iterations: parse_field(&row, 10, line)?,
            error: failed.then(|| "failed".to_string()),
        });
    }
    Ok(out)
}

pub fn read_records_file(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let file = File::open(path)?;
    read_records(file).map_err(|message| HarnessError::Schema { path: path.to_path_buf(), message })
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` reads `SBMLAB_THREADS`, else rayon's default.
    pub threads: Option<usize>,
    /// Overrides the config's `output_path`.
    pub output: Option<PathBuf>,
}

fn thread_count(options: &SweepOptions) -> Option<usize> {
    options.threads.or_else(|| std::env::var(THREADS_ENV).ok()?.parse().ok()).filter(|&t| t > 0)
}

/// Every task of a sweep in canonical order: cells, then replicates, then
/// methods in config order.
pub fn sweep_tasks(config: &SweepConfig) -> Vec<(ScenarioConfig, Method)> {
    let mut tasks = Vec::with_capacity(config.task_count());
    for cell in config.cells() {
        for seed_index in 0..config.n_seeds {
            let scenario = ScenarioConfig {
                n: cell.n,
                k: cell.k,
                beta: cell.beta,
                b: cell.b,
                seed: scenario_seed(config.base_seed, &cell, seed_index),
            };
            for &method in &config.methods {
                tasks.push((scenario, method));
            }
        }
    }
    tasks
}

struct Sink {
    writer: Option<csv::Writer<File>>,
    error: Option<HarnessError>,
}

impl Sink {
    fn push(&mut self, record: &RunRecord) {
        if self.error.is_some() {
            return;
        }
        if let Some(w) = self.writer.as_mut() {
            if let Err(e) = w.write_record(record_fields(record)).and_then(|_| w.flush().map_err(Into::into)) {
                self.error = Some(e.into());
            }
        }
    }
}

fn open_sink(path: Option<&Path>) -> Result<(Sink, Vec<RunRecord>), HarnessError> {
    let Some(path) = path else {
        return Ok((Sink { writer: None, error: None }, Vec::new()));
    };
    let existing = if path.exists() && std::fs::metadata(path)?.len() > 0 { read_records_file(path)? } else { Vec::new() };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        writer.write_record(RUN_COLUMNS)?;
        writer.flush()?;
    }
    Ok((Sink { writer: Some(writer), error: None }, existing))
}

/// Runs every task of the sweep not already present in the output file.
///
/// Each replicate's instance is generated once and shared by all methods.
/// Rows are appended to the output as they finish; once the sweep completes
/// the file is rewritten in canonical task order. Returns the records of
/// all tasks in canonical order.
pub fn run_sweep(config: &SweepConfig, options: &SweepOptions) -> Result<Vec<RunRecord>, HarnessError> {
    config.validate()?;
    let output = options.output.clone().or_else(|| config.output_path.clone());
    let (sink, existing) = open_sink(output.as_deref())?;
    let mut done: HashMap<RunKey, RunRecord> = existing.into_iter().map(|r| (RunKey::of(&r), r)).collect();

    let tasks = sweep_tasks(config);
    let mut pending: Vec<(ScenarioConfig, Vec<Method>)> = Vec::new();
    for chunk in tasks.chunks(config.methods.len()) {
        let scenario = chunk[0].0;
        let missing: Vec<Method> = chunk
            .iter()
            .filter(|(s, m)| !done.contains_key(&RunKey::new(s, *m)))
            .map(|&(_, m)| m)
            .collect();
        if !missing.is_empty() {
            pending.push((scenario, missing));
        }
    }

    let sink = Mutex::new(sink);
    let settings = &config.settings;
    let work = || -> Vec<RunRecord> {
        pending
            .par_iter()
            .flat_map_iter(|(scenario, methods)| {
                let records: Vec<RunRecord> = match generate(scenario) {
                    Ok(instance) => methods.iter().map(|&m| run_on_instance(&instance, m, settings)).collect(),
                    Err(e) => methods.iter().map(|&m| failed_record(m, *scenario, 0.0, e.to_string())).collect(),
                };
                let mut sink = sink.lock().unwrap_or_else(|p| p.into_inner());
                records.iter().for_each(|r| sink.push(r));
                records
            })
            .collect()
    };
    let fresh = match thread_count(options) {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HarnessError::Threads(e.to_string()))?
            .install(work),
        None => work(),
    };
    let sink = sink.into_inner().unwrap_or_else(|p| p.into_inner());
    if let Some(e) = sink.error {
        return Err(e);
    }
    drop(sink);

    for r in fresh {
        done.insert(RunKey::of(&r), r);
    }
    let ordered: Vec<RunRecord> =
        tasks.iter().filter_map(|(s, m)| done.remove(&RunKey::new(s, *m))).collect();
    if let Some(path) = output {
        // rows outside this config stay in the file, after the canonical block
        let mut extra: Vec<RunRecord> = done.into_values().collect();
        extra.sort_by_key(|r| (r.scenario.n, r.scenario.k, r.scenario.beta.to_bits(), r.scenario.b.to_bits(), r.scenario.seed, r.method));
        let tmp = path.with_extension("csv.tmp");
        write_records(&[ordered.as_slice(), extra.as_slice()].concat(), File::create(&tmp)?)?;
        std::fs::rename(&tmp, &path)?;
    }
    Ok(ordered)
}
