use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sbmlab_core::generator::generate;
use sbmlab_core::gibbs::run_gibbs;
use sbmlab_core::harness::{
    aggregate, emit_plot_data, parse_config, ranking_report, read_records_file, read_summary, run_method, run_sweep,
    MethodSettings, SweepOptions,
};
use sbmlab_core::io::{read_labels_file, read_matrix_market_file, write_labels, write_matrix_market, write_metadata, InstanceMetadata};
use sbmlab_core::metrics::{ari, nmi};
use sbmlab_core::model::{Method, ScenarioConfig};
use sbmlab_core::rng::seeded_rng;
use sbmlab_core::vb::run_vb;
use sbmlab_core::vem::{run_vem, VemModel};

type CliResult<T = ()> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "sbmlab", version, about = "Stochastic block model community detection benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one planted-partition instance and write it to a directory.
    Generate(GenerateArgs),
    /// Run one method on a graph file.
    Run(RunArgs),
    /// Run a full grid from a config file.
    Sweep(SweepArgs),
    /// Summarize a run-level CSV into summary, long-format and ranking files.
    Aggregate(AggregateArgs),
    /// Print the per-cell ranking from a summary CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    /// Sparsity exponent; edge rate is n^-b.
    #[arg(long)]
    b: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives graph.mtx, truth.txt and meta.json.
    #[arg(long)]
    out_dir: PathBuf,
}

/// Method parameter overrides shared by `run` and `sweep`.
#[derive(Args)]
struct MethodArgs {
    #[arg(long)]
    score_clip: Option<f64>,
    /// RSC regularizer: a positive number, or `degree` for the total degree.
    #[arg(long)]
    rsc_tau: Option<String>,
    #[arg(long)]
    gibbs_iters: Option<usize>,
    #[arg(long)]
    gibbs_burnin: Option<usize>,
    #[arg(long)]
    gibbs_a: Option<f64>,
    #[arg(long)]
    gibbs_b: Option<f64>,
    /// Use Beta(a + A, 1 + n - A) for every block instead of the exact update.
    #[arg(long)]
    paper_literal_beta: bool,
    #[arg(long)]
    vb_beta: Option<f64>,
    #[arg(long)]
    vb_max_iter: Option<usize>,
    #[arg(long)]
    vb_tol: Option<f64>,
    #[arg(long)]
    vem_tol: Option<f64>,
    #[arg(long)]
    vem_max_iter: Option<usize>,
}

impl MethodArgs {
    fn apply(&self, s: &mut MethodSettings) -> CliResult {
        if let Some(c) = self.score_clip {
            s.spectral.score_clip = Some(c);
        }
        if let Some(t) = &self.rsc_tau {
            s.spectral.rsc_tau = match t.as_str() {
                "degree" => None,
                x => Some(x.parse().map_err(|_| format!("--rsc-tau expects a number or `degree`, got `{x}`"))?),
            };
        }
        let g = &mut s.gibbs;
        g.n_iter = self.gibbs_iters.unwrap_or(g.n_iter);
        g.burn_in = self.gibbs_burnin.unwrap_or(g.burn_in);
        g.a = self.gibbs_a.unwrap_or(g.a);
        g.b = self.gibbs_b.unwrap_or(g.b);
        g.paper_literal_beta |= self.paper_literal_beta;
        s.vb.beta = self.vb_beta.unwrap_or(s.vb.beta);
        s.vb.max_iter = self.vb_max_iter.unwrap_or(s.vb.max_iter);
        s.vb.tol = self.vb_tol.unwrap_or(s.vb.tol);
        s.vem.tol = self.vem_tol.unwrap_or(s.vem.tol);
        s.vem.max_iter = self.vem_max_iter.unwrap_or(s.vem.max_iter);
        s.validate()?;
        Ok(())
    }
}

#[derive(Args)]
struct RunArgs {
    /// Matrix Market adjacency (coordinate pattern, symmetric).
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    k: usize,
    /// SC, SCORE, L2, RSC, GIBBS, VB, VEMB or VEMG.
    #[arg(long)]
    method: Method,
    /// `bernoulli` or `gaussian`; with `--method VEM...` selects the emission model.
    #[arg(long)]
    vem_model: Option<VemModel>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ground-truth labels (1-based, one per line); enables ARI/NMI output.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the inferred labels (1-based) here.
    #[arg(long)]
    labels_out: Option<PathBuf>,
    /// Write the per-iteration trace CSV here (GIBBS, VB, VEMB, VEMG).
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[command(flatten)]
    params: MethodArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run-level CSV; defaults to the config's output_path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (also settable through SBMLAB_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    params: MethodArgs,
}

#[derive(Args)]
struct AggregateArgs {
    /// Run-level CSV produced by `sweep`.
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    summary: PathBuf,
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| format!("{}: {e}", path.display()))?))
}

fn cmd_generate(args: GenerateArgs) -> CliResult {
    let scenario = ScenarioConfig::new(args.n, args.k, args.beta, args.b, args.seed)?;
    let inst = generate(&scenario)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let mut graph = create(&args.out_dir.join("graph.mtx"))?;
    write_matrix_market(&inst.adjacency, &mut graph)?;
    graph.flush()?;
    let mut truth = create(&args.out_dir.join("truth.txt"))?;
    write_labels(&inst.truth, &mut truth)?;
    truth.flush()?;
    let meta = InstanceMetadata {
        n: args.n,
        k: args.k,
        beta: args.beta,
        b: args.b,
        seed: args.seed,
        rho: scenario.rho(),
        alpha: inst.proportions.as_slice().to_vec(),
    };
    write_metadata(&meta, create(&args.out_dir.join("meta.json"))?)?;
    println!("wrote {} nodes, {} edges to {}", args.n, inst.adjacency.edge_count(), args.out_dir.display());
    Ok(())
}

fn write_trace(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> CliResult {
    let mut out = create(path)?;
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult {
    let a = read_matrix_market_file(&args.graph)?;
    let mut settings = MethodSettings::default();
    args.params.apply(&mut settings)?;
    let method = match (args.method, args.vem_model) {
        (Method::Vemb | Method::Vemg, Some(VemModel::Bernoulli)) => Method::Vemb,
        (Method::Vemb | Method::Vemg, Some(VemModel::Gaussian)) => Method::Vemg,
        (m, Some(_)) => return Err(format!("--vem-model only applies to VEMB/VEMG, not {m}").into()),
        (m, None) => m,
    };
    let rng = seeded_rng(args.seed, 0);
    let start = std::time::Instant::now();
    let (assignment, converged, iterations) = match (method, &args.trace_out) {
        (Method::Gibbs, Some(path)) => {
            let out = run_gibbs(&a, args.k, &settings.gibbs_config(), rng)?;
            write_trace(path, "sweep,log_posterior", out.trace.iter().enumerate().map(|(i, lp)| format!("{},{lp}", i + 1)))?;
            (out.assignment, true, out.sweeps)
        }
        (Method::Vb, Some(path)) => {
            let out = run_vb(&a, args.k, &settings.vb_config(), rng)?;
            write_trace(path, "t,objective,labels_changed", out.trace.iter().map(|r| format!("{},{},{}", r.t, r.objective, r.labels_changed)))?;
            (out.assignment, out.converged, out.iterations)
        }
        (Method::Vemb | Method::Vemg, Some(path)) => {
            let model = if method == Method::Vemb { VemModel::Bernoulli } else { VemModel::Gaussian };
            let out = run_vem(&a, args.k, &settings.vem_config(model), rng)?;
            write_trace(
                path,
                "cycle,objective,max_tau_change,entropy",
                out.trace.iter().map(|r| format!("{},{},{},{}", r.cycle, r.objective, r.max_tau_change, r.entropy)),
            )?;
            (out.assignment, out.converged, out.iterations)
        }
        (m, Some(_)) => return Err(format!("{m} has no iteration trace").into()),
        (m, None) => {
            let out = run_method(&a, args.k, m, &settings, rng)?;
            (out.assignment, out.converged, out.iterations)
        }
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    if let Some(path) = &args.labels_out {
        let mut out = create(path)?;
        write_labels(&assignment, &mut out)?;
        out.flush()?;
    }
    print!("method={method} n={} k={} converged={converged} iterations={iterations} runtime_ms={elapsed:.1}", a.n(), args.k);
    if let Some(path) = &args.truth {
        let truth = read_labels_file(path, None)?;
        println!(" ari={:.6} nmi={:.6}", ari(&truth, &assignment)?, nmi(&truth, &assignment)?);
    } else {
        println!();
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let mut config = parse_config(&args.config)?;
    args.params.apply(&mut config.settings)?;
    let options = SweepOptions { threads: args.threads, output: args.output };
    let output = options.output.clone().or_else(|| config.output_path.clone());
    eprintln!("{} tasks", config.task_count());
    let records = run_sweep(&config, &options)?;
    let failed = records.iter().filter(|r| r.failed()).count();
    println!("{} runs, {failed} failed", records.len());
    if let Some(path) = output {
        println!("records in {}", path.display());
    }
    Ok(())
}

fn cmd_aggregate(args: AggregateArgs) -> CliResult {
    let records = read_records_file(&args.runs)?;
    if records.is_empty() {
        return Err(format!("{} has no runs", args.runs.display()).into());
    }
    let summaries = aggregate(&records);
    let files = emit_plot_data(&summaries, &records, &args.out_dir)?;
    println!("{}\n{}\n{}", files.summary.display(), files.long.display(), files.ranking.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CliResult {
    let file = File::open(&args.summary).map_err(|e| format!("{}: {e}", args.summary.display()))?;
    let rows = read_summary(file).map_err(|e| format!("{}: {e}", args.summary.display()))?;
    print!("{}", ranking_report(&rows));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Aggregate(a) => cmd_aggregate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
