use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use partclust_cli::gen::{planted_clusters, uncertain_planted, PlantedParams};
use partclust_cli::io::{self, load_labels, InputFormat};
use partclust_cli::{Algorithm, CliError, ExperimentConfig, ObjectiveArg, Outcome, PartitionRule};

/// Distributed partial clustering experiments.
///
/// Exit codes: 0 success, 1 internal error, 2 unreadable input or bad
/// arguments, 3 infeasible instance, 4 instance too large for the exact
/// oracle or evaluator.
#[derive(Parser)]
#[command(name = "partclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a clustering algorithm and print its report.
    Solve(SolveArgs),
    /// Compute the exact optimum by enumeration.
    Oracle(SolveArgs),
    /// Write a synthetic dataset.
    Gen(GenArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value = "kt-median")]
    alg: Algorithm,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    t: u64,
    #[arg(long, default_value_t = 1)]
    sites: usize,
    #[arg(long, value_enum, default_value = "round-robin")]
    partition: PartitionRule,
    /// Site label per item, one per line (with --partition by-file).
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Dump every message as newline-delimited JSON.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Include wall-clock timings (makes reports run-dependent).
    #[arg(long)]
    timings: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    input_format: InputFormat,
    /// Universe points for uncertain-jsonl input.
    #[arg(long)]
    universe: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GenKind {
    PlantedClusters,
    UncertainPlanted,
}

#[derive(Args)]
struct GenArgs {
    kind: GenKind,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 20)]
    outliers: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
    /// Scatter of an uncertain node's atoms around its point.
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points (or nodes) file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Universe points file for uncertain-planted.
    #[arg(long)]
    universe_output: Option<PathBuf>,
    /// Ground truth: `{"id", "cluster"}` per line, cluster null for outliers.
    #[arg(long)]
    truth: Option<PathBuf>,
}

fn config(a: &SolveArgs) -> ExperimentConfig {
    ExperimentConfig {
        algorithm: a.alg,
        k: a.k,
        t: a.t,
        sites: a.sites,
        partition: a.partition,
        rho: a.rho,
        epsilon: a.epsilon,
        delta: a.delta,
        alpha: a.alpha,
        objective: a.objective,
        seed: a.seed,
    }
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run_solve(a: &SolveArgs, oracle: bool) -> Result<(), CliError> {
    let cfg = config(a);
    let data = io::load(&a.input, a.input_format, a.universe.as_deref())?;
    let labels = a.labels.as_deref().map(load_labels).transpose()?;
    let work = || -> Result<Outcome, CliError> {
        if oracle {
            partclust_cli::oracle(&cfg, &data, a.timings)
        } else {
            partclust_cli::solve(&cfg, &data, labels.as_deref(), a.timings)
        }
    };
    let outcome = match a.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    if let Some(path) = &a.transcript {
        match &outcome.ledger {
            Some(l) => l.write_transcript(BufWriter::new(File::create(path)?))?,
            None => eprintln!("note: {} exchanges no messages; no transcript written", outcome.report.algorithm),
        }
    }
    let text = match a.format {
        Format::Json => outcome.report.to_json(),
        Format::Csv => outcome.report.to_csv(),
    };
    let mut out = sink(a.output.as_deref())?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run_gen(a: &GenArgs) -> Result<(), CliError> {
    let params = PlantedParams {
        n: a.n,
        clusters: a.clusters,
        outliers: a.outliers,
        dim: a.dim,
        sigma: a.sigma,
        seed: a.seed,
    };
    let (labels, ids) = match a.kind {
        GenKind::PlantedClusters => {
            let g = planted_clusters(&params).map_err(CliError::Usage)?;
            let mut out = sink(a.output.as_deref())?;
            io::write_points(&g.points, &mut out)?;
            out.flush()?;
            let ids: Vec<u64> = g.points.records.iter().map(|r| r.id).collect();
            (g.labels, ids)
        }
        GenKind::UncertainPlanted => {
            let Some(upath) = &a.universe_output else {
                return Err(CliError::Usage("uncertain-planted needs --universe-output".into()));
            };
            let g = uncertain_planted(&params, a.spread).map_err(CliError::Usage)?;
            let mut u = BufWriter::new(File::create(upath)?);
            io::write_points(&g.data.universe, &mut u)?;
            u.flush()?;
            let mut out = sink(a.output.as_deref())?;
            io::write_uncertain(&g.data.records, &mut out)?;
            out.flush()?;
            let ids: Vec<u64> = g.data.records.iter().map(|r| r.id).collect();
            (g.labels, ids)
        }
    };
    if let Some(path) = &a.truth {
        let mut out = BufWriter::new(File::create(path)?);
        for (id, l) in ids.iter().zip(&labels) {
            serde_json::to_writer(&mut out, &serde_json::json!({ "id": id, "cluster": l }))
                .map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a, false),
        Command::Oracle(a) => run_solve(a, true),
        Command::Gen(a) => run_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
