//! Command-line front end: run a test on user data, sweep simulation grids,
//! generate model samples, perturb existing graphs.
//!
//! Exit codes for `test`: 0 accept, 1 reject, 2 error. Other subcommands
//! exit 0 on success, 2 on error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use graph2sample::clustering::load_partition;
use graph2sample::graph::{load_edge_list, load_population_manifest, save_edge_list, PopulationManifest};
use graph2sample::harness::{run_experiment, ExperimentSpec, TestKind};
use graph2sample::models::{
    plant_er_subgraph, sample_ier, sbm_population_adjacency, scale_density, toggle_edges, SbmSpec,
};
use graph2sample::multi::{
    test_asymp_chi2, test_asymp_normal, test_boot, BootStatistic, BootstrapConfig,
    MultiSampleInput,
};
use graph2sample::single::{test_asymp_tw, test_boot_single, SingleBootStatistic, TwOptions};
use graph2sample::{Error, Graph, GraphPopulation, Seed, TestOutcome};

#[derive(Parser)]
#[command(name = "graph2sample", about = "Two-sample hypothesis tests for graphs", version)]
struct Cli {
    /// Base RNG seed for anything stochastic (bootstraps, clustering, sampling).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Serialization format for results.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one hypothesis test on two graph inputs.
    Test(TestArgs),
    /// Run a Monte-Carlo power sweep from a JSON config.
    Simulate(SimulateArgs),
    /// Sample graphs from a two-block SBM (or ER when q is omitted).
    Generate(GenerateArgs),
    /// Apply a perturbation operator to an edge list.
    Perturb(PerturbArgs),
}

#[derive(Args)]
struct TestArgs {
    /// One of: asymp-normal, asymp-tw, asymp-chi2, boot-spectral,
    /// boot-frobenius, boot-ase, boot-epa.
    #[arg(long = "test", value_parser = parse_test_kind)]
    which: TestKind,

    /// First input: edge-list file (requires --n).
    #[arg(long)]
    g: Option<PathBuf>,
    /// Second input: edge-list file (requires --n).
    #[arg(long)]
    h: Option<PathBuf>,
    /// Vertex count for edge-list inputs.
    #[arg(long)]
    n: Option<usize>,

    /// First input: population manifest (JSON).
    #[arg(long)]
    g_manifest: Option<PathBuf>,
    /// Second input: population manifest (JSON).
    #[arg(long)]
    h_manifest: Option<PathBuf>,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Bootstrap replicates.
    #[arg(long, default_value_t = 200)]
    b: usize,

    /// Embedding rank / block count for the single-sample tests.
    #[arg(long, default_value_t = 2)]
    rank: usize,

    /// Community file for asymp-tw (one block id per line); estimated
    /// spectrally when omitted.
    #[arg(long)]
    communities: Option<PathBuf>,

    /// Extra report fields; `neglog` adds -ln(p).
    #[arg(long)]
    report: Option<ReportKind>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Neglog,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON experiment description (grids, trials, tests, alpha, seed).
    #[arg(long)]
    config: PathBuf,

    /// Write the power table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Override the trial count from the config.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,

    /// Graphs to sample.
    #[arg(long, default_value_t = 1)]
    m: usize,

    /// Within-block edge probability (the ER probability when --q is absent).
    #[arg(long)]
    p: f64,

    /// Between-block probability; presence selects the two-block model.
    #[arg(long)]
    q: Option<f64>,

    /// Shift added to p (alternative-hypothesis samples).
    #[arg(long, default_value_t = 0.0)]
    eps: f64,

    /// Density scaling applied to every edge probability.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,

    /// Directory receiving graph_<k>.edges files plus manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    n: usize,

    /// Flip this many uniformly chosen vertex pairs.
    #[arg(long)]
    toggle: Option<usize>,

    /// Replant the subgraph on a random k-subset of this size...
    #[arg(long)]
    plant: Option<usize>,
    /// ...as Erdos-Renyi with this edge probability.
    #[arg(long)]
    p_er: Option<f64>,

    #[arg(long)]
    out: PathBuf,
}

fn parse_test_kind(s: &str) -> Result<TestKind, String> {
    TestKind::from_str(s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let seed = Seed(cli.seed);
    let result = match &cli.command {
        Command::Test(args) => return run_test(args, seed, cli.output),
        Command::Simulate(args) => run_simulate(args, seed, cli.output),
        Command::Generate(args) => run_generate(args, seed),
        Command::Perturb(args) => run_perturb(args, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_graph(path: &Path, n: usize) -> Result<Graph, Error> {
    let report = load_edge_list(path, n)?;
    if report.self_loops_dropped > 0 {
        eprintln!(
            "warning: dropped {} self-loop(s) from {}",
            report.self_loops_dropped,
            path.display()
        );
    }
    Ok(report.graph)
}

/// Load a population from either input style.
fn load_population(
    edge_list: &Option<PathBuf>,
    n: Option<usize>,
    manifest: &Option<PathBuf>,
    which: &str,
) -> Result<GraphPopulation, Error> {
    match (edge_list, manifest) {
        (Some(path), None) => {
            let n = n.ok_or_else(|| {
                Error::InvalidParameter(format!("--n is required with --{which}"))
            })?;
            GraphPopulation::new(vec![load_graph(path, n)?])
        }
        (None, Some(path)) => load_population_manifest(path),
        _ => Err(Error::InvalidParameter(format!(
            "provide exactly one of --{which} or --{which}-manifest"
        ))),
    }
}

/// A single graph for the single-sample tests; manifests are accepted but
/// only their first member is used.
fn first_graph(pop: GraphPopulation, which: &str) -> Graph {
    if pop.m() > 1 {
        eprintln!(
            "warning: {which} input has {} graphs; single-sample test uses the first",
            pop.m()
        );
    }
    pop.graphs()[0].clone()
}

fn run_test(args: &TestArgs, seed: Seed, output: OutputFormat) -> ExitCode {
    match execute_test(args, seed) {
        Ok(outcome) => {
            let neglog = matches!(args.report, Some(ReportKind::Neglog));
            print_outcome(&outcome, output, neglog);
            if outcome.reject {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute_test(args: &TestArgs, seed: Seed) -> Result<TestOutcome, Error> {
    let g = load_population(&args.g, args.n, &args.g_manifest, "g")?;
    let h = load_population(&args.h, args.n, &args.h_manifest, "h")?;
    let boot = BootstrapConfig { b: args.b, seed };
    let linalg = graph2sample::linalg::LinalgConfig::default();
    match args.which {
        TestKind::AsympNormal => test_asymp_normal(&MultiSampleInput::new(&g, &h)?, args.alpha),
        TestKind::AsympChi2 => test_asymp_chi2(&MultiSampleInput::new(&g, &h)?, args.alpha),
        TestKind::BootSpectral => test_boot(
            &MultiSampleInput::new(&g, &h)?,
            BootStatistic::Spectral,
            args.alpha,
            &boot,
        ),
        TestKind::BootFrobenius => test_boot(
            &MultiSampleInput::new(&g, &h)?,
            BootStatistic::Frobenius,
            args.alpha,
            &boot,
        ),
        TestKind::AsympTw => {
            let partition = match &args.communities {
                Some(path) => Some(load_partition(path)?),
                None => None,
            };
            let opts = TwOptions::new(args.rank, seed);
            test_asymp_tw(
                &first_graph(g, "--g"),
                &first_graph(h, "--h"),
                args.alpha,
                partition.as_ref(),
                &opts,
            )
        }
        TestKind::BootAse => test_boot_single(
            &first_graph(g, "--g"),
            &first_graph(h, "--h"),
            SingleBootStatistic::Ase,
            args.rank,
            args.alpha,
            &boot,
            &linalg,
        ),
        TestKind::BootEpa => test_boot_single(
            &first_graph(g, "--g"),
            &first_graph(h, "--h"),
            SingleBootStatistic::Epa,
            args.rank,
            args.alpha,
            &boot,
            &linalg,
        ),
    }
}

fn print_outcome(outcome: &TestOutcome, output: OutputFormat, neglog: bool) {
    let neglog_p = -outcome.p_value.ln();
    match output {
        OutputFormat::Json => {
            let mut value = serde_json::to_value(outcome).expect("outcome serializes");
            if neglog {
                value["neglog_p"] = serde_json::json!(neglog_p);
            }
            println!("{}", serde_json::to_string_pretty(&value).expect("json renders"));
        }
        OutputFormat::Csv => {
            let mut header = String::from("test,statistic,p_value,alpha,reject");
            let mut row = format!(
                "{},{},{},{},{}",
                outcome.test_name, outcome.statistic, outcome.p_value, outcome.alpha,
                outcome.reject
            );
            if neglog {
                header.push_str(",neglog_p");
                row.push_str(&format!(",{neglog_p}"));
            }
            println!("{header}");
            println!("{row}");
        }
    }
}

fn run_simulate(args: &SimulateArgs, seed: Seed, output: OutputFormat) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
    // the global --seed fills in when the config does not pin one
    if value.get("seed").is_none() {
        value["seed"] = serde_json::json!(seed.0);
    }
    let mut spec: ExperimentSpec =
        serde_json::from_value(value).map_err(|e| Error::Manifest(e.to_string()))?;
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    let table = run_experiment(&spec)?;
    let rendered = match output {
        OutputFormat::Json => table.to_json(),
        OutputFormat::Csv => table.to_csv(),
    };
    match &args.out {
        Some(path) => std::fs::write(path, rendered)?,
        None => println!("{rendered}"),
    }
    Ok(())
}

fn run_generate(args: &GenerateArgs, seed: Seed) -> Result<(), Error> {
    let spec = match args.q {
        Some(q) => SbmSpec::two_block(args.n, args.p + args.eps, q)?,
        None => SbmSpec::new(vec![args.n], vec![vec![args.p + args.eps]])?,
    };
    let (pa, clamped) = scale_density(&sbm_population_adjacency(&spec), args.rho)?;
    if clamped > 0 {
        eprintln!("warning: density scaling clamped {clamped} pair probabilities");
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let mut names = Vec::with_capacity(args.m);
    for k in 0..args.m {
        let graph = sample_ier(&pa, seed.derive(&[k as u64]));
        let name = format!("graph_{k:03}.edges");
        save_edge_list(&graph, &args.out_dir.join(&name))?;
        names.push(name);
    }
    let manifest = PopulationManifest { n: args.n, graphs: names };
    let manifest_path = args.out_dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    println!("{}", manifest_path.display());
    Ok(())
}

fn run_perturb(args: &PerturbArgs, seed: Seed) -> Result<(), Error> {
    let graph = load_graph(&args.input, args.n)?;
    let out = match (args.toggle, args.plant, args.p_er) {
        (Some(count), None, None) => toggle_edges(&graph, count, seed)?,
        (None, Some(k), Some(p_er)) => plant_er_subgraph(&graph, k, p_er, seed)?,
        _ => {
            return Err(Error::InvalidParameter(
                "use either --toggle COUNT or --plant K with --p-er P".into(),
            ))
        }
    };
    save_edge_list(&out, &args.out)?;
    Ok(())
}
