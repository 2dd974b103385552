//! Command-line interface: kernel density queries, similarity-graph
//! clustering, an error-versus-cost benchmark harness, and dataset
//! generation.
//!
//! Every command takes an explicit seed and produces byte-identical
//! output when rerun with the same arguments (benchmark wall-clock
//! fields are the one exception; pass `--no-timing` to drop them).
//! Output files are only written after the whole computation has
//! succeeded, so a failing run leaves no partial files behind.

mod bench;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kdegraph::cluster::{
    approximate_similarity_graph_with, similarity_graph, spectral_cluster, ApproxGraphParams,
};
use kdegraph::kde::{CknsGaussianKde, CknsParams, ExactKde};
use kdegraph::{load_matrix, save_matrix, DenseMatrix};

#[derive(Parser)]
#[command(
    name = "kdegraph",
    about = "Kernel density estimation and similarity-graph clustering",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate kernel densities for a query set.
    Kde(KdeArgs),
    /// Build a similarity graph and spectral-cluster it.
    Cluster(ClusterArgs),
    /// Grid benchmark: average relative error versus query cost.
    BenchKde(bench::BenchArgs),
    /// Generate a labelled synthetic dataset.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KdeMethod {
    Exact,
    Ckns,
}

#[derive(Args)]
struct KdeArgs {
    /// Dataset file (one point per line, space or comma separated).
    #[arg(long)]
    input: PathBuf,
    /// Query file in the same format.
    #[arg(long, conflicts_with = "self_queries")]
    queries: Option<PathBuf>,
    /// Use the dataset itself as the query set.
    #[arg(long = "self", conflicts_with = "queries")]
    self_queries: bool,
    #[arg(long, value_enum)]
    method: KdeMethod,
    /// Gaussian kernel bandwidth.
    #[arg(long)]
    a: f64,
    /// Accuracy parameter of the hash-based estimator.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    /// Assumed minimum query density (default 1/n).
    #[arg(long = "min-mu")]
    min_mu: Option<f64>,
    /// Number of independent estimator copies (default derived from eps).
    #[arg(long)]
    k1: Option<usize>,
    /// Hash-function count multiplier.
    #[arg(long = "k2-constant", default_value_t = 5.0)]
    k2_constant: f64,
    /// Extra subsampling exponent.
    #[arg(long = "p-offset", default_value_t = 0)]
    p_offset: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Densities are written here, one per query line.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphKind {
    Full,
    Approx,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    input: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Gaussian kernel bandwidth.
    #[arg(long)]
    a: f64,
    /// Similarity graph construction.
    #[arg(long, value_enum, default_value = "approx")]
    graph: GraphKind,
    /// Neighbour samples per vertex for the approximate graph
    /// (default ceil(4 * log2 n)).
    #[arg(long)]
    t: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Cluster ids are written here, one integer per input line.
    #[arg(long = "labels-output")]
    labels_output: PathBuf,
    /// Optional edge-list dump of the similarity graph ("i j w" lines).
    #[arg(long = "graph-output")]
    graph_output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DatasetKind {
    Blobs,
    Moons,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: DatasetKind,
    /// Number of points.
    #[arg(long)]
    n: usize,
    /// Dimension (blobs only; moons are planar).
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Number of clusters (blobs only; moons have two).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Dataset file to write.
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth labels file (default: OUTPUT.labels).
    #[arg(long = "labels-output")]
    labels_output: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Kde(args) => run_kde(args),
        Command::Cluster(args) => run_cluster(args),
        Command::BenchKde(args) => bench::run(args),
        Command::Generate(args) => run_generate(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run_kde(args: KdeArgs) -> Result<()> {
    let data = load_matrix(&args.input).context("loading dataset")?;
    let queries = match (&args.queries, args.self_queries) {
        (Some(path), false) => load_matrix(path).context("loading queries")?,
        (None, true) => data.clone(),
        (None, false) => bail!("pass --queries <FILE> or --self"),
        (Some(_), true) => unreachable!("clap enforces exclusivity"),
    };

    let densities = match args.method {
        KdeMethod::Exact => {
            let kde = ExactKde::gaussian(data, args.a)?;
            kde.query_batch(&queries)?
        }
        KdeMethod::Ckns => {
            let params = CknsParams {
                eps: args.eps,
                min_mu: args.min_mu,
                k1: args.k1,
                k2_constant: args.k2_constant,
                p_offset: args.p_offset,
                ..CknsParams::default()
            };
            let kde = CknsGaussianKde::with_params(data, args.a, &params, args.seed)?;
            kde.query_batch(&queries)?
        }
    };

    let mut out = String::with_capacity(densities.len() * 20);
    for v in &densities {
        let _ = writeln!(out, "{v}");
    }
    fs::write(&args.output, out).with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}

fn run_cluster(args: ClusterArgs) -> Result<()> {
    let data = load_matrix(&args.input).context("loading dataset")?;
    let graph = match args.graph {
        GraphKind::Full => similarity_graph(&data, args.a)?,
        GraphKind::Approx => {
            let params = ApproxGraphParams {
                samples_per_vertex: args.t,
                ..ApproxGraphParams::default()
            };
            approximate_similarity_graph_with(&data, args.a, args.seed, &params)?
        }
    };
    let labels = spectral_cluster(&graph, args.k, args.seed)?;

    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels.as_slice() {
        let _ = writeln!(out, "{l}");
    }
    fs::write(&args.labels_output, out)
        .with_context(|| format!("writing {}", args.labels_output.display()))?;
    if let Some(path) = &args.graph_output {
        let mut buf = Vec::new();
        graph.write_edge_list(&mut buf)?;
        fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let (matrix, labels): (DenseMatrix, Vec<usize>) = match args.kind {
        DatasetKind::Blobs => {
            kdegraph::synth::blobs(args.n, args.d, args.k, args.noise, args.seed)?
        }
        DatasetKind::Moons => {
            if args.d != 2 {
                bail!("moons are two-dimensional; drop --d or pass --d 2");
            }
            if args.k != 2 {
                bail!("moons have exactly two clusters; drop --k or pass --k 2");
            }
            kdegraph::synth::moons(args.n, args.noise, args.seed)?
        }
    };
    let labels_path = args.labels_output.clone().unwrap_or_else(|| {
        let mut p = args.output.as_os_str().to_owned();
        p.push(".labels");
        PathBuf::from(p)
    });

    save_matrix(&matrix, &args.output)?;
    let mut out = String::with_capacity(labels.len() * 3);
    for l in &labels {
        let _ = writeln!(out, "{l}");
    }
    fs::write(&labels_path, out).with_context(|| format!("writing {}", labels_path.display()))?;
    Ok(())
}
