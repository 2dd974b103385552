//! Error-versus-cost benchmark for the kernel density estimators.
//!
//! The harness samples `m` query points uniformly without replacement
//! from the dataset, computes exact densities once as ground truth,
//! then runs every grid configuration of the hash-based estimator and
//! records its average relative error
//! `(1/m) * sum_i |est_i - truth_i| / truth_i`, kernel-evaluation
//! counts (the machine-independent cost), and wall-clock timings
//! (median of three query repetitions). Records are sorted by error,
//! best first.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use kdegraph::kde::{CknsGaussianKde, CknsParams, ExactKde};
use kdegraph::{load_matrix, DenseMatrix};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long)]
    input: PathBuf,
    /// Query-set size, sampled uniformly without replacement.
    #[arg(long)]
    m: usize,
    /// Grid over estimator parameters, e.g.
    /// "k1=4,16;k2=2,5;p=0,1;mu=0.001". Keys: k1, k2 (k2_constant),
    /// p (p_offset), mu (min_mu). Omitted keys use the defaults; an
    /// empty string benchmarks the default configuration only.
    #[arg(long, default_value = "")]
    grid: String,
    /// Gaussian kernel bandwidth.
    #[arg(long)]
    a: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report file to write.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    /// Drop wall-clock fields so reruns are byte-identical.
    #[arg(long = "no-timing")]
    no_timing: bool,
    /// Also write each configuration's densities into this directory.
    #[arg(long = "densities-dir")]
    densities_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct GridConfig {
    k1: Option<usize>,
    k2_constant: f64,
    p_offset: u32,
    min_mu: Option<f64>,
}

#[derive(Serialize)]
struct Record {
    method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    k1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k2_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_offset: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_mu: Option<f64>,
    avg_rel_err: f64,
    kernel_evals: u64,
    kernel_evals_per_query: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    build_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    query_seconds_median: Option<f64>,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    densities_file: Option<String>,
}

#[derive(Serialize)]
struct Report {
    input: String,
    n: usize,
    d: usize,
    m: usize,
    a: f64,
    seed: u64,
    grid: String,
    records: Vec<Record>,
}

pub fn run(args: BenchArgs) -> Result<()> {
    let data = load_matrix(&args.input).context("loading dataset")?;
    let n = data.rows();
    if args.m == 0 || args.m > n {
        bail!("m must lie in [1, {n}], got {}", args.m);
    }
    let configs = parse_grid(&args.grid)?;

    // Uniform sample without replacement: partial Fisher-Yates.
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for i in 0..args.m {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    let queries = {
        let mut rows = Vec::with_capacity(args.m);
        for &i in &indices[..args.m] {
            rows.push(data.row(i).to_vec());
        }
        DenseMatrix::from_rows(&rows)?
    };

    if let Some(dir) = &args.densities_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let mut records = Vec::with_capacity(configs.len() + 1);

    // Ground truth, plus the exact method's own cost record.
    let exact = ExactKde::gaussian(data.clone(), args.a)?;
    let build_start = Instant::now();
    let exact_build = build_start.elapsed().as_secs_f64();
    let (truth, exact_evals, exact_median) = timed_queries(|| exact.query_batch(&queries), &exact)?;
    records.push(Record {
        method: "exact",
        k1: None,
        k2_constant: None,
        p_offset: None,
        min_mu: None,
        avg_rel_err: 0.0,
        kernel_evals: exact_evals,
        kernel_evals_per_query: exact_evals as f64 / args.m as f64,
        build_seconds: (!args.no_timing).then_some(exact_build),
        query_seconds_median: (!args.no_timing).then_some(exact_median / args.m as f64),
        seed: args.seed,
        densities_file: write_densities(&args, "exact", &truth)?,
    });

    for (idx, config) in configs.iter().enumerate() {
        let params = CknsParams {
            k1: config.k1,
            k2_constant: config.k2_constant,
            p_offset: config.p_offset,
            min_mu: config.min_mu,
            ..CknsParams::default()
        };
        let build_seed = kdegraph_bench_seed(args.seed, idx);
        let start = Instant::now();
        let kde = CknsGaussianKde::with_params(data.clone(), args.a, &params, build_seed)?;
        let build_seconds = start.elapsed().as_secs_f64();
        let (estimates, evals, median) = timed_queries(|| kde.query_batch(&queries), &kde)?;
        let mut err = 0.0;
        for (e, t) in estimates.iter().zip(truth.iter()) {
            err += (e - t).abs() / t;
        }
        err /= args.m as f64;
        let name = format!("config_{idx:03}");
        records.push(Record {
            method: "ckns",
            k1: Some(kde.copy_count()),
            k2_constant: Some(config.k2_constant),
            p_offset: Some(config.p_offset),
            min_mu: Some(kde.min_mu()),
            avg_rel_err: err,
            kernel_evals: evals,
            kernel_evals_per_query: evals as f64 / args.m as f64,
            build_seconds: (!args.no_timing).then_some(build_seconds),
            query_seconds_median: (!args.no_timing).then_some(median / args.m as f64),
            seed: build_seed,
            densities_file: write_densities(&args, &name, &estimates)?,
        });
    }

    records.sort_by(|a, b| {
        a.avg_rel_err
            .partial_cmp(&b.avg_rel_err)
            .expect("errors are finite")
    });

    let report = Report {
        input: args.input.display().to_string(),
        n,
        d: data.cols(),
        m: args.m,
        a: args.a,
        seed: args.seed,
        grid: args.grid.clone(),
        records,
    };
    let body = match args.format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report)?;
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(&report),
    };
    fs::write(&args.report, body).with_context(|| format!("writing {}", args.report.display()))?;
    Ok(())
}

/// Seed for the grid configuration at `idx`; written into the record
/// so any single configuration can be reproduced directly.
fn kdegraph_bench_seed(master: u64, idx: usize) -> u64 {
    master
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(idx as u64 + 1)
}

/// Runs the query batch three times; returns the first result, the
/// kernel evaluations of a single repetition, and the median wall
/// time.
fn timed_queries<F, K>(mut run: F, counter: &K) -> Result<(Vec<f64>, u64, f64)>
where
    F: FnMut() -> kdegraph::Result<Vec<f64>>,
    K: HasCounter,
{
    let before = counter.kernel_eval_count();
    let start = Instant::now();
    let first = run()?;
    let mut times = vec![start.elapsed().as_secs_f64()];
    let evals = counter.kernel_eval_count() - before;
    for _ in 0..2 {
        let start = Instant::now();
        let _ = run()?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("times are finite"));
    Ok((first, evals, times[1]))
}

trait HasCounter {
    fn kernel_eval_count(&self) -> u64;
}

impl HasCounter for ExactKde {
    fn kernel_eval_count(&self) -> u64 {
        self.kernel_eval_count()
    }
}

impl HasCounter for CknsGaussianKde {
    fn kernel_eval_count(&self) -> u64 {
        self.kernel_eval_count()
    }
}

fn write_densities(args: &BenchArgs, name: &str, values: &[f64]) -> Result<Option<String>> {
    let Some(dir) = &args.densities_dir else {
        return Ok(None);
    };
    let path = dir.join(format!("{name}.txt"));
    let mut out = String::with_capacity(values.len() * 20);
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(Some(path.display().to_string()))
}

fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# kdegraph bench-kde report");
    let _ = writeln!(out, "# input {}", report.input);
    let _ = writeln!(out, "# n {}", report.n);
    let _ = writeln!(out, "# d {}", report.d);
    let _ = writeln!(out, "# m {}", report.m);
    let _ = writeln!(out, "# a {}", report.a);
    let _ = writeln!(out, "# seed {}", report.seed);
    let _ = writeln!(out, "# grid {}", report.grid);
    for r in &report.records {
        let _ = write!(out, "method={}", r.method);
        if let Some(k1) = r.k1 {
            let _ = write!(out, " k1={k1}");
        }
        if let Some(k2) = r.k2_constant {
            let _ = write!(out, " k2_constant={k2}");
        }
        if let Some(p) = r.p_offset {
            let _ = write!(out, " p_offset={p}");
        }
        if let Some(mu) = r.min_mu {
            let _ = write!(out, " min_mu={mu}");
        }
        let _ = write!(
            out,
            " avg_rel_err={} kernel_evals={} kernel_evals_per_query={}",
            r.avg_rel_err, r.kernel_evals, r.kernel_evals_per_query
        );
        if let Some(b) = r.build_seconds {
            let _ = write!(out, " build_seconds={b}");
        }
        if let Some(q) = r.query_seconds_median {
            let _ = write!(out, " query_seconds_median={q}");
        }
        let _ = write!(out, " seed={}", r.seed);
        if let Some(f) = &r.densities_file {
            let _ = write!(out, " densities_file={f}");
        }
        out.push('\n');
    }
    out
}

/// Parses a grid such as "k1=4,16;k2=2,5;p=0;mu=0.001" into the cross
/// product of its axes. Unknown keys and malformed numbers are errors.
fn parse_grid(spec: &str) -> Result<Vec<GridConfig>> {
    let mut k1_axis: Vec<Option<usize>> = vec![None];
    let mut k2_axis: Vec<f64> = vec![5.0];
    let mut p_axis: Vec<u32> = vec![0];
    let mut mu_axis: Vec<Option<f64>> = vec![None];

    for part in spec.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, values) = part
            .split_once('=')
            .with_context(|| format!("grid axis {part:?} is missing '='"))?;
        let values = values.trim();
        if values.is_empty() {
            bail!("grid axis {key:?} has no values");
        }
        match key.trim() {
            "k1" => {
                k1_axis = values
                    .split(',')
                    .map(|v| v.trim().parse::<usize>().map(Some))
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("parsing k1 values {values:?}"))?;
            }
            "k2" | "k2_constant" => {
                k2_axis = values
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("parsing k2 values {values:?}"))?;
            }
            "p" | "p_offset" => {
                p_axis = values
                    .split(',')
                    .map(|v| v.trim().parse::<u32>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("parsing p values {values:?}"))?;
            }
            "mu" | "min_mu" => {
                mu_axis = values
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map(Some))
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("parsing mu values {values:?}"))?;
            }
            other => bail!("unknown grid key {other:?} (expected k1, k2, p, or mu)"),
        }
    }

    let mut configs = Vec::new();
    for &k1 in &k1_axis {
        for &k2 in &k2_axis {
            for &p in &p_axis {
                for &mu in &mu_axis {
                    configs.push(GridConfig {
                        k1,
                        k2_constant: k2,
                        p_offset: p,
                        min_mu: mu,
                    });
                }
            }
        }
    }
    Ok(configs)
}
