//! End-to-end tests of the command-line interface: flag validation,
//! output formats, determinism, and oracle checks on small inputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kdegraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn dir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn kde_exact_matches_hand_brute_force_on_toy_file() {
    let d = dir();
    let input = d.path().join("toy.csv");
    fs::write(&input, "0 0\n1 0\n0 1\n2 2\n-1 -1\n").unwrap();
    let output = d.path().join("dens.txt");
    let out = run(&[
        "kde",
        "--input",
        path_str(&input),
        "--self",
        "--method",
        "exact",
        "--a",
        "0.5",
        "--output",
        path_str(&output),
    ]);
    assert_success(&out);
    let got: Vec<f64> = read(&output).lines().map(|l| l.parse().unwrap()).collect();
    let points: [[f64; 2]; 5] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [-1.0, -1.0]];
    for (i, q) in points.iter().enumerate() {
        let mut sum = 0.0;
        for p in &points {
            let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            sum += (-0.5 * d2).exp();
        }
        assert!((got[i] - sum / 5.0).abs() < 1e-12, "row {i}");
    }
}

#[test]
fn kde_ckns_reruns_are_byte_identical() {
    let d = dir();
    let input = d.path().join("data.csv");
    let gen = run(&[
        "generate",
        "--kind",
        "blobs",
        "--n",
        "300",
        "--d",
        "3",
        "--k",
        "3",
        "--noise",
        "0.8",
        "--seed",
        "5",
        "--output",
        path_str(&input),
    ]);
    assert_success(&gen);
    let out_a = d.path().join("a.txt");
    let out_b = d.path().join("b.txt");
    for out in [&out_a, &out_b] {
        let r = run(&[
            "kde",
            "--input",
            path_str(&input),
            "--self",
            "--method",
            "ckns",
            "--a",
            "0.5",
            "--seed",
            "7",
            "--output",
            path_str(out),
        ]);
        assert_success(&r);
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
}

#[test]
fn missing_input_fails_without_writing_output() {
    let d = dir();
    let output = d.path().join("never.txt");
    let out = run(&[
        "kde",
        "--input",
        path_str(&d.path().join("nope.csv")),
        "--self",
        "--method",
        "exact",
        "--a",
        "1",
        "--output",
        path_str(&output),
    ]);
    assert!(!out.status.success());
    assert!(!output.exists(), "failed run must not leave output files");
}

#[test]
fn kde_requires_a_query_source() {
    let d = dir();
    let input = d.path().join("data.csv");
    fs::write(&input, "0 0\n1 1\n").unwrap();
    let out = run(&[
        "kde",
        "--input",
        path_str(&input),
        "--method",
        "exact",
        "--a",
        "1",
        "--output",
        path_str(&d.path().join("o.txt")),
    ]);
    assert!(!out.status.success());
}

fn ari(a: &[usize], b: &[usize]) -> f64 {
    kdegraph::cluster::adjusted_rand_index(a, b)
}

fn read_labels(path: &Path) -> Vec<usize> {
    read(path).lines().map(|l| l.parse().unwrap()).collect()
}

#[test]
fn cluster_blobs_matches_ground_truth_and_full_graph() {
    let d = dir();
    let input = d.path().join("blobs.csv");
    let gen = run(&[
        "generate",
        "--kind",
        "blobs",
        "--n",
        "600",
        "--d",
        "3",
        "--k",
        "2",
        "--noise",
        "0.7",
        "--seed",
        "19",
        "--output",
        path_str(&input),
    ]);
    assert_success(&gen);
    let truth = read_labels(&d.path().join("blobs.csv.labels"));

    let approx_out = d.path().join("approx.txt");
    let full_out = d.path().join("full.txt");
    let graph_dump = d.path().join("graph.txt");
    let r1 = run(&[
        "cluster",
        "--input",
        path_str(&input),
        "--k",
        "2",
        "--a",
        "0.5",
        "--graph",
        "approx",
        "--seed",
        "3",
        "--labels-output",
        path_str(&approx_out),
        "--graph-output",
        path_str(&graph_dump),
    ]);
    assert_success(&r1);
    let r2 = run(&[
        "cluster",
        "--input",
        path_str(&input),
        "--k",
        "2",
        "--a",
        "0.5",
        "--graph",
        "full",
        "--seed",
        "3",
        "--labels-output",
        path_str(&full_out),
    ]);
    assert_success(&r2);

    let approx_labels = read_labels(&approx_out);
    let full_labels = read_labels(&full_out);
    assert!(ari(&approx_labels, &truth) >= 0.95);
    assert!(ari(&approx_labels, &full_labels) >= 0.95);

    // Edge-list dump is parseable "i j w" with valid ids and weights.
    for line in read(&graph_dump).lines() {
        let mut fields = line.split(' ');
        let i: usize = fields.next().unwrap().parse().unwrap();
        let j: usize = fields.next().unwrap().parse().unwrap();
        let w: f64 = fields.next().unwrap().parse().unwrap();
        assert!(i < j && j < 600 && w > 0.0);
        assert!(fields.next().is_none());
    }

    // Rerunning the approximate pipeline with the same seed writes
    // byte-identical labels and graph dump.
    let approx_again = d.path().join("approx2.txt");
    let graph_again = d.path().join("graph2.txt");
    let r3 = run(&[
        "cluster",
        "--input",
        path_str(&input),
        "--k",
        "2",
        "--a",
        "0.5",
        "--graph",
        "approx",
        "--seed",
        "3",
        "--labels-output",
        path_str(&approx_again),
        "--graph-output",
        path_str(&graph_again),
    ]);
    assert_success(&r3);
    assert_eq!(
        fs::read(&approx_out).unwrap(),
        fs::read(&approx_again).unwrap()
    );
    assert_eq!(
        fs::read(&graph_dump).unwrap(),
        fs::read(&graph_again).unwrap()
    );
}

#[test]
fn cluster_with_k1_labels_everything_zero() {
    let d = dir();
    let input = d.path().join("tiny.csv");
    fs::write(&input, "0 0\n0.5 0\n10 10\n10.5 10\n").unwrap();
    let labels_out = d.path().join("labels.txt");
    let r = run(&[
        "cluster",
        "--input",
        path_str(&input),
        "--k",
        "1",
        "--a",
        "1",
        "--graph",
        "full",
        "--seed",
        "1",
        "--labels-output",
        path_str(&labels_out),
    ]);
    assert_success(&r);
    assert_eq!(read(&labels_out), "0\n0\n0\n0\n");
}

struct ParsedRecord {
    method: String,
    avg_rel_err: f64,
    densities_file: Option<PathBuf>,
}

fn parse_text_report(text: &str) -> Vec<ParsedRecord> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|line| {
            let mut method = String::new();
            let mut avg_rel_err = f64::NAN;
            let mut densities_file = None;
            for field in line.split(' ') {
                let (key, value) = field.split_once('=').expect("key=value fields");
                match key {
                    "method" => method = value.to_string(),
                    "avg_rel_err" => avg_rel_err = value.parse().unwrap(),
                    "densities_file" => densities_file = Some(PathBuf::from(value)),
                    _ => {}
                }
            }
            ParsedRecord {
                method,
                avg_rel_err,
                densities_file,
            }
        })
        .collect()
}

#[test]
fn bench_report_is_sorted_and_errors_recompute_from_densities() {
    let d = dir();
    let input = d.path().join("data.csv");
    let gen = run(&[
        "generate",
        "--kind",
        "blobs",
        "--n",
        "400",
        "--d",
        "4",
        "--k",
        "4",
        "--noise",
        "0.9",
        "--seed",
        "23",
        "--output",
        path_str(&input),
    ]);
    assert_success(&gen);
    let report = d.path().join("report.txt");
    let dens = d.path().join("densities");
    let r = run(&[
        "bench-kde",
        "--input",
        path_str(&input),
        "--m",
        "80",
        "--grid",
        "k1=2,6;p=0,1",
        "--a",
        "0.4",
        "--seed",
        "9",
        "--report",
        path_str(&report),
        "--densities-dir",
        path_str(&dens),
    ]);
    assert_success(&r);
    let records = parse_text_report(&read(&report));
    assert_eq!(records.len(), 5, "exact + four grid configurations");

    // Sorted by error; the exact record reports zero error.
    assert!(records
        .windows(2)
        .all(|w| w[0].avg_rel_err <= w[1].avg_rel_err));
    assert!(records
        .iter()
        .any(|r| r.method == "exact" && r.avg_rel_err == 0.0));

    // Recompute every error from the emitted densities.
    let truth_file = records
        .iter()
        .find(|r| r.method == "exact")
        .and_then(|r| r.densities_file.clone())
        .expect("exact densities emitted");
    let truth: Vec<f64> = read(&truth_file)
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    for record in &records {
        let file = record.densities_file.as_ref().expect("densities emitted");
        let est: Vec<f64> = read(file).lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(est.len(), truth.len());
        let recomputed = est
            .iter()
            .zip(truth.iter())
            .map(|(e, t)| (e - t).abs() / t)
            .sum::<f64>()
            / truth.len() as f64;
        assert!(
            (recomputed - record.avg_rel_err).abs() <= 1e-12,
            "{}: report {} vs recomputed {recomputed}",
            record.method,
            record.avg_rel_err
        );
    }
}

#[test]
fn bench_json_report_parses_and_no_timing_is_deterministic() {
    let d = dir();
    let input = d.path().join("data.csv");
    let gen = run(&[
        "generate",
        "--kind",
        "blobs",
        "--n",
        "200",
        "--d",
        "3",
        "--k",
        "2",
        "--noise",
        "0.5",
        "--seed",
        "2",
        "--output",
        path_str(&input),
    ]);
    assert_success(&gen);
    let report_a = d.path().join("a.json");
    let report_b = d.path().join("b.json");
    for report in [&report_a, &report_b] {
        let r = run(&[
            "bench-kde",
            "--input",
            path_str(&input),
            "--m",
            "50",
            "--grid",
            "k1=3",
            "--a",
            "0.6",
            "--seed",
            "4",
            "--report",
            path_str(report),
            "--format",
            "json",
            "--no-timing",
        ]);
        assert_success(&r);
    }
    assert_eq!(fs::read(&report_a).unwrap(), fs::read(&report_b).unwrap());
    let parsed: serde_json::Value = serde_json::from_str(&read(&report_a)).unwrap();
    assert_eq!(parsed["m"], 50);
    let records = parsed["records"].as_array().unwrap();
    assert_eq!(records.len(), 2);
    for r in records {
        assert!(r.get("build_seconds").is_none());
        assert!(r["kernel_evals"].as_u64().unwrap() > 0);
    }
}

#[test]
fn bench_rejects_oversized_query_set() {
    let d = dir();
    let input = d.path().join("data.csv");
    fs::write(&input, "0 0\n1 1\n2 2\n").unwrap();
    let report = d.path().join("r.txt");
    let r = run(&[
        "bench-kde",
        "--input",
        path_str(&input),
        "--m",
        "4",
        "--a",
        "1",
        "--seed",
        "1",
        "--report",
        path_str(&report),
    ]);
    assert!(!r.status.success());
    assert!(!report.exists());
}

#[test]
fn generate_moons_is_balanced_and_deterministic() {
    let d = dir();
    let out_a = d.path().join("m1.csv");
    let out_b = d.path().join("m2.csv");
    for out in [&out_a, &out_b] {
        let r = run(&[
            "generate",
            "--kind",
            "moons",
            "--n",
            "1000",
            "--noise",
            "0.05",
            "--seed",
            "8",
            "--output",
            path_str(out),
        ]);
        assert_success(&r);
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
    let labels = read_labels(&d.path().join("m1.csv.labels"));
    assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 500);
    assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 500);
    assert_eq!(read(&out_a).lines().count(), 1000);
}

#[test]
fn generate_blobs_with_zero_noise_repeats_centres() {
    let d = dir();
    let out = d.path().join("b.csv");
    let r = run(&[
        "generate",
        "--kind",
        "blobs",
        "--n",
        "40",
        "--d",
        "2",
        "--k",
        "4",
        "--noise",
        "0",
        "--seed",
        "3",
        "--output",
        path_str(&out),
    ]);
    assert_success(&r);
    let mut rows: Vec<&str> = Vec::new();
    let content = read(&out);
    for line in content.lines() {
        if !rows.contains(&line) {
            rows.push(line);
        }
    }
    assert_eq!(rows.len(), 4, "expected exactly 4 distinct points");
}

#[test]
fn generate_moons_rejects_other_dimensions() {
    let d = dir();
    let r = run(&[
        "generate",
        "--kind",
        "moons",
        "--n",
        "10",
        "--d",
        "3",
        "--seed",
        "1",
        "--output",
        path_str(&d.path().join("m.csv")),
    ]);
    assert!(!r.status.success());
}
