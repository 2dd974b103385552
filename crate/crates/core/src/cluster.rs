//! Similarity-graph construction and spectral clustering.
//!
//! The pipeline has three steps: build a similarity graph over the
//! data points, embed the vertices with the bottom-k eigenvectors of
//! the graph Laplacian, and run k-means on the embedded points.
//!
//! [`similarity_graph`] builds the fully connected graph with Gaussian
//! edge weights in `O(n^2 d)`. [`approximate_similarity_graph`] builds
//! a sparse graph with at most `2 t n` edges by sampling, for every
//! vertex, `t` neighbours with probability proportional to the edge
//! weight over the vertex degree; degrees come from kernel density
//! estimates and the per-draw distribution is realised by the density
//! estimator's recovered-point contributions. Sampled edges are
//! reweighted by their inclusion probability so the sparse graph
//! approximates the full one in expectation, and carries the same
//! cluster structure.

use rayon::prelude::*;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{squared_distance, DataPoint, DenseMatrix};
use crate::eigen::{jacobi_eigen, smallest_eigenpairs};
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::kde::{CknsGaussianKde, CknsParams};
use crate::util::stream_rng;

const TAG_VERTEX: u64 = 0x7665_7274;
const TAG_GRAPH_KDE: u64 = 0x676b_6465;
const TAG_KMEANS: u64 = 0x6b6d_6e73;

/// Threshold below which spectral embedding uses the dense solver.
const DENSE_EIGEN_LIMIT: usize = 500;

/// Cluster assignment for every data point; ids lie in `[0, k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    labels: Vec<usize>,
}

impl ClusterLabels {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.labels
    }
}

impl std::ops::Index<usize> for ClusterLabels {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.labels[i]
    }
}

/// Spectral embedding: one row of coordinates per vertex, one column
/// per eigenvector, with the matching Laplacian eigenvalues in
/// nondecreasing order.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub coordinates: DenseMatrix,
    pub eigenvalues: Vec<f64>,
}

/// Edges below this weight are omitted from constructed similarity
/// graphs: they are spectrally irrelevant (they shift any degree by at
/// most `n * 1e-15`) and dropping them keeps widely separated datasets
/// sparse.
const MIN_EDGE_WEIGHT: f64 = 1e-15;

/// Fully connected similarity graph: vertices are data points, the
/// edge `{i, j}` carries weight `exp(-a ||x_i - x_j||^2)`.
///
/// Edges whose weight falls below `1e-15` are omitted; for any pair
/// close enough to matter the graph is complete.
pub fn similarity_graph(data: &DenseMatrix, bandwidth: f64) -> Result<SparseGraph> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "similarity graph needs at least two points".into(),
        ));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    let rows: Vec<(Vec<u32>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = data.row(i);
            let mut cols = Vec::new();
            let mut weights = Vec::new();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = (-bandwidth * squared_distance(xi, data.row(j))).exp();
                if w >= MIN_EDGE_WEIGHT {
                    cols.push(j as u32);
                    weights.push(w);
                }
            }
            (cols, weights)
        })
        .collect();

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut weights = Vec::new();
    for (cols, ws) in rows {
        col_idx.extend_from_slice(&cols);
        weights.extend_from_slice(&ws);
        row_ptr.push(col_idx.len());
    }
    Ok(SparseGraph::from_sorted_adjacency(
        n, row_ptr, col_idx, weights,
    ))
}

/// Tuning for [`approximate_similarity_graph_with`].
#[derive(Debug, Clone)]
pub struct ApproxGraphParams {
    /// Neighbour draws per vertex; `None` means `ceil(4 * log2 n)`.
    pub samples_per_vertex: Option<usize>,
    /// Parameters of the internal density estimator.
    pub kde: CknsParams,
}

impl Default for ApproxGraphParams {
    fn default() -> Self {
        // The sampler only needs constant-factor density estimates, so
        // the internal estimator runs with fewer copies and tables than
        // a standalone one.
        let kde = CknsParams {
            eps: 1.0,
            max_tables: 32,
            ..CknsParams::default()
        };
        Self {
            samples_per_vertex: None,
            kde,
        }
    }
}

/// Sparse similarity graph with the same cluster structure as the
/// fully connected one, built with default tuning.
pub fn approximate_similarity_graph(
    data: &DenseMatrix,
    bandwidth: f64,
    seed: u64,
) -> Result<SparseGraph> {
    approximate_similarity_graph_with(data, bandwidth, seed, &ApproxGraphParams::default())
}

/// Sparse similarity graph by per-vertex neighbour sampling.
///
/// For each vertex `i`, `t` neighbours are drawn with per-draw
/// probability proportional to `w(i, j) / deg(i)`, realised by drawing
/// from the density estimator's recovered-point contributions. A
/// sampled pair `{i, j}` enters the graph once with weight
/// `w(i, j) / p(i, j)` where
/// `p(i, j) = 1 - (1 - q_i(j)) (1 - q_j(i))` and
/// `q_x(y) = min(1, t * w(x, y) / deg(x))` uses the estimated degrees;
/// duplicate draws of the same pair are averaged. The result has at
/// most `t * n` edges.
pub fn approximate_similarity_graph_with(
    data: &DenseMatrix,
    bandwidth: f64,
    seed: u64,
    params: &ApproxGraphParams,
) -> Result<SparseGraph> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "similarity graph needs at least two points".into(),
        ));
    }
    let t = match params.samples_per_vertex {
        Some(0) => {
            return Err(Error::InvalidParameter(
                "samples_per_vertex must be at least 1".into(),
            ))
        }
        Some(t) => t,
        None => (4.0 * (n as f64).log2()).ceil() as usize,
    };

    let kde = CknsGaussianKde::with_params(
        data.clone(),
        bandwidth,
        &params.kde,
        crate::util::split_seed(seed, &[TAG_GRAPH_KDE]),
    )?;

    // One query pass per vertex yields both its degree estimate and its
    // neighbour draws: the density estimate gives the degree (n times
    // the density minus the self term), and the recovered-point
    // contributions are the per-draw sampling distribution. All degree
    // estimates exist before any edge weight is formed. Each vertex
    // owns a deterministic stream, so the parallel loop reproduces the
    // sequential one.
    let per_vertex: Vec<(f64, Vec<u32>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = DataPoint::new(data.row(i));
            let (estimate, contributions) = kde
                .query_contributions(&q)
                .expect("dimensions match by construction");
            let mut support: Vec<(u32, f64)> = Vec::with_capacity(contributions.len());
            let mut total = 0.0;
            for (id, c) in contributions {
                if id != i && c > 0.0 {
                    total += c;
                    support.push((id as u32, total));
                }
            }
            let mut picks = Vec::with_capacity(t);
            if support.is_empty() {
                // Nothing recoverable at any level; the support is a
                // deterministic function of the built structure, so
                // retrying cannot help. Skip this vertex's draws.
                return (estimate, picks);
            }
            let mut rng = stream_rng(seed, &[TAG_VERTEX, i as u64]);
            for _ in 0..t {
                let target = rng.random::<f64>() * total;
                let at = support.partition_point(|&(_, cum)| cum <= target);
                let idx = at.min(support.len() - 1);
                picks.push(support[idx].0);
            }
            (estimate, picks)
        })
        .collect();
    let degrees: Vec<f64> = per_vertex
        .iter()
        .map(|(mu, _)| (n as f64 * mu - 1.0).max(1e-9))
        .collect();
    let sampled: Vec<Vec<u32>> = per_vertex.into_iter().map(|(_, picks)| picks).collect();

    // Merge: the same unordered pair may be drawn several times and
    // from both endpoints; every occurrence carries the same
    // compensated weight, so merging sums and dividing by multiplicity
    // reduces to keeping the pair once.
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    for (i, picks) in sampled.iter().enumerate() {
        for &j in picks {
            let a = (i as u32).min(j);
            let b = (i as u32).max(j);
            pairs.push((a, b));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let t_f = t as f64;
    let edges: Vec<(usize, usize, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (i, j) = (i as usize, j as usize);
            let w = (-bandwidth * squared_distance(data.row(i), data.row(j))).exp();
            let q_i = (t_f * w / degrees[i]).min(1.0);
            let q_j = (t_f * w / degrees[j]).min(1.0);
            let inclusion = 1.0 - (1.0 - q_i) * (1.0 - q_j);
            (i, j, w / inclusion.max(f64::MIN_POSITIVE))
        })
        .filter(|&(_, _, w)| w > 0.0 && w.is_finite())
        .collect();

    SparseGraph::from_edge_list(n, &edges)
}

/// Draws one neighbour index for the dataset row `query_index`, with
/// probability proportional (in expectation over the estimator's
/// construction randomness) to the Gaussian kernel similarity.
///
/// Concretely, a recovered point is drawn with probability
/// proportional to its reweighted contribution to the density estimate
/// of the query, which is what makes the proportionality hold in
/// expectation. Returns `None` when no other point is recoverable at
/// any level; the recovered support of a built estimator is
/// deterministic, so callers should skip such draws rather than retry.
pub fn sample_neighbour(
    kde: &CknsGaussianKde,
    query_index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<usize>> {
    let n = kde.data().rows();
    if query_index >= n {
        return Err(Error::IndexOutOfRange {
            index: query_index,
            len: n,
        });
    }
    let q = DataPoint::new(kde.data().row(query_index));
    let (_, contributions) = kde.query_contributions(&q)?;
    let mut total = 0.0;
    let mut support: Vec<(usize, f64)> = Vec::with_capacity(contributions.len());
    for (id, c) in contributions {
        if id != query_index && c > 0.0 {
            total += c;
            support.push((id, total));
        }
    }
    if support.is_empty() {
        return Ok(None);
    }
    let target = rng.random::<f64>() * total;
    let at = support.partition_point(|&(_, cum)| cum <= target);
    Ok(Some(support[at.min(support.len() - 1)].0))
}

/// Embeds the vertices of `g` with the eigenvectors of the normalized
/// Laplacian associated with its `k` smallest eigenvalues.
///
/// Uses a dense solver for small graphs and block orthogonal iteration
/// otherwise; either way the returned pairs satisfy
/// `||N v - lambda v|| <= 1e-6` and eigenvalues are nondecreasing.
pub fn spectral_embed(g: &SparseGraph, k: usize) -> Result<SpectralEmbedding> {
    spectral_embed_impl(g, k, true)
}

fn spectral_embed_impl(g: &SparseGraph, k: usize, normalized: bool) -> Result<SpectralEmbedding> {
    let n = g.vertex_count();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {n}], got {k}"
        )));
    }
    let lap = g.laplacian(normalized);
    if n <= DENSE_EIGEN_LIMIT {
        let dense = lap.to_dense();
        let (vals, vecs) = jacobi_eigen(&dense);
        let mut coords = DenseMatrix::zeros(n, k);
        for r in 0..n {
            for c in 0..k {
                coords.set(r, c, vecs[r][c]);
            }
        }
        return Ok(SpectralEmbedding {
            coordinates: coords,
            eigenvalues: vals[..k].to_vec(),
        });
    }
    if !normalized {
        return Err(Error::InvalidParameter(
            "iterative path supports the normalized Laplacian only".into(),
        ));
    }
    // The embedding is deterministic: the iteration seed is fixed.
    let (vals, flat) = smallest_eigenpairs(&lap, k, 1e-8, 0x7370_6563)?;
    let coords = DenseMatrix::new(n, k, flat)?;
    Ok(SpectralEmbedding {
        coordinates: coords,
        eigenvalues: vals,
    })
}

/// Result of Lloyd's algorithm.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub labels: ClusterLabels,
    /// Final sum of squared distances to assigned centroids.
    pub inertia: f64,
    pub iterations: usize,
    /// Objective after each assignment step; non-increasing.
    pub objective_trace: Vec<f64>,
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Stops when the relative objective change drops below `1e-6` or
/// after 300 iterations; the objective never increases between
/// iterations.
pub fn kmeans(points: &DenseMatrix, k: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.rows();
    let d = points.cols();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k must lie in [1, {n}], got {k}"
        )));
    }
    let mut rng = stream_rng(seed, &[TAG_KMEANS]);

    // k-means++ seeding: first centre uniform, the rest by squared
    // distance to the nearest chosen centre.
    let mut centroids = DenseMatrix::zeros(k, d);
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut best_sq = vec![f64::INFINITY; n];
    for c in 1..k {
        let prev = centroids.row(c - 1).to_vec();
        for i in 0..n {
            let dist = squared_distance(points.row(i), &prev);
            if dist < best_sq[i] {
                best_sq[i] = dist;
            }
        }
        let total: f64 = best_sq.iter().sum();
        let choice = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in best_sq.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining mass is zero (duplicate points); fall back
            // to the first index not yet used as a centre.
            let mut used = vec![false; n];
            for cc in 0..c {
                for i in 0..n {
                    if points.row(i) == centroids.row(cc) {
                        used[i] = true;
                        break;
                    }
                }
            }
            used.iter().position(|&u| !u).unwrap_or(0)
        };
        centroids.row_mut(c).copy_from_slice(points.row(choice));
    }

    let mut labels = vec![0usize; n];
    let mut prev_objective = f64::INFINITY;
    let mut iterations = 0;
    let mut objective_trace = Vec::new();
    for iter in 0..300 {
        iterations = iter + 1;
        // Assignment step.
        let assignment: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let p = points.row(i);
                let mut best = (0usize, f64::INFINITY);
                for c in 0..k {
                    let dist = squared_distance(p, centroids.row(c));
                    if dist < best.1 {
                        best = (c, dist);
                    }
                }
                best
            })
            .collect();
        let mut objective = 0.0;
        for (i, &(c, dist)) in assignment.iter().enumerate() {
            labels[i] = c;
            objective += dist;
        }
        objective_trace.push(objective);

        // Update step.
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            let row = points.row(i);
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(row.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from
                // its assigned centroid (deterministic: first maximum).
                let mut far = (0usize, -1.0);
                for (i, &(cc, dist)) in assignment.iter().enumerate() {
                    let _ = cc;
                    if dist > far.1 {
                        far = (i, dist);
                    }
                }
                centroids.row_mut(c).copy_from_slice(points.row(far.0));
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            for (slot, s) in centroids.row_mut(c).iter_mut().zip(sums[c * d..].iter()) {
                *slot = s * inv;
            }
        }

        let improved = prev_objective - objective;
        let converged = prev_objective.is_finite()
            && improved >= 0.0
            && improved <= 1e-6 * prev_objective.max(f64::MIN_POSITIVE);
        prev_objective = objective;
        if objective == 0.0 || converged {
            break;
        }
    }

    Ok(KMeansResult {
        labels: ClusterLabels::new(labels),
        inertia: prev_objective,
        iterations,
        objective_trace,
    })
}

/// Options for [`spectral_cluster_with`].
#[derive(Debug, Clone)]
pub struct SpectralClusterOpts {
    /// Use the normalized Laplacian (default) or the unnormalized one.
    pub normalized_laplacian: bool,
    /// Normalize embedding rows to unit length before k-means.
    pub row_normalize: bool,
}

impl Default for SpectralClusterOpts {
    fn default() -> Self {
        Self {
            normalized_laplacian: true,
            row_normalize: true,
        }
    }
}

/// Spectral clustering: embed with the bottom-k eigenvectors of the
/// normalized Laplacian, row-normalize, then k-means.
pub fn spectral_cluster(g: &SparseGraph, k: usize, seed: u64) -> Result<ClusterLabels> {
    spectral_cluster_with(g, k, seed, &SpectralClusterOpts::default())
}

pub fn spectral_cluster_with(
    g: &SparseGraph,
    k: usize,
    seed: u64,
    opts: &SpectralClusterOpts,
) -> Result<ClusterLabels> {
    let embedding = spectral_embed_impl(g, k, opts.normalized_laplacian)?;
    let mut coords = embedding.coordinates;
    if opts.row_normalize {
        for r in 0..coords.rows() {
            let row = coords.row_mut(r);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row.iter_mut() {
                    *v /= norm;
                }
            }
        }
    }
    Ok(kmeans(&coords, k, seed)?.labels)
}

/// Adjusted Rand index between two clusterings of the same points;
/// 1 for identical partitions (up to label permutation), around 0 for
/// independent ones.
///
/// Panics if the slices have different lengths.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "clusterings must cover the same points");
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let ka = a.iter().max().map(|m| m + 1).unwrap_or(0);
    let kb = b.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut table = vec![0u64; ka * kb];
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for (&x, &y) in a.iter().zip(b.iter()) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let choose2 = |x: u64| -> f64 {
        let x = x as f64;
        x * (x - 1.0) / 2.0
    };
    let sum_table: f64 = table.iter().map(|&c| choose2(c)).sum();
    let sum_rows: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_cols: f64 = cols.iter().map(|&c| choose2(c)).sum();
    let total = choose2(n as u64);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_table - expected) / (max_index - expected)
}
