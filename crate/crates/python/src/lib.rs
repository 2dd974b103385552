//! Python bindings: dense matrices with text I/O, Euclidean LSH,
//! exact and hash-based Gaussian kernel density estimation, similarity
//! graphs, and spectral clustering.
//!
//! Build with `cargo build --release -p kdegraph-python`; the produced
//! `libkdegraph_python.so` imports as the module `kdegraph` once
//! renamed to `kdegraph.so` (see `python/smoke_test.py`).

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kdegraph::cluster as kcluster;
use kdegraph::data::DataPoint;
use kdegraph::kde::{self, CknsParams, KernelConfig};
use kdegraph::lsh;
use kdegraph::synth;

fn to_py_err(err: kdegraph::Error) -> PyErr {
    match &err {
        kdegraph::Error::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

/// Dense row-major matrix of 64-bit floats; rows are data points.
#[pyclass(name = "DenseMatrix", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDenseMatrix {
    inner: kdegraph::DenseMatrix,
}

#[pymethods]
impl PyDenseMatrix {
    /// Builds a matrix from a list of equal-length rows.
    #[staticmethod]
    fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: kdegraph::DenseMatrix::from_rows(&rows).map_err(to_py_err)?,
        })
    }

    fn rows(&self) -> usize {
        self.inner.rows()
    }

    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.rows() || j >= self.inner.cols() {
            return Err(PyValueError::new_err(format!(
                "index ({i}, {j}) out of range for {}x{}",
                self.inner.rows(),
                self.inner.cols()
            )));
        }
        Ok(self.inner.get(i, j))
    }

    /// Row `i` as a list of floats.
    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        let view = self.inner.row_view(i).map_err(to_py_err)?;
        Ok(view.coords().to_vec())
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        self.inner.iter_rows().map(|r| r.to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("DenseMatrix({}x{})", self.inner.rows(), self.inner.cols())
    }
}

/// Reads a space- or comma-separated matrix file, one point per line.
#[pyfunction]
fn load_matrix(path: &str) -> PyResult<PyDenseMatrix> {
    Ok(PyDenseMatrix {
        inner: kdegraph::load_matrix(path).map_err(to_py_err)?,
    })
}

/// Writes a matrix as space-separated text with full float precision.
#[pyfunction]
fn save_matrix(matrix: &PyDenseMatrix, path: &str) -> PyResult<()> {
    kdegraph::save_matrix(&matrix.inner, path).map_err(to_py_err)
}

/// Collision probability of two points at distance `c` under one
/// random projection hash function.
#[pyfunction]
fn collision_probability(c: f64) -> PyResult<f64> {
    lsh::collision_probability(c).map_err(to_py_err)
}

/// Collision probability boosted by `k` concatenated functions across
/// `l` tables.
#[pyfunction]
fn boosted_collision_probability(c: f64, k: usize, l: usize) -> PyResult<f64> {
    lsh::boosted_collision_probability(c, k, l).map_err(to_py_err)
}

/// Gaussian kernel similarity `exp(-a * ||x - y||^2)`.
#[pyfunction]
fn gaussian_kernel(a: f64, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    kde::gaussian_kernel(a, &DataPoint::new(&x), &DataPoint::new(&y)).map_err(to_py_err)
}

/// A single random-projection hash function.
#[pyclass(name = "LshFunction", frozen)]
struct PyLshFunction {
    inner: lsh::LshFunction,
}

#[pymethods]
impl PyLshFunction {
    #[new]
    #[pyo3(signature = (dim, seed = 0))]
    fn new(dim: usize, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self {
            inner: lsh::LshFunction::sample(dim, &mut rng).map_err(to_py_err)?,
        })
    }

    /// Integer bucket id of a point.
    fn apply(&self, point: Vec<f64>) -> PyResult<i64> {
        self.inner.apply(&DataPoint::new(&point)).map_err(to_py_err)
    }
}

/// Euclidean LSH hash table over the rows of a data matrix.
#[pyclass(name = "E2LshTable", frozen)]
struct PyE2LshTable {
    inner: lsh::E2LshTable,
}

#[pymethods]
impl PyE2LshTable {
    #[new]
    #[pyo3(signature = (k, l, data, seed = 0))]
    fn new(k: usize, l: usize, data: &PyDenseMatrix, seed: u64) -> PyResult<Self> {
        let points = kdegraph::matrix_to_datapoints(&data.inner);
        Ok(Self {
            inner: lsh::E2LshTable::build(k, l, &points, seed).map_err(to_py_err)?,
        })
    }

    /// Indices of stored rows sharing a bucket with the query in at
    /// least one table.
    fn near_neighbours(&self, query: Vec<f64>) -> PyResult<Vec<usize>> {
        self.inner
            .near_neighbours(&DataPoint::new(&query))
            .map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Exact Gaussian kernel density: one kernel evaluation per stored
/// point per query.
#[pyclass(name = "ExactGaussianKde", frozen)]
struct PyExactKde {
    inner: kde::ExactKde,
}

#[pymethods]
impl PyExactKde {
    #[new]
    fn new(data: &PyDenseMatrix, a: f64) -> PyResult<Self> {
        Ok(Self {
            inner: kde::ExactKde::new(
                data.inner.clone(),
                KernelConfig::gaussian(a).map_err(to_py_err)?,
            )
            .map_err(to_py_err)?,
        })
    }

    fn query(&self, point: Vec<f64>) -> PyResult<f64> {
        self.inner.query(&DataPoint::new(&point)).map_err(to_py_err)
    }

    /// Densities for every row of `queries`, in order.
    fn query_matrix(&self, queries: &PyDenseMatrix) -> PyResult<Vec<f64>> {
        self.inner.query_batch(&queries.inner).map_err(to_py_err)
    }

    fn kernel_eval_count(&self) -> u64 {
        self.inner.kernel_eval_count()
    }
}

/// Hash-based Gaussian kernel density estimator.
#[pyclass(name = "CknsGaussianKde", frozen)]
struct PyCknsKde {
    inner: kde::CknsGaussianKde,
}

#[pymethods]
impl PyCknsKde {
    #[new]
    #[pyo3(signature = (data, a, seed = 0, eps = None, min_mu = None, k1 = None, k2_constant = None, p_offset = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        data: &PyDenseMatrix,
        a: f64,
        seed: u64,
        eps: Option<f64>,
        min_mu: Option<f64>,
        k1: Option<usize>,
        k2_constant: Option<f64>,
        p_offset: Option<u32>,
    ) -> PyResult<Self> {
        let mut params = CknsParams::default();
        if let Some(eps) = eps {
            params.eps = eps;
        }
        params.min_mu = min_mu;
        params.k1 = k1;
        if let Some(k2) = k2_constant {
            params.k2_constant = k2;
        }
        if let Some(p) = p_offset {
            params.p_offset = p;
        }
        Ok(Self {
            inner: kde::CknsGaussianKde::with_params(data.inner.clone(), a, &params, seed)
                .map_err(to_py_err)?,
        })
    }

    fn query(&self, point: Vec<f64>) -> PyResult<f64> {
        self.inner.query(&DataPoint::new(&point)).map_err(to_py_err)
    }

    fn query_matrix(&self, queries: &PyDenseMatrix) -> PyResult<Vec<f64>> {
        self.inner.query_batch(&queries.inner).map_err(to_py_err)
    }

    fn kernel_eval_count(&self) -> u64 {
        self.inner.kernel_eval_count()
    }

    fn copy_count(&self) -> usize {
        self.inner.copy_count()
    }

    fn levels_per_copy(&self) -> usize {
        self.inner.levels_per_copy()
    }

    /// Draws the index of one neighbour of dataset row `query_index`
    /// with probability proportional, in expectation, to the kernel
    /// similarity; returns None when nothing is recoverable.
    #[pyo3(signature = (query_index, seed = 0))]
    fn sample_neighbour(&self, query_index: usize, seed: u64) -> PyResult<Option<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        kcluster::sample_neighbour(&self.inner, query_index, &mut rng).map_err(to_py_err)
    }
}

/// Undirected weighted graph with symmetric adjacency.
#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    inner: kdegraph::SparseGraph,
}

#[pymethods]
impl PyGraph {
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn degree(&self, i: usize) -> PyResult<f64> {
        self.inner.degree(i).map_err(to_py_err)
    }

    /// All undirected edges as `(i, j, weight)` with `i < j`.
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.inner.edge_count());
        for v in 0..self.inner.vertex_count() {
            for (u, w) in self.inner.neighbours(v) {
                if (u as usize) > v {
                    out.push((v, u as usize, w));
                }
            }
        }
        out
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph({} vertices, {} edges)",
            self.inner.vertex_count(),
            self.inner.edge_count()
        )
    }
}

/// Fully connected Gaussian similarity graph.
#[pyfunction]
fn similarity_graph(data: &PyDenseMatrix, a: f64) -> PyResult<PyGraph> {
    Ok(PyGraph {
        inner: kcluster::similarity_graph(&data.inner, a).map_err(to_py_err)?,
    })
}

/// Sparse similarity graph with the same cluster structure as the
/// fully connected one.
#[pyfunction]
#[pyo3(signature = (data, a, seed = 0, t = None))]
fn approximate_similarity_graph(
    data: &PyDenseMatrix,
    a: f64,
    seed: u64,
    t: Option<usize>,
) -> PyResult<PyGraph> {
    let params = kcluster::ApproxGraphParams {
        samples_per_vertex: t,
        ..kcluster::ApproxGraphParams::default()
    };
    Ok(PyGraph {
        inner: kcluster::approximate_similarity_graph_with(&data.inner, a, seed, &params)
            .map_err(to_py_err)?,
    })
}

/// Spectral clustering of a graph into `k` clusters.
#[pyfunction]
#[pyo3(signature = (graph, k, seed = 0))]
fn spectral_cluster(graph: &PyGraph, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(kcluster::spectral_cluster(&graph.inner, k, seed)
        .map_err(to_py_err)?
        .into_vec())
}

/// Bottom-k normalized-Laplacian eigenvalues and the vertex embedding.
#[pyfunction]
fn spectral_embed(graph: &PyGraph, k: usize) -> PyResult<(Vec<f64>, PyDenseMatrix)> {
    let emb = kcluster::spectral_embed(&graph.inner, k).map_err(to_py_err)?;
    Ok((
        emb.eigenvalues,
        PyDenseMatrix {
            inner: emb.coordinates,
        },
    ))
}

/// Lloyd's k-means with seeded k-means++ initialisation; returns one
/// cluster id per row.
#[pyfunction]
#[pyo3(signature = (points, k, seed = 0))]
fn kmeans(points: &PyDenseMatrix, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(kcluster::kmeans(&points.inner, k, seed)
        .map_err(to_py_err)?
        .labels
        .into_vec())
}

/// Adjusted Rand index between two clusterings.
#[pyfunction]
fn adjusted_rand_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err(
            "clusterings must cover the same points",
        ));
    }
    Ok(kcluster::adjusted_rand_index(&a, &b))
}

/// Gaussian blobs benchmark dataset; returns (matrix, labels).
#[pyfunction]
#[pyo3(signature = (n, d, k, noise = 1.0, seed = 0))]
fn generate_blobs(
    n: usize,
    d: usize,
    k: usize,
    noise: f64,
    seed: u64,
) -> PyResult<(PyDenseMatrix, Vec<usize>)> {
    let (m, labels) = synth::blobs(n, d, k, noise, seed).map_err(to_py_err)?;
    Ok((PyDenseMatrix { inner: m }, labels))
}

/// Two interleaved half-circles; returns (matrix, labels).
#[pyfunction]
#[pyo3(signature = (n, noise = 0.05, seed = 0))]
fn generate_moons(n: usize, noise: f64, seed: u64) -> PyResult<(PyDenseMatrix, Vec<usize>)> {
    let (m, labels) = synth::moons(n, noise, seed).map_err(to_py_err)?;
    Ok((PyDenseMatrix { inner: m }, labels))
}

#[pymodule(name = "kdegraph")]
fn kdegraph_python(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDenseMatrix>()?;
    m.add_class::<PyLshFunction>()?;
    m.add_class::<PyE2LshTable>()?;
    m.add_class::<PyExactKde>()?;
    m.add_class::<PyCknsKde>()?;
    m.add_class::<PyGraph>()?;
    m.add_function(wrap_pyfunction!(load_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(save_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(collision_probability, m)?)?;
    m.add_function(wrap_pyfunction!(boosted_collision_probability, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_graph, m)?)?;
    m.add_function(wrap_pyfunction!(approximate_similarity_graph, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_embed, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(generate_blobs, m)?)?;
    m.add_function(wrap_pyfunction!(generate_moons, m)?)?;
    Ok(())
}
