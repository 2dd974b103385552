//! Sparse undirected weighted graphs and their Laplacians.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Undirected weighted graph in compressed sparse row form.
///
/// The adjacency is stored symmetrically (every edge appears from both
/// endpoints), holds no self-loops, and all weights are positive.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    weights: Vec<f64>,
}

impl SparseGraph {
    /// Builds a graph from an edge multiset.
    ///
    /// Duplicate pairs, in either orientation, are merged by summing
    /// their weights; self-loops are dropped. Out-of-range indices and
    /// non-positive weights are errors.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut undirected = Vec::with_capacity(edges.len());
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    len: n,
                });
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "edge weight must be positive and finite, got {w}"
                )));
            }
            if i == j {
                continue;
            }
            undirected.push((i.min(j) as u32, i.max(j) as u32, w));
        }
        undirected.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        // Merge duplicates, then mirror into both directions.
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(undirected.len());
        for (i, j, w) in undirected {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += w,
                _ => merged.push((i, j, w)),
            }
        }

        let mut counts = vec![0usize; n];
        for &(i, j, _) in &merged {
            counts[i as usize] += 1;
            counts[j as usize] += 1;
        }
        let mut row_ptr = vec![0usize; n + 1];
        for v in 0..n {
            row_ptr[v + 1] = row_ptr[v] + counts[v];
        }
        let nnz = row_ptr[n];
        let mut col_idx = vec![0u32; nnz];
        let mut weights = vec![0.0f64; nnz];
        let mut cursor = row_ptr[..n].to_vec();
        for &(i, j, w) in &merged {
            let (i, j) = (i as usize, j as usize);
            col_idx[cursor[i]] = j as u32;
            weights[cursor[i]] = w;
            cursor[i] += 1;
            col_idx[cursor[j]] = i as u32;
            weights[cursor[j]] = w;
            cursor[j] += 1;
        }
        // Neighbour lists come out sorted for i < j halves but the
        // mirrored halves interleave; sort each row for stable layout.
        let mut g = Self {
            n,
            row_ptr,
            col_idx,
            weights,
        };
        g.sort_rows();
        Ok(g)
    }

    fn sort_rows(&mut self) {
        for v in 0..self.n {
            let lo = self.row_ptr[v];
            let hi = self.row_ptr[v + 1];
            let mut pairs: Vec<(u32, f64)> = self.col_idx[lo..hi]
                .iter()
                .copied()
                .zip(self.weights[lo..hi].iter().copied())
                .collect();
            pairs.sort_unstable_by_key(|p| p.0);
            for (k, (c, w)) in pairs.into_iter().enumerate() {
                self.col_idx[lo + k] = c;
                self.weights[lo + k] = w;
            }
        }
    }

    /// Builds directly from per-vertex adjacency (callers guarantee
    /// symmetry; debug builds assert it).
    pub(crate) fn from_sorted_adjacency(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        weights: Vec<f64>,
    ) -> Self {
        let g = Self {
            n,
            row_ptr,
            col_idx,
            weights,
        };
        debug_assert!(g.check_symmetry());
        g
    }

    #[allow(dead_code)]
    fn check_symmetry(&self) -> bool {
        for v in 0..self.n {
            for (u, w) in self.neighbours(v) {
                let mirrored = self
                    .neighbours(u as usize)
                    .any(|(x, wx)| x as usize == v && wx == w);
                if !mirrored {
                    return false;
                }
            }
        }
        true
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    #[inline]
    pub fn edge_count(&self) -> usize {
        self.weights.len() / 2
    }

    /// Neighbours of `v` with edge weights, ascending by index.
    pub fn neighbours(&self, v: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let lo = self.row_ptr[v];
        let hi = self.row_ptr[v + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.weights[lo..hi].iter().copied())
    }

    /// Sum of incident edge weights.
    pub fn degree(&self, v: usize) -> Result<f64> {
        if v >= self.n {
            return Err(Error::IndexOutOfRange {
                index: v,
                len: self.n,
            });
        }
        let lo = self.row_ptr[v];
        let hi = self.row_ptr[v + 1];
        Ok(self.weights[lo..hi].iter().sum())
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| {
                self.weights[self.row_ptr[v]..self.row_ptr[v + 1]]
                    .iter()
                    .sum()
            })
            .collect()
    }

    /// Graph Laplacian. Unnormalized: `L = D - A`. Normalized:
    /// `N = I - D^{-1/2} A D^{-1/2}`, where a zero-degree vertex
    /// contributes an identity row.
    pub fn laplacian(&self, normalized: bool) -> CsrMatrix {
        let degrees = self.degrees();
        let inv_sqrt: Vec<f64> = degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.weights.len() + self.n);
        let mut values = Vec::with_capacity(self.weights.len() + self.n);
        row_ptr.push(0);
        for v in 0..self.n {
            let diag = if normalized {
                // Zero-degree convention: identity row.
                1.0
            } else {
                degrees[v]
            };
            let mut placed_diag = false;
            for (u, w) in self.neighbours(v) {
                let u = u as usize;
                if !placed_diag && u > v {
                    col_idx.push(v as u32);
                    values.push(diag);
                    placed_diag = true;
                }
                let value = if normalized {
                    -w * inv_sqrt[v] * inv_sqrt[u]
                } else {
                    -w
                };
                col_idx.push(u as u32);
                values.push(value);
            }
            if !placed_diag {
                col_idx.push(v as u32);
                values.push(diag);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Writes the edge list as `i j w` lines, one per undirected edge,
    /// ascending by `(i, j)`.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for v in 0..self.n {
            for (u, w) in self.neighbours(v) {
                if (u as usize) > v {
                    writeln!(out, "{} {} {}", v, u, w)?;
                }
            }
        }
        Ok(())
    }
}

/// Square sparse matrix in CSR form; here always symmetric.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// `y = M x`. Rows are independent, so the parallel evaluation is
    /// bitwise identical to the sequential one.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        y.par_iter_mut().enumerate().for_each(|(v, slot)| {
            let lo = self.row_ptr[v];
            let hi = self.row_ptr[v + 1];
            let mut acc = 0.0;
            for k in lo..hi {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            *slot = acc;
        });
    }

    pub(crate) fn row(&self, v: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[v];
        let hi = self.row_ptr[v + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Dense copy, for small-matrix tests and the dense eigensolver
    /// path.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for v in 0..self.n {
            let (cols, vals) = self.row(v);
            for (c, val) in cols.iter().zip(vals.iter()) {
                out[v][*c as usize] = *val;
            }
        }
        out
    }
}
