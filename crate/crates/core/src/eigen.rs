//! Symmetric eigensolvers used by spectral embedding: a cyclic Jacobi
//! solver for dense matrices and block orthogonal iteration with
//! Rayleigh-Ritz extraction for large sparse operators.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::util::stream_rng;

/// Eigendecomposition of a dense symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues in nondecreasing order and the
/// matching eigenvectors as columns of a row-major `n x n` buffer.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    if n <= 1 {
        let vals = if n == 1 { vec![a[0][0]] } else { vec![] };
        return (vals, v);
    }

    let norm: f64 = matrix
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let stop = (norm * 1e-14).max(f64::MIN_POSITIVE);

    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p][p];
                let aqq = a[q][q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).expect("finite eigenvalues"));
    let values: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let mut vectors = vec![vec![0.0; n]; n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r][new_col] = v[r][old_col];
        }
    }
    (values, vectors)
}

/// The `k` smallest eigenpairs of a symmetric CSR matrix whose spectrum
/// lies in `[0, 2]` (a normalized Laplacian), computed by block
/// orthogonal iteration on the shifted operator `2I - N`.
///
/// Returns `(eigenvalues, vectors)` with eigenvalues nondecreasing and
/// vectors stored column-major in a flat `n * k` buffer
/// (`vectors[r * k + c]`). Residuals `||N v - lambda v||` are driven
/// below `tol` for every returned pair.
pub fn smallest_eigenpairs(
    n_mat: &CsrMatrix,
    k: usize,
    tol: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = n_mat.n();
    assert!(k >= 1 && k <= n);

    // Shifted operator: apply(x) = 2x - Nx; its top eigenpairs are the
    // bottom eigenpairs of N.
    let apply = |x: &[f64], y: &mut [f64]| {
        n_mat.matvec(x, y);
        for (yi, xi) in y.iter_mut().zip(x.iter()) {
            *yi = 2.0 * xi - *yi;
        }
    };

    let block = (k + 8).min(n);
    let max_iter = (10 * n).max(400);
    let mut rng = stream_rng(seed, &[0x6569_6765]);
    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    orthonormalize(&mut basis);

    let mut theta = vec![0.0; block];
    let mut work = vec![0.0; n];
    let mut iter = 0;
    loop {
        iter += 1;
        // Power step.
        for col in basis.iter_mut() {
            apply(col, &mut work);
            std::mem::swap(col, &mut work);
        }
        orthonormalize(&mut basis);

        // Rayleigh-Ritz on the block.
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(block);
        for col in &basis {
            let mut img = vec![0.0; n];
            apply(col, &mut img);
            images.push(img);
        }
        let mut small = vec![vec![0.0; block]; block];
        for i in 0..block {
            for j in i..block {
                let dot = dot(&basis[i], &images[j]);
                small[i][j] = dot;
                small[j][i] = dot;
            }
        }
        let (vals, vecs) = jacobi_eigen(&small);
        // Largest of the shifted operator first.
        let mut rotated: Vec<Vec<f64>> = vec![vec![0.0; n]; block];
        for (slot, target) in rotated.iter_mut().enumerate() {
            let col = block - 1 - slot;
            for (i, b) in basis.iter().enumerate() {
                let c = vecs[i][col];
                if c != 0.0 {
                    for (t, bv) in target.iter_mut().zip(b.iter()) {
                        *t += c * bv;
                    }
                }
            }
            theta[slot] = vals[col];
        }
        basis = rotated;

        // Residual check on the k wanted pairs.
        let mut converged = true;
        for i in 0..k {
            apply(&basis[i], &mut work);
            let mut res = 0.0;
            for (w, b) in work.iter().zip(basis[i].iter()) {
                let r = w - theta[i] * b;
                res += r * r;
            }
            if res.sqrt() > tol {
                converged = false;
                break;
            }
        }
        if converged {
            break;
        }
        if iter >= max_iter {
            return Err(Error::NonConvergence { iterations: iter });
        }
    }

    let mut values: Vec<f64> = theta[..k].iter().map(|t| 2.0 - t).collect();
    // theta is nonincreasing, so values are nondecreasing already;
    // enforce it exactly against round-off.
    for i in 1..k {
        if values[i] < values[i - 1] {
            values.swap(i, i - 1);
            basis.swap(i, i - 1);
        }
    }
    let mut flat = vec![0.0; n * k];
    for (c, col) in basis[..k].iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            flat[r * k + c] = *v;
        }
    }
    Ok((values, flat))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Modified Gram-Schmidt, two passes. Columns that cancel numerically
/// are replaced by unit coordinate vectors and re-orthogonalized.
fn orthonormalize(cols: &mut [Vec<f64>]) {
    let n = cols.first().map(|c| c.len()).unwrap_or(0);
    let m = cols.len();
    for i in 0..m {
        for _pass in 0..2 {
            for j in 0..i {
                let proj = dot(&cols[i], &cols[j]);
                if proj != 0.0 {
                    let (left, right) = cols.split_at_mut(i);
                    for (x, y) in right[0].iter_mut().zip(left[j].iter()) {
                        *x -= proj * y;
                    }
                }
            }
        }
        let norm = dot(&cols[i], &cols[i]).sqrt();
        if norm > 1e-12 {
            for x in cols[i].iter_mut() {
                *x /= norm;
            }
        } else {
            // Degenerate column: restart from a coordinate vector.
            for (idx, x) in cols[i].iter_mut().enumerate() {
                *x = if idx == i % n { 1.0 } else { 0.0 };
            }
            for j in 0..i {
                let proj = dot(&cols[i], &cols[j]);
                let (left, right) = cols.split_at_mut(i);
                for (x, y) in right[0].iter_mut().zip(left[j].iter()) {
                    *x -= proj * y;
                }
            }
            let norm = dot(&cols[i], &cols[i]).sqrt().max(f64::MIN_POSITIVE);
            for x in cols[i].iter_mut() {
                *x /= norm;
            }
        }
    }
}
