//! Labelled synthetic datasets for benchmarks and tests.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DenseMatrix;
use crate::error::{Error, Result};
use crate::util::stream_rng;

const TAG_CENTERS: u64 = 0x636e_7472;
const TAG_POINTS: u64 = 0x706f_696e;

/// Isotropic Gaussian blobs: `k` well-separated cluster centres in
/// `d` dimensions, `n` points split as evenly as possible between
/// them, per-coordinate noise `noise`.
///
/// Centres are drawn uniformly in a box sized so that rejection
/// sampling can keep them at least `10 * noise * sqrt(d)` apart (at
/// least 1 apart when `noise` is 0, so the centres stay distinct).
/// Returns the data and the ground-truth label of every row.
pub fn blobs(
    n: usize,
    d: usize,
    k: usize,
    noise: f64,
    seed: u64,
) -> Result<(DenseMatrix, Vec<usize>)> {
    if n == 0 || d == 0 || k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "need n >= k >= 1 and d >= 1, got n={n} d={d} k={k}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise must be non-negative, got {noise}"
        )));
    }

    let separation = (10.0 * noise * (d as f64).sqrt()).max(1.0);
    let mut half_width = separation * (k as f64).powf(1.0 / d as f64).max(1.5) * 1.25;
    let mut rng = stream_rng(seed, &[TAG_CENTERS]);
    let mut centres: Vec<Vec<f64>> = Vec::with_capacity(k);
    while centres.len() < k {
        let mut attempts = 0;
        'draw: loop {
            attempts += 1;
            if attempts > 1000 {
                // Box too tight for the requested separation; widen it
                // and restart placement.
                half_width *= 1.5;
                centres.clear();
                break 'draw;
            }
            let candidate: Vec<f64> = (0..d)
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * half_width)
                .collect();
            let ok = centres.iter().all(|c| {
                let dist_sq: f64 = c
                    .iter()
                    .zip(candidate.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dist_sq.sqrt() >= separation
            });
            if ok {
                centres.push(candidate);
                break 'draw;
            }
        }
    }

    let mut rng = stream_rng(seed, &[TAG_POINTS]);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        labels.push(c);
        for j in 0..d {
            let offset: f64 = StandardNormal.sample(&mut rng);
            data.push(centres[c][j] + noise * offset);
        }
    }
    Ok((DenseMatrix::new(n, d, data)?, labels))
}

/// Two interleaved half-circles in the plane with Gaussian noise; the
/// classic non-linearly-separable two-cluster benchmark. Points are
/// split evenly (the first moon takes the extra point when `n` is
/// odd).
pub fn moons(n: usize, noise: f64, seed: u64) -> Result<(DenseMatrix, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 points, got {n}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise must be non-negative, got {noise}"
        )));
    }
    let n_upper = n - n / 2;
    let n_lower = n / 2;
    let mut rng = stream_rng(seed, &[TAG_POINTS]);
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    let arc = |count: usize, idx: usize| -> f64 {
        if count <= 1 {
            0.0
        } else {
            std::f64::consts::PI * idx as f64 / (count - 1) as f64
        }
    };
    for i in 0..n_upper {
        let t = arc(n_upper, i);
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        data.push(t.cos() + noise * nx);
        data.push(t.sin() + noise * ny);
        labels.push(0);
    }
    for i in 0..n_lower {
        let t = arc(n_lower, i);
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        data.push(1.0 - t.cos() + noise * nx);
        data.push(0.5 - t.sin() + noise * ny);
        labels.push(1);
    }
    Ok((DenseMatrix::new(n, 2, data)?, labels))
}
