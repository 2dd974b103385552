//! Kernel functions, exact kernel density, and a hash-accelerated
//! Gaussian density estimator.
//!
//! The kernel density of a query `q` against data `x_1..x_n` is
//! `K(q) = (1/n) * sum_i k(||q - x_i||)`. [`ExactKde`] evaluates the sum
//! directly in `O(n d)` per query. [`CknsGaussianKde`] estimates it by
//! importance sampling: the dataset is subsampled at geometric rates
//! `1, 1/2, 1/4, ...`, one locality-sensitive hash table is built per
//! rate, and a query recovers from table `j` the points whose kernel
//! value lies in the band `(2^-(j+1), 2^-j]`, reweighting each
//! recovered point by the inverse sampling rate and by its analytic
//! recovery probability so the estimate is unbiased over the
//! construction randomness.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::data::{squared_distance, DataPoint, DenseMatrix};
use crate::error::{Error, Result};
use crate::lsh::{boosted_from_single, collision_probability_unchecked, E2LshTable, LshScratch};
use crate::util::split_seed;
use crate::util::stream_rng;

use rand::Rng;

const TAG_SAMPLE: u64 = 0x5355_4253;
const TAG_TABLE: u64 = 0x5441_424c;

/// Supported kernel families. All satisfy `k(c) in [0, 1]`, evenness,
/// and monotone decay in `|c|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    Exponential,
    Logistic,
}

/// A kernel family plus its bandwidth. The logistic kernel takes no
/// bandwidth.
#[derive(Debug, Clone, Copy)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelConfig {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn exponential(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential, bandwidth)
    }

    pub fn logistic() -> Self {
        Self {
            family: KernelFamily::Logistic,
            bandwidth: 1.0,
        }
    }

    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if family != KernelFamily::Logistic && !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(Self { family, bandwidth })
    }
}

/// Kernel value at (signed) distance `c`.
#[inline]
pub fn kernel_eval(config: KernelConfig, c: f64) -> f64 {
    match config.family {
        KernelFamily::Gaussian => (-config.bandwidth * c * c).exp(),
        KernelFamily::Exponential => (-config.bandwidth * c.abs()).exp(),
        KernelFamily::Logistic => 4.0 / (2.0 + c.exp() + (-c).exp()),
    }
}

#[inline]
fn gaussian_of_sq(bandwidth: f64, c_squared: f64) -> f64 {
    (-bandwidth * c_squared).exp()
}

/// Gaussian kernel similarity `exp(-a * ||x - y||^2)` between two points.
pub fn gaussian_kernel(bandwidth: f64, x: &DataPoint<'_>, y: &DataPoint<'_>) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: y.dim(),
        });
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    Ok(gaussian_of_sq(
        bandwidth,
        squared_distance(x.coords(), y.coords()),
    ))
}

/// Exact kernel density: one kernel evaluation per stored point per
/// query.
pub struct ExactKde {
    data: DenseMatrix,
    config: KernelConfig,
    evals: AtomicU64,
}

impl ExactKde {
    pub fn new(data: DenseMatrix, config: KernelConfig) -> Result<Self> {
        if data.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            data,
            config,
            evals: AtomicU64::new(0),
        })
    }

    /// Exact Gaussian density structure with bandwidth `a`.
    pub fn gaussian(data: DenseMatrix, bandwidth: f64) -> Result<Self> {
        Self::new(data, KernelConfig::gaussian(bandwidth)?)
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn config(&self) -> KernelConfig {
        self.config
    }

    /// Mean kernel value between `q` and every stored point.
    pub fn query(&self, q: &DataPoint<'_>) -> Result<f64> {
        if q.dim() != self.data.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.data.cols(),
                actual: q.dim(),
            });
        }
        let mut sum = 0.0;
        for row in self.data.iter_rows() {
            let c = squared_distance(q.coords(), row).sqrt();
            sum += kernel_eval(self.config, c);
        }
        self.evals
            .fetch_add(self.data.rows() as u64, Ordering::Relaxed);
        Ok(sum / self.data.rows() as f64)
    }

    /// Densities for every row of `queries`, in row order. Equivalent to
    /// a loop over [`Self::query`].
    pub fn query_batch(&self, queries: &DenseMatrix) -> Result<Vec<f64>> {
        if queries.rows() > 0 && queries.cols() != self.data.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.data.cols(),
                actual: queries.cols(),
            });
        }
        let rows: Vec<usize> = (0..queries.rows()).collect();
        rows.par_iter()
            .map(|&i| self.query(&DataPoint::new(queries.row(i))))
            .collect()
    }

    /// Kernel evaluations performed since construction.
    pub fn kernel_eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

/// How per-copy estimates are combined into the final estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Arithmetic mean of per-copy estimates (the variance-reducing
    /// default).
    #[default]
    Mean,
    /// Median of the per-copy estimates; more robust to heavy tails.
    MedianOfMeans,
}

/// Tuning knobs for [`CknsGaussianKde`]. `Default` gives the standard
/// configuration; the named constructors on the estimator cover the
/// common cases.
#[derive(Debug, Clone)]
pub struct CknsParams {
    /// Accuracy parameter in (0, 1]; drives the default copy count.
    pub eps: f64,
    /// Assumed lower bound on any query's true density; `None` means
    /// `1/n`. Sets the number of subsampling levels.
    pub min_mu: Option<f64>,
    /// Number of independent copies; `None` derives
    /// `ceil(eps^-2 * log2(n))`, capped at 64.
    pub k1: Option<usize>,
    /// Multiplier on the per-level hash-function count. 5 is neutral.
    pub k2_constant: f64,
    /// Extra subsampling exponent: every level's rate is multiplied by
    /// `2^-p_offset`.
    pub p_offset: u32,
    /// Cap on the number of hash tables per level.
    pub max_tables: usize,
    /// Recovery probability targeted at each level's outer band radius;
    /// bounds the hash-function count so the table cap stays effective.
    pub target_recall: f64,
    /// Per-level failure probability in the table-count formula.
    pub table_fail_prob: f64,
    pub aggregation: Aggregation,
}

impl Default for CknsParams {
    fn default() -> Self {
        Self {
            eps: 0.5,
            min_mu: None,
            k1: None,
            k2_constant: 5.0,
            p_offset: 0,
            max_tables: 128,
            target_recall: 0.85,
            table_fail_prob: 0.1,
            aggregation: Aggregation::Mean,
        }
    }
}

const DEFAULT_MAX_K1: usize = 64;
const NEUTRAL_K2: f64 = 5.0;

/// Per-query workspace shared across copies and levels.
struct QueryScratch {
    lsh: LshScratch,
    scaled_q: Vec<f64>,
    candidates: Vec<u32>,
}

impl QueryScratch {
    fn new(dim: usize) -> Self {
        Self {
            lsh: LshScratch::new(),
            scaled_q: vec![0.0; dim],
            candidates: Vec::new(),
        }
    }
}

struct Level {
    /// Bernoulli subsampling rate, `min(1, 2^-(j + p_offset))`.
    #[allow(dead_code)]
    rate: f64,
    /// Inverse sampling rate applied to recovered contributions.
    weight: f64,
    /// Points are hashed scaled by `1/r_j` so the band's outer radius
    /// maps to distance 1, where the collision probability is a fixed
    /// operating point independent of the bandwidth.
    scale: f64,
    /// Kernel band `(band_lo, band_hi]` served by this level. The last
    /// level uses `band_lo = 0` and also absorbs the tail below the
    /// resolution of `min_mu`.
    band_lo: f64,
    band_hi: f64,
    /// Original row ids of the subsample, in row order.
    ids: Vec<u32>,
    table: Option<E2LshTable>,
    hashes_per_table: usize,
    tables: usize,
}

/// Hash-based Gaussian kernel density estimator.
///
/// Construction builds `k1` independent copies. Each copy holds
/// `ceil(log2(1/min_mu)) + 1` levels; level `j` is a Bernoulli
/// `2^-(j + p_offset)` subsample of the dataset indexed by an
/// [`E2LshTable`]. A query sums, over levels, the recovered points
/// whose kernel value falls in the level's band, each weighted by the
/// inverse sampling rate and divided by its boosted collision
/// probability, and averages the per-copy sums.
///
/// Estimates are unbiased over the construction randomness and exact
/// for a query equal to a stored point when the dataset is that single
/// point. All randomness derives from the construction seed, so equal
/// seeds give bit-identical estimators.
pub struct CknsGaussianKde {
    data: DenseMatrix,
    bandwidth: f64,
    min_mu: f64,
    k1: usize,
    p_offset: u32,
    aggregation: Aggregation,
    copies: Vec<Vec<Level>>,
    evals: AtomicU64,
}

impl CknsGaussianKde {
    /// Default configuration: `eps = 0.5`, `min_mu = 1/n`, derived copy
    /// count.
    pub fn new(data: DenseMatrix, bandwidth: f64, seed: u64) -> Result<Self> {
        Self::with_params(data, bandwidth, &CknsParams::default(), seed)
    }

    /// Controls the accuracy/time trade-off through `eps` and `min_mu`.
    pub fn with_error_params(
        data: DenseMatrix,
        bandwidth: f64,
        eps: f64,
        min_mu: f64,
        seed: u64,
    ) -> Result<Self> {
        let params = CknsParams {
            eps,
            min_mu: Some(min_mu),
            ..CknsParams::default()
        };
        Self::with_params(data, bandwidth, &params, seed)
    }

    /// Full control over the estimator constants.
    pub fn with_constants(
        data: DenseMatrix,
        bandwidth: f64,
        min_mu: f64,
        k1: usize,
        k2_constant: f64,
        p_offset: u32,
        seed: u64,
    ) -> Result<Self> {
        let params = CknsParams {
            min_mu: Some(min_mu),
            k1: Some(k1),
            k2_constant,
            p_offset,
            ..CknsParams::default()
        };
        Self::with_params(data, bandwidth, &params, seed)
    }

    pub fn with_params(
        data: DenseMatrix,
        bandwidth: f64,
        params: &CknsParams,
        seed: u64,
    ) -> Result<Self> {
        let n = data.rows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        if !(params.eps > 0.0 && params.eps <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 1], got {}",
                params.eps
            )));
        }
        let min_mu = params.min_mu.unwrap_or(1.0 / n as f64);
        if !(min_mu > 0.0 && min_mu <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "min_mu must lie in (0, 1], got {min_mu}"
            )));
        }
        let k1 = match params.k1 {
            Some(0) => {
                return Err(Error::InvalidParameter("k1 must be at least 1".into()));
            }
            Some(k1) => k1,
            None => {
                let derived = (params.eps.powi(-2) * (n as f64).log2()).ceil() as usize;
                derived.clamp(1, DEFAULT_MAX_K1)
            }
        };
        if !(params.k2_constant > 0.0 && params.k2_constant.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "k2_constant must be positive, got {}",
                params.k2_constant
            )));
        }
        if params.max_tables == 0 {
            return Err(Error::InvalidParameter(
                "max_tables must be at least 1".into(),
            ));
        }
        if !(params.target_recall > 0.0 && params.target_recall < 1.0) {
            return Err(Error::InvalidParameter(
                "target_recall must lie in (0, 1)".into(),
            ));
        }
        if !(params.table_fail_prob > 0.0 && params.table_fail_prob < 1.0) {
            return Err(Error::InvalidParameter(
                "table_fail_prob must lie in (0, 1)".into(),
            ));
        }
        if params.p_offset > 60 {
            // Beyond this every sampling rate underflows to nothing.
            return Err(Error::InvalidParameter(format!(
                "p_offset must be at most 60, got {}",
                params.p_offset
            )));
        }

        // ceil(log2(1/min_mu)) sampled halvings, plus the rate-1 level
        // serving the nearest band.
        let halvings = (1.0 / min_mu).log2().ceil().max(0.0) as u32;
        let num_levels = halvings as usize + 1;

        let copies: Vec<Vec<Level>> = (0..k1)
            .into_par_iter()
            .map(|copy| build_copy(&data, bandwidth, params, seed, copy, num_levels))
            .collect::<Result<_>>()?;

        Ok(Self {
            data,
            bandwidth,
            min_mu,
            k1,
            p_offset: params.p_offset,
            aggregation: params.aggregation,
            copies,
            evals: AtomicU64::new(0),
        })
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn min_mu(&self) -> f64 {
        self.min_mu
    }

    /// Number of independent copies.
    pub fn copy_count(&self) -> usize {
        self.k1
    }

    /// Number of subsampling levels per copy.
    pub fn levels_per_copy(&self) -> usize {
        self.copies.first().map(|c| c.len()).unwrap_or(0)
    }

    pub fn sampling_offset(&self) -> u32 {
        self.p_offset
    }

    /// Kernel evaluations performed by queries since construction.
    pub fn kernel_eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Density estimate for one query point.
    pub fn query(&self, q: &DataPoint<'_>) -> Result<f64> {
        self.check_dim(q)?;
        let mut scratch = QueryScratch::new(self.data.cols());
        let mut per_copy = Vec::with_capacity(self.k1);
        let mut evals = 0u64;
        for levels in &self.copies {
            per_copy.push(self.copy_sum(
                levels,
                q.coords(),
                &mut scratch,
                &mut evals,
                &mut |_, _| {},
            ));
        }
        self.evals.fetch_add(evals, Ordering::Relaxed);
        Ok(self.aggregate(&mut per_copy))
    }

    /// Estimates for every row of `queries`; identical to a loop of
    /// single queries over the same estimator.
    pub fn query_batch(&self, queries: &DenseMatrix) -> Result<Vec<f64>> {
        if queries.rows() > 0 && queries.cols() != self.data.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.data.cols(),
                actual: queries.cols(),
            });
        }
        let rows: Vec<usize> = (0..queries.rows()).collect();
        rows.par_iter()
            .map(|&i| self.query(&DataPoint::new(queries.row(i))))
            .collect()
    }

    /// Density estimate plus the reweighted contribution of every
    /// recovered point, summed across copies and levels. The estimate
    /// equals `sum(contributions) / (n * k1)` under mean aggregation.
    ///
    /// This is the support the similarity-graph sampler draws from:
    /// each contribution is, in expectation over the construction
    /// randomness, proportional to the point's kernel similarity to
    /// `q`.
    pub fn query_contributions(&self, q: &DataPoint<'_>) -> Result<(f64, Vec<(usize, f64)>)> {
        self.check_dim(q)?;
        let mut scratch = QueryScratch::new(self.data.cols());
        let mut contributions = Vec::new();
        let mut evals = 0u64;
        let mut total = 0.0;
        for levels in &self.copies {
            total += self.copy_sum(
                levels,
                q.coords(),
                &mut scratch,
                &mut evals,
                &mut |id, contrib| {
                    contributions.push((id, contrib));
                },
            );
        }
        self.evals.fetch_add(evals, Ordering::Relaxed);
        let estimate = (total / self.k1 as f64).max(0.0);
        Ok((estimate, contributions))
    }

    fn check_dim(&self, q: &DataPoint<'_>) -> Result<()> {
        if q.dim() != self.data.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.data.cols(),
                actual: q.dim(),
            });
        }
        Ok(())
    }

    /// Per-copy estimate: the reweighted in-band contributions of the
    /// points recovered at each level, divided by n.
    fn copy_sum(
        &self,
        levels: &[Level],
        q: &[f64],
        scratch: &mut QueryScratch,
        evals: &mut u64,
        visit: &mut impl FnMut(usize, f64),
    ) -> f64 {
        let n = self.data.rows() as f64;
        let mut sum = 0.0;
        for level in levels {
            let Some(table) = &level.table else { continue };
            for (dst, &src) in scratch.scaled_q.iter_mut().zip(q.iter()) {
                *dst = src * level.scale;
            }
            table.near_neighbours_into(
                &scratch.scaled_q,
                &mut scratch.lsh,
                &mut scratch.candidates,
            );
            for &local in &scratch.candidates {
                let id = level.ids[local as usize] as usize;
                let c_sq = squared_distance(q, self.data.row(id));
                *evals += 1;
                let kern = gaussian_of_sq(self.bandwidth, c_sq);
                if kern > level.band_lo && kern <= level.band_hi {
                    // Divide by the probability this point was recovered,
                    // given it was sampled: collisions are a function of
                    // the hashed (scaled) distance.
                    let p = collision_probability_unchecked(c_sq.sqrt() * level.scale);
                    let recall = boosted_from_single(p, level.hashes_per_table, level.tables)
                        .max(f64::MIN_POSITIVE);
                    let contrib = level.weight * kern / recall;
                    visit(id, contrib);
                    sum += contrib;
                }
            }
        }
        sum / n
    }

    fn aggregate(&self, per_copy: &mut [f64]) -> f64 {
        let value = match self.aggregation {
            Aggregation::Mean => per_copy.iter().sum::<f64>() / per_copy.len() as f64,
            Aggregation::MedianOfMeans => {
                per_copy.sort_by(|a, b| a.partial_cmp(b).expect("estimates are finite"));
                let mid = per_copy.len() / 2;
                if per_copy.len() % 2 == 1 {
                    per_copy[mid]
                } else {
                    0.5 * (per_copy[mid - 1] + per_copy[mid])
                }
            }
        };
        value.max(0.0)
    }

    #[cfg(test)]
    pub(crate) fn level_rates(&self, copy: usize) -> Vec<f64> {
        self.copies[copy].iter().map(|l| l.rate).collect()
    }

    #[cfg(test)]
    pub(crate) fn level_bands(&self, copy: usize) -> Vec<(f64, f64)> {
        self.copies[copy]
            .iter()
            .map(|l| (l.band_lo, l.band_hi))
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn level_sample_ids(&self, copy: usize, level: usize) -> &[u32] {
        &self.copies[copy][level].ids
    }
}

/// Per-level hash parameters: enough concatenated functions to thin
/// far-point collisions towards `1/n_level` per table, but few enough
/// that `max_tables` tables still recover a point at the band's outer
/// radius with probability `target_recall`; the table count then
/// follows from the single-table collision probability.
fn level_hash_params(n_level: usize, params: &CknsParams) -> (usize, usize) {
    let p_near = collision_probability_unchecked(1.0);
    let ln_inv_p = -p_near.ln();
    let k_raw = (params.k2_constant / NEUTRAL_K2) * (n_level.max(2) as f64).ln() / ln_inv_p;
    let needed_mass = (1.0 / (1.0 - params.target_recall)).ln();
    let k_recall_cap = ((params.max_tables as f64 / needed_mass).ln() / ln_inv_p).floor();
    let k_max = if k_recall_cap >= 1.0 {
        k_recall_cap as usize
    } else {
        1
    };
    let k = (k_raw.ceil() as usize).clamp(1, k_max);
    let l_raw = ((k as f64 * ln_inv_p).exp() * (1.0 / params.table_fail_prob).ln()).ceil();
    let l = (l_raw as usize).clamp(1, params.max_tables);
    (k, l)
}

fn build_copy(
    data: &DenseMatrix,
    bandwidth: f64,
    params: &CknsParams,
    seed: u64,
    copy: usize,
    num_levels: usize,
) -> Result<Vec<Level>> {
    let n = data.rows();
    let d = data.cols();
    let ln2 = std::f64::consts::LN_2;
    let mut levels = Vec::with_capacity(num_levels);
    for j in 0..num_levels {
        let exponent = j as i32 + params.p_offset as i32;
        let rate = 0.5f64.powi(exponent).min(1.0);
        let weight = 1.0 / rate;
        let outer_radius = (((j + 1) as f64) * ln2 / bandwidth).sqrt();
        let scale = 1.0 / outer_radius;
        let band_hi = 0.5f64.powi(j as i32);
        let band_lo = if j + 1 == num_levels {
            0.0
        } else {
            0.5f64.powi(j as i32 + 1)
        };

        let mut rng = stream_rng(seed, &[TAG_SAMPLE, copy as u64, j as u64]);
        let ids: Vec<u32> = if rate >= 1.0 {
            (0..n as u32).collect()
        } else {
            (0..n as u32)
                .filter(|_| rng.random::<f64>() < rate)
                .collect()
        };

        let table = if ids.is_empty() {
            None
        } else {
            let mut scaled = Vec::with_capacity(ids.len() * d);
            for &id in &ids {
                scaled.extend(data.row(id as usize).iter().map(|v| v * scale));
            }
            let scaled = DenseMatrix::new(ids.len(), d, scaled)?;
            let points: Vec<DataPoint<'_>> = scaled.iter_rows().map(DataPoint::new).collect();
            let (k, l) = level_hash_params(ids.len(), params);
            Some(E2LshTable::build(
                k,
                l,
                &points,
                split_seed(seed, &[TAG_TABLE, copy as u64, j as u64]),
            )?)
        };
        let (hashes_per_table, tables) = match &table {
            Some(t) => (t.k(), t.l()),
            None => (1, 1),
        };
        levels.push(Level {
            rate,
            weight,
            scale,
            band_lo,
            band_hi,
            ids,
            table,
            hashes_per_table,
            tables,
        });
    }
    Ok(levels)
}
