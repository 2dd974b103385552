//! Euclidean locality-sensitive hashing.
//!
//! The base hash function projects a point onto a random direction
//! drawn from the standard normal distribution, shifts by a random
//! offset, and discretises into width-4 buckets:
//!
//! ```text
//! h(x) = floor((<x, a> + b) / 4),   a ~ N(0, I),  b ~ U[0, 4)
//! ```
//!
//! Two points at Euclidean distance `c` collide under a random `h`
//! with probability [`collision_probability`]`(c)`. Concatenating `K`
//! functions and repeating over `L` independent tables yields the
//! boosted probability `1 - (1 - p(c)^K)^L`, implemented by
//! [`E2LshTable`].

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{DataPoint, DenseMatrix};
use crate::error::{Error, Result};
use crate::util::{mix64, stream_rng, FixedState};

/// Width of the discretisation buckets.
pub const BUCKET_WIDTH: f64 = 4.0;

const SQRT_2PI: f64 = 2.5066282746310002;

/// End-of-chain marker in the bucket chains.
const NIL: u32 = u32::MAX;

/// A single random-projection hash function.
#[derive(Debug, Clone)]
pub struct LshFunction {
    projection: Vec<f64>,
    offset: f64,
}

impl LshFunction {
    /// Draws a function for `dim`-dimensional data from the hash family.
    pub fn sample<R: Rng>(dim: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let projection = (0..dim)
            .map(|_| StandardNormal.sample(rng))
            .collect::<Vec<f64>>();
        let offset = rng.random::<f64>() * BUCKET_WIDTH;
        Ok(Self { projection, offset })
    }

    /// Builds a function from explicit parameters. `offset` must lie in
    /// `[0, 4)`.
    pub fn from_parts(projection: Vec<f64>, offset: f64) -> Result<Self> {
        if projection.is_empty() {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(0.0..BUCKET_WIDTH).contains(&offset) {
            return Err(Error::InvalidParameter(format!(
                "offset {offset} outside [0, {BUCKET_WIDTH})"
            )));
        }
        Ok(Self { projection, offset })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.projection.len()
    }

    /// Bucket id of `x`: `floor((<x, a> + b) / 4)`.
    pub fn apply(&self, x: &DataPoint<'_>) -> Result<i64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim(),
            });
        }
        Ok(bucket_of(&self.projection, self.offset, x.coords()))
    }
}

#[inline]
fn bucket_of(projection: &[f64], offset: f64, coords: &[f64]) -> i64 {
    let mut dot = 0.0;
    for (c, a) in coords.iter().zip(projection.iter()) {
        dot += c * a;
    }
    ((dot + offset) / BUCKET_WIDTH).floor() as i64
}

/// Probability that two points at distance `c` share a bucket under a
/// random hash function.
///
/// For `c > 0` this is the closed form
/// `erf(2*sqrt(2)/c) - c/(2*sqrt(2*pi)) * (1 - exp(-8/c^2))`; the value
/// at `c = 0` is the limit 1.
pub fn collision_probability(c: f64) -> Result<f64> {
    if !c.is_finite() || c < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "distance must be a finite non-negative number, got {c}"
        )));
    }
    Ok(collision_probability_unchecked(c))
}

#[inline]
pub(crate) fn collision_probability_unchecked(c: f64) -> f64 {
    if c == 0.0 {
        return 1.0;
    }
    let erf_term = libm::erf(2.0 * std::f64::consts::SQRT_2 / c);
    let decay = 1.0 - (-8.0 / (c * c)).exp();
    erf_term - c / (2.0 * SQRT_2PI) * decay
}

/// Collision probability after boosting with `k` concatenated
/// functions across `l` tables: `1 - (1 - p(c)^k)^l`.
pub fn boosted_collision_probability(c: f64, k: usize, l: usize) -> Result<f64> {
    if k == 0 || l == 0 {
        return Err(Error::InvalidParameter("k and l must be at least 1".into()));
    }
    let p = collision_probability(c)?;
    Ok(boosted_from_single(p, k, l))
}

/// Boosted probability from an already-known single-function
/// probability. Evaluated in log space so tiny `p^k` stays accurate.
#[inline]
pub(crate) fn boosted_from_single(p: f64, k: usize, l: usize) -> f64 {
    if p >= 1.0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    let pk = (k as f64 * p.ln()).exp();
    if pk >= 1.0 {
        return 1.0;
    }
    1.0 - (l as f64 * (-pk).ln_1p()).exp()
}

/// One hash table: `k` functions stored as a flat `k x dim` projection
/// block, and buckets kept as intrusive chains over the point indices
/// (`heads` maps a combined bucket key to the most recently inserted
/// point, `next` links the rest).
struct BucketTable {
    projections: Vec<f64>,
    offsets: Vec<f64>,
    heads: HashMap<u64, u32, FixedState>,
    next: Vec<u32>,
}

impl BucketTable {
    #[inline]
    fn fill_key(&self, dim: usize, coords: &[f64], key: &mut [i64]) {
        for (slot, (proj, offset)) in key
            .iter_mut()
            .zip(self.projections.chunks_exact(dim).zip(self.offsets.iter()))
        {
            *slot = bucket_of(proj, *offset, coords);
        }
    }
}

/// Reusable query workspace so hot paths avoid per-call allocation.
pub(crate) struct LshScratch {
    seen: HashSet<u32, FixedState>,
    q_key: Vec<i64>,
    cand_key: Vec<i64>,
}

impl LshScratch {
    pub(crate) fn new() -> Self {
        Self {
            seen: HashSet::with_hasher(FixedState),
            q_key: Vec::new(),
            cand_key: Vec::new(),
        }
    }
}

/// Euclidean LSH hash table over a stored point set.
///
/// Each stored point lands in exactly one bucket per table; each of the
/// `l` tables keys its buckets by the tuple of `k` bucket ids. A query
/// returns the deduplicated union of the matching buckets, so a stored
/// point at distance `c` from the query is returned with probability
/// `1 - (1 - p(c)^k)^l` over the construction randomness.
///
/// The table owns a copy of the stored coordinates, which keeps it
/// usable independently of the source matrix and lets it confirm full
/// bucket tuples when combined 64-bit keys alias.
pub struct E2LshTable {
    k: usize,
    l: usize,
    dim: usize,
    points: DenseMatrix,
    tables: Vec<BucketTable>,
}

impl E2LshTable {
    /// Hashes `points` into `l` tables of `k` functions each.
    ///
    /// An empty point set is allowed (every query returns nothing);
    /// mixed dimensions are rejected.
    pub fn build(k: usize, l: usize, points: &[DataPoint<'_>], seed: u64) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::InvalidParameter("k and l must be at least 1".into()));
        }
        let dim = points.first().map(|p| p.dim()).unwrap_or(0);
        for p in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.dim(),
                });
            }
        }
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            data.extend_from_slice(p.coords());
        }
        let n = points.len();
        let stored_dim = dim.max(1);
        let points =
            DenseMatrix::new(n, stored_dim, data).unwrap_or_else(|_| DenseMatrix::zeros(0, 1));

        let mut tables = Vec::with_capacity(l);
        let mut key = vec![0i64; k];
        for t in 0..l {
            let mut rng = stream_rng(seed, &[0x4c53_4854, t as u64]);
            let mut projections = Vec::with_capacity(k * stored_dim);
            let mut offsets = Vec::with_capacity(k);
            for _ in 0..k {
                for _ in 0..stored_dim {
                    projections.push(StandardNormal.sample(&mut rng));
                }
                offsets.push(rng.random::<f64>() * BUCKET_WIDTH);
            }
            let mut table = BucketTable {
                projections,
                offsets,
                heads: HashMap::with_capacity_and_hasher(n, FixedState),
                next: vec![NIL; n],
            };
            for idx in 0..n {
                table.fill_key(stored_dim, points.row(idx), &mut key);
                let head = table.heads.entry(combine_key(&key)).or_insert(NIL);
                table.next[idx] = *head;
                *head = idx as u32;
            }
            tables.push(table);
        }
        Ok(Self {
            k,
            l,
            dim,
            points,
            tables,
        })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn l(&self) -> usize {
        self.l
    }

    /// Number of stored points.
    #[inline]
    pub fn len(&self) -> usize {
        self.points.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// Coordinates of stored point `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> &[f64] {
        self.points.row(idx)
    }

    /// Indices of stored points sharing a bucket tuple with `q` in at
    /// least one table. Each index appears exactly once, in a
    /// deterministic order.
    pub fn near_neighbours(&self, q: &DataPoint<'_>) -> Result<Vec<usize>> {
        if !self.is_empty() && q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: q.dim(),
            });
        }
        let mut scratch = LshScratch::new();
        let mut out = Vec::new();
        self.near_neighbours_into(q.coords(), &mut scratch, &mut out);
        Ok(out.into_iter().map(|i| i as usize).collect())
    }

    /// Allocation-free variant for hot paths; `q` must already have the
    /// stored dimension.
    pub(crate) fn near_neighbours_into(
        &self,
        q: &[f64],
        scratch: &mut LshScratch,
        out: &mut Vec<u32>,
    ) {
        out.clear();
        if self.is_empty() {
            return;
        }
        debug_assert_eq!(q.len(), self.dim);
        let dim = self.dim.max(1);
        scratch.seen.clear();
        scratch.q_key.resize(self.k, 0);
        scratch.cand_key.resize(self.k, 0);
        for table in &self.tables {
            table.fill_key(dim, q, &mut scratch.q_key);
            let Some(&head) = table.heads.get(&combine_key(&scratch.q_key)) else {
                continue;
            };
            let mut cursor = head;
            while cursor != NIL {
                let idx = cursor;
                cursor = table.next[idx as usize];
                if scratch.seen.contains(&idx) {
                    continue;
                }
                // The 64-bit bucket key can alias distinct tuples;
                // confirm the full tuple before accepting.
                table.fill_key(dim, self.points.row(idx as usize), &mut scratch.cand_key);
                if scratch.cand_key == scratch.q_key {
                    scratch.seen.insert(idx);
                    out.push(idx);
                }
            }
        }
    }
}

#[inline]
fn combine_key(tuple: &[i64]) -> u64 {
    let mut h = 0x9f4a_7c15_u64;
    for &v in tuple {
        h = mix64(h ^ (v as u64));
    }
    h
}
