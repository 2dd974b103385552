//! Seed derivation and a fixed-state hasher.
//!
//! Reproducibility rule: every independent random stream is a
//! `ChaCha8Rng` seeded with `split_seed(master, tags...)`, where the
//! tags identify the consumer (copy index, level index, vertex index,
//! ...). The same master seed therefore produces the same streams
//! regardless of thread scheduling.

use std::hash::{BuildHasher, Hasher};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a tag path.
pub fn split_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = mix64(master ^ 0x243f6a8885a308d3);
    for &t in tags {
        s = mix64(s ^ t);
    }
    s
}

/// Seeded generator for the stream identified by `tags`.
pub fn stream_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(master, tags))
}

/// Hasher with fixed initial state so hash maps behave identically
/// across processes. Used for bucket maps only; outputs never depend on
/// map iteration order.
#[derive(Clone, Default)]
pub struct FixedState;

pub struct FixedHasher(u64);

impl BuildHasher for FixedState {
    type Hasher = FixedHasher;

    fn build_hasher(&self) -> FixedHasher {
        FixedHasher(0x51_7c_c1_b7_27_22_0a_95)
    }
}

impl Hasher for FixedHasher {
    #[inline]
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = mix64(self.0 ^ u64::from(b));
        }
    }

    #[inline]
    fn write_u64(&mut self, v: u64) {
        self.0 = mix64(self.0 ^ v);
    }

    #[inline]
    fn finish(&self) -> u64 {
        self.0
    }
}
