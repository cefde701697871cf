//! Partial completion filter.
//!
//! A fixed grid of signed counters: `stages` independent hash functions, each
//! mapping a key to one of `buckets` counters. Opening events (SYN) add one,
//! closing events (FIN) subtract one, and a key's estimate is the minimum of
//! its counters across stages. Keys whose handshakes keep failing to complete
//! accumulate large residues; completed exchanges cancel out.
//!
//! When every key's true net count is non-negative, collisions can only
//! inflate a counter, so the estimate never falls below the true count.

use std::collections::HashSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64_with_seed;

pub const DEFAULT_STAGES: usize = 3;
pub const DEFAULT_BUCKETS: usize = 1024;
pub const DEFAULT_THRESHOLD: i64 = 512;

const TAG_DEST: u8 = 0x01;
const TAG_PAIR: u8 = 0x02;
const KEY_CAPACITY: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PcfError {
    #[error("stages must be at least 1")]
    NoStages,
    #[error("buckets must be at least 1")]
    NoBuckets,
    #[error("threshold must be at least 1, got {0}")]
    BadThreshold(i64),
    #[error("expected {expected} seeds (one per stage), got {got}")]
    SeedCount { expected: usize, got: usize },
    #[error("seed {0:#x} appears more than once")]
    DuplicateSeed(u64),
}

/// Opaque sketch key.
///
/// The two canonical constructors write a distinct tag byte first, so a
/// destination key can never equal a pair key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PcfKey {
    len: u8,
    bytes: [u8; KEY_CAPACITY],
}

impl PcfKey {
    /// Arbitrary key bytes, at most 16 of them.
    pub fn from_bytes(raw: &[u8]) -> Option<Self> {
        if raw.len() > KEY_CAPACITY {
            return None;
        }
        let mut bytes = [0u8; KEY_CAPACITY];
        bytes[..raw.len()].copy_from_slice(raw);
        Some(PcfKey {
            len: raw.len() as u8,
            bytes,
        })
    }

    /// Keys a service endpoint: destination address and port.
    pub fn dest(dip: Ipv4Addr, dp: u16) -> Self {
        let mut raw = [0u8; 7];
        raw[0] = TAG_DEST;
        raw[1..5].copy_from_slice(&dip.octets());
        raw[5..7].copy_from_slice(&dp.to_be_bytes());
        Self::from_bytes(&raw).expect("fits")
    }

    /// Keys a (source, destination) host pair.
    pub fn pair(sip: Ipv4Addr, dip: Ipv4Addr) -> Self {
        let mut raw = [0u8; 9];
        raw[0] = TAG_PAIR;
        raw[1..5].copy_from_slice(&sip.octets());
        raw[5..9].copy_from_slice(&dip.octets());
        Self::from_bytes(&raw).expect("fits")
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }
}

impl std::fmt::Debug for PcfKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PcfKey(")?;
        for b in self.as_bytes() {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    Increment,
    Decrement,
}

impl Delta {
    fn value(self) -> i64 {
        match self {
            Delta::Increment => 1,
            Delta::Decrement => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcfConfig {
    pub stages: usize,
    pub buckets: usize,
    pub threshold: i64,
    pub seeds: Vec<u64>,
}

/// Deterministic distinct per-stage seeds.
pub fn default_seeds(stages: usize) -> Vec<u64> {
    // splitmix64 increments, then one mixing round
    (1..=stages as u64)
        .map(|i| {
            let mut z = i.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            z ^ (z >> 31)
        })
        .collect()
}

impl Default for PcfConfig {
    fn default() -> Self {
        PcfConfig::new(DEFAULT_STAGES, DEFAULT_BUCKETS, DEFAULT_THRESHOLD)
    }
}

impl PcfConfig {
    pub fn new(stages: usize, buckets: usize, threshold: i64) -> Self {
        PcfConfig {
            stages,
            buckets,
            threshold,
            seeds: default_seeds(stages),
        }
    }

    pub fn with_seeds(mut self, seeds: Vec<u64>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn validate(&self) -> Result<(), PcfError> {
        if self.stages == 0 {
            return Err(PcfError::NoStages);
        }
        if self.buckets == 0 {
            return Err(PcfError::NoBuckets);
        }
        if self.threshold < 1 {
            return Err(PcfError::BadThreshold(self.threshold));
        }
        if self.seeds.len() != self.stages {
            return Err(PcfError::SeedCount {
                expected: self.stages,
                got: self.seeds.len(),
            });
        }
        let mut seen = HashSet::with_capacity(self.seeds.len());
        for &s in &self.seeds {
            if !seen.insert(s) {
                return Err(PcfError::DuplicateSeed(s));
            }
        }
        Ok(())
    }
}

fn bucket_for(seed: u64, buckets: usize, key: &PcfKey) -> usize {
    (xxh3_64_with_seed(key.as_bytes(), seed) % buckets as u64) as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pcf {
    config: PcfConfig,
    counters: Vec<i64>,
}

impl Pcf {
    pub fn new(config: PcfConfig) -> Result<Self, PcfError> {
        config.validate()?;
        let counters = vec![0; config.stages * config.buckets];
        Ok(Pcf { config, counters })
    }

    pub fn config(&self) -> &PcfConfig {
        &self.config
    }

    pub fn threshold(&self) -> i64 {
        self.config.threshold
    }

    /// Bucket index of `key` within `stage`.
    pub fn bucket(&self, stage: usize, key: &PcfKey) -> usize {
        bucket_for(self.config.seeds[stage], self.config.buckets, key)
    }

    fn slot(&self, stage: usize, key: &PcfKey) -> usize {
        stage * self.config.buckets + self.bucket(stage, key)
    }

    pub fn update(&mut self, key: &PcfKey, delta: Delta) {
        let d = delta.value();
        for stage in 0..self.config.stages {
            let slot = self.slot(stage, key);
            self.counters[slot] += d;
        }
    }

    /// Minimum over stages of the key's counters.
    pub fn estimate(&self, key: &PcfKey) -> i64 {
        (0..self.config.stages)
            .map(|stage| self.counters[self.slot(stage, key)])
            .min()
            .expect("at least one stage")
    }

    pub fn exceeds(&self, key: &PcfKey) -> bool {
        self.estimate(key) >= self.config.threshold
    }

    pub fn reset(&mut self) {
        self.counters.iter_mut().for_each(|c| *c = 0);
    }

    pub fn stage_counters(&self, stage: usize) -> &[i64] {
        let start = stage * self.config.buckets;
        &self.counters[start..start + self.config.buckets]
    }

    pub fn stage_sum(&self, stage: usize) -> i64 {
        self.stage_counters(stage).iter().sum()
    }
}

/// True when the hash with `seed` maps every key in `keys` to its own bucket.
pub fn seed_is_injective(seed: u64, buckets: usize, keys: &[PcfKey]) -> bool {
    let mut used = HashSet::with_capacity(keys.len());
    let mut distinct = HashSet::with_capacity(keys.len());
    keys.iter()
        .filter(|k| distinct.insert(**k))
        .all(|k| used.insert(bucket_for(seed, buckets, k)))
}

/// Searches upward from `start` for `stages` distinct seeds, each of which
/// hashes every key set in `key_sets` without collision.
///
/// Gives up after `max_tries` candidates; returns `None` when fewer buckets
/// than distinct keys make it impossible.
pub fn injective_seeds(
    stages: usize,
    buckets: usize,
    key_sets: &[&[PcfKey]],
    start: u64,
    max_tries: u64,
) -> Option<Vec<u64>> {
    let mut seeds = Vec::with_capacity(stages);
    let mut candidate = start;
    for _ in 0..max_tries {
        if seeds.len() == stages {
            break;
        }
        if key_sets
            .iter()
            .all(|keys| seed_is_injective(candidate, buckets, keys))
        {
            seeds.push(candidate);
        }
        candidate = candidate.wrapping_add(1);
    }
    (seeds.len() == stages).then_some(seeds)
}
