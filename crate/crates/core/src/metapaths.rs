//! Counting directed relation-labelled walks from sampled start entities.
//!
//! Walks follow edge direction and may revisit entities and edges. Parallel
//! edges under different relations count as different walks.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EntityId, TripleStore};

/// Longest walk length considered informative; longer lengths are accepted
/// but produce a warning.
pub const MAX_INFORMATIVE_LENGTH: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetapathConfig {
    pub lengths: BTreeSet<usize>,
    pub num_samples: usize,
    pub seed: u64,
}

impl Default for MetapathConfig {
    fn default() -> Self {
        MetapathConfig {
            lengths: BTreeSet::from([2, 3, 4]),
            num_samples: 3,
            seed: 42,
        }
    }
}

impl MetapathConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lengths.is_empty() {
            return Err(Error::InvalidConfig("no metapath lengths requested".into()));
        }
        if self.lengths.contains(&0) {
            return Err(Error::InvalidWalkLength);
        }
        if self.num_samples == 0 {
            return Err(Error::InvalidConfig("metapath sample count must be positive".into()));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        self.lengths
            .iter()
            .filter(|&&l| l > MAX_INFORMATIVE_LENGTH)
            .map(|l| format!("metapath length {l} exceeds {MAX_INFORMATIVE_LENGTH}; such long paths are rarely informative"))
            .collect()
    }
}

/// Walk counts of every length `1..=max_len` from `start`, by frontier
/// propagation: the frontier maps each entity to the number of walks ending
/// there, and each step pushes those counts along out-edges.
pub fn walk_counts(store: &TripleStore, start: EntityId, max_len: usize) -> Result<Vec<BigUint>> {
    store.check_entity(start)?;
    let mut frontier: BTreeMap<EntityId, BigUint> = BTreeMap::from([(start, BigUint::from(1u8))]);
    let mut counts = Vec::with_capacity(max_len);
    for _ in 0..max_len {
        let mut next: BTreeMap<EntityId, BigUint> = BTreeMap::new();
        for (e, n) in &frontier {
            for t in store.out_triples(*e) {
                *next.entry(t.tail).or_insert_with(BigUint::zero) += n;
            }
        }
        counts.push(next.values().sum());
        frontier = next;
        if frontier.is_empty() {
            counts.resize(max_len, BigUint::zero());
            break;
        }
    }
    Ok(counts)
}

/// Number of walks with exactly `length` edges starting at `start`.
pub fn count_walks_exact(store: &TripleStore, start: EntityId, length: usize) -> Result<BigUint> {
    if length == 0 {
        return Err(Error::InvalidWalkLength);
    }
    Ok(walk_counts(store, start, length)?.pop().unwrap_or_default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthEstimate {
    pub length: usize,
    pub mean: f64,
    /// One count per sample, in sample order.
    pub counts: Vec<BigUint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetapathEstimate {
    pub sampled_entities: Vec<EntityId>,
    pub lengths: Vec<LengthEstimate>,
}

impl MetapathEstimate {
    pub fn mean(&self, length: usize) -> Option<f64> {
        self.lengths.iter().find(|l| l.length == length).map(|l| l.mean)
    }
}

fn mean(counts: &[BigUint]) -> f64 {
    let total: BigUint = counts.iter().sum();
    total.to_f64().unwrap_or(f64::INFINITY) / counts.len() as f64
}

/// The entities drawn for sampling: uniform, with replacement.
pub fn sample_entities(store: &TripleStore, num_samples: usize, seed: u64) -> Vec<EntityId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = store.num_entities() as u32;
    (0..num_samples).map(|_| EntityId(rng.gen_range(0..n))).collect()
}

pub fn estimate_metapaths(store: &TripleStore, cfg: &MetapathConfig) -> Result<MetapathEstimate> {
    cfg.validate()?;
    let sampled_entities = sample_entities(store, cfg.num_samples, cfg.seed);
    let max_len = *cfg.lengths.iter().next_back().expect("validated non-empty");
    let per_sample: Vec<Vec<BigUint>> = sampled_entities
        .par_iter()
        .map(|&e| walk_counts(store, e, max_len))
        .collect::<Result<_>>()?;
    let lengths = cfg
        .lengths
        .iter()
        .map(|&length| {
            let counts: Vec<BigUint> = per_sample.iter().map(|c| c[length - 1].clone()).collect();
            LengthEstimate {
                length,
                mean: mean(&counts),
                counts,
            }
        })
        .collect();
    Ok(MetapathEstimate {
        sampled_entities,
        lengths,
    })
}
