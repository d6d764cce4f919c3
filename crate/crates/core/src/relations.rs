//! Relation cardinality and relational-pattern mining.
//!
//! Patterns are association rules over the triple set `T`, each scored by
//! confidence (fraction of body instances whose head holds) and support
//! (number of body instances):
//!
//! | pattern       | rule                                  | body instances          |
//! |---------------|---------------------------------------|-------------------------|
//! | symmetric     | `r(x,y) ⇒ r(y,x)`                     | triples of `r`          |
//! | antisymmetric | `r(x,y) ⇒ ¬r(y,x)`                    | triples of `r`          |
//! | inverse       | `r(x,y) ⇒ r'(y,x)`, `r' ≠ r`          | triples of `r`          |
//! | composite     | `r1(x,y) ∧ r2(y,z) ⇒ r(x,z)`          | distinct `(x,z)` pairs  |
//!
//! A relation carries a flag when some rule for it reaches the confidence
//! threshold with at least `min_support` body instances.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{EntityId, RelationId, TripleStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub confidence_threshold: f64,
    /// Minimum number of rule-body instances.
    pub min_support: u64,
    /// Largest join (counted in paths) enumerated exactly for one relation pair;
    /// larger joins are estimated from this many sampled pairs.
    pub composite_join_cap: u64,
    pub sample_seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            confidence_threshold: 0.95,
            min_support: 1,
            composite_join_cap: 10_000_000,
            sample_seed: 42,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_threshold > 0.0 && self.confidence_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "confidence threshold must lie in (0, 1], got {}",
                self.confidence_threshold
            )));
        }
        if self.min_support < 1 {
            return Err(Error::InvalidConfig("min support must be at least 1".into()));
        }
        if self.composite_join_cap < 1 {
            return Err(Error::InvalidConfig("join cap must be at least 1".into()));
        }
        Ok(())
    }

    fn accepts(&self, confidence: f64, support: u64) -> bool {
        support >= self.min_support && confidence >= self.confidence_threshold
    }
}

fn fraction(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CardinalityClass {
    #[serde(rename = "1-1")]
    OneToOne,
    #[serde(rename = "1-M")]
    OneToMany,
    #[serde(rename = "M-1")]
    ManyToOne,
    #[serde(rename = "M-M")]
    ManyToMany,
}

impl CardinalityClass {
    pub const ALL: [CardinalityClass; 4] = [
        CardinalityClass::OneToOne,
        CardinalityClass::OneToMany,
        CardinalityClass::ManyToOne,
        CardinalityClass::ManyToMany,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CardinalityClass::OneToOne => "1-1",
            CardinalityClass::OneToMany => "1-M",
            CardinalityClass::ManyToOne => "M-1",
            CardinalityClass::ManyToMany => "M-M",
        }
    }
}

impl fmt::Display for CardinalityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CardinalityClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CardinalityClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown cardinality class {s:?}"))
    }
}

/// Head/tail functionality counts behind a cardinality class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CardinalityStats {
    pub relation: RelationId,
    pub distinct_heads: u64,
    /// Heads with exactly one tail.
    pub functional_heads: u64,
    pub distinct_tails: u64,
    /// Tails with exactly one head.
    pub functional_tails: u64,
    pub forward_confidence: f64,
    pub backward_confidence: f64,
    pub class: CardinalityClass,
}

/// Counts distinct keys of a key-sorted pair list and how many occur once.
fn key_runs(pairs: &[(EntityId, EntityId)]) -> (u64, u64) {
    let mut distinct = 0;
    let mut singles = 0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        distinct += 1;
        if j - i == 1 {
            singles += 1;
        }
        i = j;
    }
    (distinct, singles)
}

pub fn cardinality_stats(store: &TripleStore, r: RelationId, cfg: &MiningConfig) -> CardinalityStats {
    let (distinct_heads, functional_heads) = key_runs(store.forward_pairs(r));
    let (distinct_tails, functional_tails) = key_runs(store.backward_pairs(r));
    let forward_confidence = fraction(functional_heads, distinct_heads);
    let backward_confidence = fraction(functional_tails, distinct_tails);
    let theta = cfg.confidence_threshold;
    let class = match (forward_confidence >= theta, backward_confidence >= theta) {
        (true, true) => CardinalityClass::OneToOne,
        (true, false) => CardinalityClass::ManyToOne,
        (false, true) => CardinalityClass::OneToMany,
        (false, false) => CardinalityClass::ManyToMany,
    };
    CardinalityStats {
        relation: r,
        distinct_heads,
        functional_heads,
        distinct_tails,
        functional_tails,
        forward_confidence,
        backward_confidence,
        class,
    }
}

pub fn classify_cardinality(store: &TripleStore, cfg: &MiningConfig) -> BTreeMap<RelationId, CardinalityClass> {
    store
        .relations()
        .map(|r| (r, cardinality_stats(store, r, cfg).class))
        .collect()
}

/// Number of relations per class, in [`CardinalityClass::ALL`] order.
pub fn cardinality_totals(classes: &BTreeMap<RelationId, CardinalityClass>) -> [(CardinalityClass, u64); 4] {
    CardinalityClass::ALL.map(|c| (c, classes.values().filter(|x| **x == c).count() as u64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryCounts {
    /// Triples of the relation whose reversal is also present.
    pub symmetric: u64,
    pub total: u64,
}

impl SymmetryCounts {
    pub fn sym_conf(self) -> f64 {
        fraction(self.symmetric, self.total)
    }

    pub fn antisym_conf(self) -> f64 {
        1.0 - self.sym_conf()
    }
}

fn symmetry_counts(store: &TripleStore, r: RelationId) -> SymmetryCounts {
    let pairs = store.forward_pairs(r);
    let symmetric = pairs
        .iter()
        .filter(|&&(h, t)| pairs.binary_search(&(t, h)).is_ok())
        .count() as u64;
    SymmetryCounts {
        symmetric,
        total: pairs.len() as u64,
    }
}

/// `(sym_conf, antisym_conf)` for relation `r`; a self-loop is its own reversal.
pub fn detect_symmetry(store: &TripleStore, r: RelationId) -> Result<(f64, f64)> {
    store.check_relation(r)?;
    let c = symmetry_counts(store, r);
    Ok((c.sym_conf(), c.antisym_conf()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversePartner {
    pub relation: RelationId,
    pub confidence: f64,
    /// Triples of the source relation whose reversal holds under `relation`.
    pub matches: u64,
}

/// Confidence of every `r' ≠ r` as an inverse of `r`, unfiltered, by id.
fn inverse_tally(store: &TripleStore, r: RelationId) -> Vec<InversePartner> {
    let mut tally: BTreeMap<RelationId, u64> = BTreeMap::new();
    for &(h, t) in store.forward_pairs(r) {
        for other in store.relations_between(t, h) {
            if other != r {
                *tally.entry(other).or_insert(0) += 1;
            }
        }
    }
    let total = store.relation_size(r) as u64;
    tally
        .into_iter()
        .map(|(relation, matches)| InversePartner {
            relation,
            confidence: fraction(matches, total),
            matches,
        })
        .collect()
}

fn sort_partners(partners: &mut [InversePartner]) {
    partners.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.relation.cmp(&b.relation))
    });
}

fn inverse_partners_of(store: &TripleStore, r: RelationId, cfg: &MiningConfig) -> Vec<InversePartner> {
    let support = store.relation_size(r) as u64;
    let mut partners: Vec<InversePartner> = inverse_tally(store, r)
        .into_iter()
        .filter(|p| cfg.accepts(p.confidence, support))
        .collect();
    sort_partners(&mut partners);
    partners
}

/// Accepted inverse partners for every relation (possibly empty lists).
pub fn detect_inverse(store: &TripleStore, cfg: &MiningConfig) -> BTreeMap<RelationId, Vec<InversePartner>> {
    let rels: Vec<RelationId> = store.relations().collect();
    let lists: Vec<Vec<InversePartner>> = rels
        .par_iter()
        .map(|&r| inverse_partners_of(store, r, cfg))
        .collect();
    rels.into_iter().zip(lists).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeWitness {
    /// `(r1, r2)` with `r1(x,y) ∧ r2(y,z)` as the rule body.
    pub body: (RelationId, RelationId),
    pub confidence: f64,
    /// Distinct `(x,z)` pairs in the join; estimated when `sampled`.
    pub support: u64,
    pub sampled: bool,
}

/// Runs of a key-sorted pair list: `(key, start, end)`.
fn runs(pairs: &[(EntityId, EntityId)]) -> Vec<(EntityId, usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i + 1;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        out.push((pairs[i].0, i, j));
        i = j;
    }
    out
}

/// Join of `r1` (grouped by tail) with `r2` (grouped by head) on the shared entity.
struct Join<'a> {
    /// `(tail, head)` pairs of r1.
    left: &'a [(EntityId, EntityId)],
    /// `(head, tail)` pairs of r2.
    right: &'a [(EntityId, EntityId)],
    /// Per shared entity: left run, right run.
    links: Vec<((usize, usize), (usize, usize))>,
    paths: u64,
}

impl<'a> Join<'a> {
    fn new(
        left: &'a [(EntityId, EntityId)],
        left_runs: &[(EntityId, usize, usize)],
        right: &'a [(EntityId, EntityId)],
        right_runs: &[(EntityId, usize, usize)],
    ) -> Self {
        let mut links = Vec::new();
        let mut paths = 0u64;
        let (mut i, mut j) = (0, 0);
        while i < left_runs.len() && j < right_runs.len() {
            let (ly, ls, le) = left_runs[i];
            let (ry, rs, re) = right_runs[j];
            match ly.cmp(&ry) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    paths += ((le - ls) * (re - rs)) as u64;
                    links.push(((ls, le), (rs, re)));
                    i += 1;
                    j += 1;
                }
            }
        }
        Join {
            left,
            right,
            links,
            paths,
        }
    }

    fn distinct_pairs(&self) -> Vec<(EntityId, EntityId)> {
        let mut pairs = Vec::with_capacity(self.paths as usize);
        for &((ls, le), (rs, re)) in &self.links {
            for &(_, x) in &self.left[ls..le] {
                for &(_, z) in &self.right[rs..re] {
                    pairs.push((x, z));
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

fn mix_seed(seed: u64, r1: RelationId, r2: RelationId) -> u64 {
    // splitmix64 finalizer over the combined key.
    let mut z = seed ^ ((r1.0 as u64) << 32 | r2.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Number of intermediate entities linking `x` to `z` through `r1` then `r2`.
fn path_multiplicity(store: &TripleStore, r1: RelationId, r2: RelationId, x: EntityId, z: EntityId) -> u64 {
    let a = store.tails_of(r1, x);
    let b = store.heads_of(r2, z);
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].1.cmp(&b[j].1) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Draws `samples` join pairs uniformly from the distinct pairs of the join.
///
/// A path is drawn uniformly (shared entity weighted by its path count) and
/// accepted with probability 1/multiplicity of its endpoint pair, which makes
/// each distinct pair equally likely. The acceptance rate also yields an
/// unbiased estimate of the number of distinct pairs.
fn sample_join<F>(
    store: &TripleStore,
    join: &Join<'_>,
    body: (RelationId, RelationId),
    samples: u64,
    seed: u64,
    mut visit: F,
) -> u64
where
    F: FnMut(EntityId, EntityId),
{
    let mut cumulative = Vec::with_capacity(join.links.len());
    let mut acc = 0u64;
    for &((ls, le), (rs, re)) in &join.links {
        acc += ((le - ls) * (re - rs)) as u64;
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, body.0, body.1));
    let mut accepted = 0u64;
    let mut attempts = 0u64;
    while accepted < samples {
        attempts += 1;
        let k = rng.gen_range(0..acc);
        let link = cumulative.partition_point(|&c| c <= k);
        let ((ls, le), (rs, re)) = join.links[link];
        let x = join.left[rng.gen_range(ls..le)].1;
        let z = join.right[rng.gen_range(rs..re)].1;
        let mult = path_multiplicity(store, body.0, body.1, x, z);
        if mult == 1 || rng.gen_range(0..mult) == 0 {
            accepted += 1;
            visit(x, z);
        }
    }
    ((join.paths as f64) * (accepted as f64) / (attempts as f64)).round() as u64
}

/// Witnesses `((r1, r2) → r)` discovered for one left relation `r1`.
fn composites_from(
    store: &TripleStore,
    r1: RelationId,
    by_tail: &[Vec<(EntityId, usize, usize)>],
    by_head: &[Vec<(EntityId, usize, usize)>],
    cfg: &MiningConfig,
) -> Vec<(RelationId, CompositeWitness)> {
    let mut out = Vec::new();
    let mut tally = vec![0u64; store.num_relations()];
    let mut touched: Vec<RelationId> = Vec::new();
    for r2 in store.relations() {
        let join = Join::new(
            store.backward_pairs(r1),
            &by_tail[r1.index()],
            store.forward_pairs(r2),
            &by_head[r2.index()],
        );
        if join.paths == 0 {
            continue;
        }
        let mut count = |x: EntityId, z: EntityId| {
            for r in store.relations_between(x, z) {
                if tally[r.index()] == 0 {
                    touched.push(r);
                }
                tally[r.index()] += 1;
            }
        };
        let (denominator, support, sampled) = if join.paths <= cfg.composite_join_cap {
            let pairs = join.distinct_pairs();
            for &(x, z) in &pairs {
                count(x, z);
            }
            (pairs.len() as u64, pairs.len() as u64, false)
        } else {
            let n = cfg.composite_join_cap;
            let support = sample_join(store, &join, (r1, r2), n, cfg.sample_seed, count);
            (n, support, true)
        };
        touched.sort_unstable();
        for &r in &touched {
            let confidence = fraction(tally[r.index()], denominator);
            if cfg.accepts(confidence, support) {
                out.push((
                    r,
                    CompositeWitness {
                        body: (r1, r2),
                        confidence,
                        support,
                        sampled,
                    },
                ));
            }
            tally[r.index()] = 0;
        }
        touched.clear();
    }
    out
}

fn sort_witnesses(ws: &mut [CompositeWitness]) {
    ws.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(b.support.cmp(&a.support))
            .then(a.body.cmp(&b.body))
    });
}

/// Accepted composition witnesses for every relation (possibly empty lists).
pub fn detect_composite(store: &TripleStore, cfg: &MiningConfig) -> BTreeMap<RelationId, Vec<CompositeWitness>> {
    let by_tail: Vec<_> = store.relations().map(|r| runs(store.backward_pairs(r))).collect();
    let by_head: Vec<_> = store.relations().map(|r| runs(store.forward_pairs(r))).collect();
    let rels: Vec<RelationId> = store.relations().collect();
    let found: Vec<Vec<(RelationId, CompositeWitness)>> = rels
        .par_iter()
        .map(|&r1| composites_from(store, r1, &by_tail, &by_head, cfg))
        .collect();
    let mut out: BTreeMap<RelationId, Vec<CompositeWitness>> = rels.iter().map(|&r| (r, Vec::new())).collect();
    for (r, w) in found.into_iter().flatten() {
        out.get_mut(&r).unwrap().push(w);
    }
    for ws in out.values_mut() {
        sort_witnesses(ws);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternFlag {
    Symmetric,
    Antisymmetric,
    Inverse,
    Composite,
}

impl PatternFlag {
    pub const ALL: [PatternFlag; 4] = [
        PatternFlag::Symmetric,
        PatternFlag::Antisymmetric,
        PatternFlag::Inverse,
        PatternFlag::Composite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternFlag::Symmetric => "symmetric",
            PatternFlag::Antisymmetric => "antisymmetric",
            PatternFlag::Inverse => "inverse",
            PatternFlag::Composite => "composite",
        }
    }
}

impl fmt::Display for PatternFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PatternFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatternFlag::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown pattern flag {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub relation: RelationId,
    /// Triples of the relation.
    pub triples: u64,
    pub sym_conf: f64,
    pub antisym_conf: f64,
    pub inverse_partners: Vec<InversePartner>,
    pub composite_witnesses: Vec<CompositeWitness>,
    pub flags: Vec<PatternFlag>,
}

impl PatternReport {
    pub fn has(&self, flag: PatternFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Per-relation pattern reports in relation id order.
pub fn mine_patterns(store: &TripleStore, cfg: &MiningConfig) -> Result<Vec<PatternReport>> {
    cfg.validate()?;
    let mut inverse = detect_inverse(store, cfg);
    let mut composite = detect_composite(store, cfg);
    Ok(store
        .relations()
        .map(|r| {
            let sym = symmetry_counts(store, r);
            let inverse_partners = inverse.remove(&r).unwrap_or_default();
            let composite_witnesses = composite.remove(&r).unwrap_or_default();
            let mut flags = Vec::new();
            if cfg.accepts(sym.sym_conf(), sym.total) {
                flags.push(PatternFlag::Symmetric);
            }
            if cfg.accepts(sym.antisym_conf(), sym.total) {
                flags.push(PatternFlag::Antisymmetric);
            }
            if !inverse_partners.is_empty() {
                flags.push(PatternFlag::Inverse);
            }
            if !composite_witnesses.is_empty() {
                flags.push(PatternFlag::Composite);
            }
            PatternReport {
                relation: r,
                triples: sym.total,
                sym_conf: sym.sym_conf(),
                antisym_conf: sym.antisym_conf(),
                inverse_partners,
                composite_witnesses,
                flags,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagShare {
    pub flag: PatternFlag,
    pub relations: u64,
    pub triples: u64,
    /// Percentage of distinct triples whose relation carries the flag.
    pub triple_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternDistribution {
    pub flags: Vec<FlagShare>,
}

impl PatternDistribution {
    pub fn get(&self, flag: PatternFlag) -> &FlagShare {
        self.flags.iter().find(|f| f.flag == flag).expect("all flags present")
    }

    /// The flag with the largest triple share; ties go to the earlier flag.
    /// `None` when no relation carries any flag.
    pub fn dominant(&self) -> Option<PatternFlag> {
        let best = self
            .flags
            .iter()
            .fold(None::<&FlagShare>, |acc, f| match acc {
                Some(a) if a.triples >= f.triples => Some(a),
                _ => Some(f),
            })?;
        (best.triples > 0).then_some(best.flag)
    }
}

pub fn distribution_of(reports: &[PatternReport], num_triples: u64) -> PatternDistribution {
    let flags = PatternFlag::ALL
        .iter()
        .map(|&flag| {
            let carrying = reports.iter().filter(|p| p.has(flag));
            let (relations, triples) = carrying.fold((0, 0), |(n, t), p| (n + 1, t + p.triples));
            FlagShare {
                flag,
                relations,
                triples,
                triple_share: 100.0 * fraction(triples, num_triples),
            }
        })
        .collect();
    PatternDistribution { flags }
}

pub fn pattern_distribution(store: &TripleStore, cfg: &MiningConfig) -> Result<PatternDistribution> {
    let reports = mine_patterns(store, cfg)?;
    Ok(distribution_of(&reports, store.num_triples() as u64))
}
