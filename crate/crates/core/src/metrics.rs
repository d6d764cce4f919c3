//! Counts, degrees, density and triples-per-relation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::store::{EntityId, RelationId, TripleStore};

/// An exact non-negative rational, kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RatioRepr", try_from = "RatioRepr")]
pub struct Ratio {
    numerator: u64,
    denominator: u64,
}

#[derive(Serialize, Deserialize)]
struct RatioRepr {
    numerator: u64,
    denominator: u64,
    value: f64,
}

impl From<Ratio> for RatioRepr {
    fn from(r: Ratio) -> Self {
        RatioRepr {
            numerator: r.numerator,
            denominator: r.denominator,
            value: r.value(),
        }
    }
}

impl TryFrom<RatioRepr> for Ratio {
    type Error = String;

    fn try_from(r: RatioRepr) -> Result<Self, Self::Error> {
        if r.denominator == 0 {
            return Err("zero denominator".into());
        }
        Ok(Ratio::new(r.numerator, r.denominator))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        assert!(denominator != 0, "zero denominator");
        let g = gcd(numerator, denominator).max(1);
        Ratio {
            numerator: numerator / g,
            denominator: denominator / g,
        }
    }

    pub fn numerator(self) -> u64 {
        self.numerator
    }

    pub fn denominator(self) -> u64 {
        self.denominator
    }

    pub fn value(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn scale(self, k: u64) -> Ratio {
        Ratio::new(self.numerator * k, self.denominator)
    }
}

/// Rounds half away from zero (what `f64::round` does).
pub fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub num_entities: u64,
    pub num_relations: u64,
    /// Input triples including duplicates across splits.
    pub num_triples_raw: u64,
    pub num_triples_distinct: u64,
    /// Mean of in-degree plus out-degree: 2·#T / #E.
    pub avg_degree_total: Ratio,
    /// #T / #E, the quantity tabulated as "deg" in dataset comparison tables.
    pub avg_degree_table: Ratio,
    /// −log10(#T / #E²).
    pub neg_log10_density: f64,
}

pub fn neg_log10_density(num_triples: u64, num_entities: u64) -> f64 {
    2.0 * (num_entities as f64).log10() - (num_triples as f64).log10()
}

pub fn summarize(store: &TripleStore) -> GraphSummary {
    let e = store.num_entities() as u64;
    let t = store.raw_triple_count();
    let table = Ratio::new(t, e);
    GraphSummary {
        num_entities: e,
        num_relations: store.num_relations() as u64,
        num_triples_raw: t,
        num_triples_distinct: store.num_triples() as u64,
        avg_degree_total: table.scale(2),
        avg_degree_table: table,
        neg_log10_density: neg_log10_density(t, e),
    }
}

/// Degree (in + out over distinct triples) → number of entities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeHistogram {
    pub bins: BTreeMap<u64, u64>,
}

impl DegreeHistogram {
    /// Number of entities counted.
    pub fn mass(&self) -> u64 {
        self.bins.values().sum()
    }

    /// Σ degree · count.
    pub fn weighted_mass(&self) -> u64 {
        self.bins.iter().map(|(d, c)| d * c).sum()
    }

    pub fn min_degree(&self) -> Option<u64> {
        self.bins.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<u64> {
        self.bins.keys().next_back().copied()
    }

    /// Removes one entity from the bin for `degree`.
    pub fn remove_one(&mut self, degree: u64) -> bool {
        match self.bins.get_mut(&degree) {
            Some(c) if *c > 1 => {
                *c -= 1;
                true
            }
            Some(_) => {
                self.bins.remove(&degree);
                true
            }
            None => false,
        }
    }
}

pub fn degree_histogram(store: &TripleStore) -> DegreeHistogram {
    let mut bins = BTreeMap::new();
    for e in store.entities() {
        *bins.entry(store.degree(e) as u64).or_insert(0) += 1;
    }
    DegreeHistogram { bins }
}

/// The entity with the largest degree; ties go to the smaller id.
pub fn top_degree_entity(store: &TripleStore) -> Option<(EntityId, u64)> {
    store
        .entities()
        .map(|e| (e, store.degree(e) as u64))
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationLoad {
    /// Triple counts, descending; ties by relation id ascending.
    pub counts: Vec<(RelationId, u64)>,
}

impl RelationLoad {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|(_, c)| c).sum()
    }
}

pub fn relation_load(store: &TripleStore) -> RelationLoad {
    let mut counts: Vec<(RelationId, u64)> = store
        .relations()
        .map(|r| (r, store.relation_size(r) as u64))
        .collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    RelationLoad { counts }
}
