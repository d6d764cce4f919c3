//! Inverse-relation leakage between training and evaluation splits.
//!
//! Symmetric flags and inverse partners are mined on the training split
//! alone. An evaluation triple `(h, r, t)` leaks when its reversal is in the
//! training split under `r` itself (with `r` symmetric) or under a mined
//! inverse partner of `r`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::write_tsv;
use crate::relations::{detect_inverse, detect_symmetry, MiningConfig};
use crate::store::{RelationId, Split, SplitMask, Triple, TripleStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "relation", rename_all = "snake_case")]
pub enum LeakCause {
    SymmetricSelf,
    InversePartner(RelationId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leak {
    pub triple: Triple,
    pub cause: LeakCause,
    /// The training triple that gives the leaked one away.
    pub witness: Triple,
}

/// `partner` is an inverse of `relation` with the given confidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversePair {
    pub relation: RelationId,
    pub partner: RelationId,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub split: Split,
    /// Distinct triples audited.
    pub audited: u64,
    pub leaked_test_triples: Vec<Leak>,
    pub leakage_rate: f64,
    pub inverse_pairs_used: Vec<InversePair>,
    pub symmetric_relations: Vec<RelationId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub test: LeakageReport,
    pub valid: Option<LeakageReport>,
}

impl AuditOutcome {
    pub fn total_leaks(&self) -> usize {
        self.test.leaked_test_triples.len() + self.valid.as_ref().map_or(0, |v| v.leaked_test_triples.len())
    }
}

struct TrainRules {
    symmetric: Vec<bool>,
    partners: Vec<Vec<RelationId>>,
    pairs: Vec<InversePair>,
}

fn mine_train(train: &TripleStore, cfg: &MiningConfig) -> Result<TrainRules> {
    let mut symmetric = vec![false; train.num_relations()];
    for r in train.relations() {
        let support = train.relation_size(r) as u64;
        let (sym, _) = detect_symmetry(train, r)?;
        symmetric[r.index()] = support >= cfg.min_support && support > 0 && sym >= cfg.confidence_threshold;
    }
    let mut partners = vec![Vec::new(); train.num_relations()];
    let mut pairs = Vec::new();
    for (r, list) in detect_inverse(train, cfg) {
        for p in list {
            partners[r.index()].push(p.relation);
            pairs.push(InversePair {
                relation: r,
                partner: p.relation,
                confidence: p.confidence,
            });
        }
    }
    Ok(TrainRules {
        symmetric,
        partners,
        pairs,
    })
}

fn find_leak(train: &TripleStore, rules: &TrainRules, t: Triple) -> Option<Leak> {
    if rules.symmetric[t.relation.index()] {
        let witness = t.reversed();
        if train.contains_unchecked(&witness) {
            return Some(Leak {
                triple: t,
                cause: LeakCause::SymmetricSelf,
                witness,
            });
        }
    }
    rules.partners[t.relation.index()].iter().find_map(|&p| {
        let witness = Triple::new(t.tail, p, t.head);
        train.contains_unchecked(&witness).then_some(Leak {
            triple: t,
            cause: LeakCause::InversePartner(p),
            witness,
        })
    })
}

fn audit_one(store: &TripleStore, train: &TripleStore, rules: &TrainRules, split: Split) -> LeakageReport {
    let targets: Vec<Triple> = store
        .tagged_triples()
        .filter(|(_, m)| m.contains(split))
        .map(|(t, _)| t)
        .collect();
    let leaked: Vec<Leak> = targets
        .par_iter()
        .filter_map(|&t| find_leak(train, rules, t))
        .collect();
    let audited = targets.len() as u64;
    LeakageReport {
        split,
        audited,
        leakage_rate: if audited == 0 {
            0.0
        } else {
            leaked.len() as f64 / audited as f64
        },
        leaked_test_triples: leaked,
        inverse_pairs_used: rules.pairs.clone(),
        symmetric_relations: train
            .relations()
            .filter(|r| rules.symmetric[r.index()])
            .collect(),
    }
}

/// Audits the test split (and the validation split, when present) against
/// rules mined on the training split.
pub fn audit_splits(store: &TripleStore, cfg: &MiningConfig) -> Result<AuditOutcome> {
    cfg.validate()?;
    let train = store.split_view(Split::Train)?;
    if !store.has_split(Split::Test) {
        return Err(Error::MissingSplit(Split::Test));
    }
    let rules = mine_train(&train, cfg)?;
    let test = audit_one(store, &train, &rules, Split::Test);
    let valid = store
        .has_split(Split::Valid)
        .then(|| audit_one(store, &train, &rules, Split::Valid));
    Ok(AuditOutcome { test, valid })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeleakStrategy {
    /// Remove leaked evaluation triples.
    DropTestTriples,
    /// Remove, for each mined inverse pair, every triple of the relation
    /// whose label sorts later.
    DropInverseRelations,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Removal {
    Triple {
        split: Split,
        triple: Triple,
        cause: RemovalCause,
    },
    Relation {
        relation: RelationId,
        inverse_of: RelationId,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalCause {
    Leak(LeakCause),
    DroppedRelation,
}

#[derive(Clone, Debug)]
pub struct DeleakOutput {
    /// The repaired dataset; shares ids with the input store.
    pub store: TripleStore,
    pub removals: Vec<Removal>,
}

pub fn deleak(store: &TripleStore, strategy: DeleakStrategy, cfg: &MiningConfig) -> Result<DeleakOutput> {
    let audit = audit_splits(store, cfg)?;
    let mut removals = Vec::new();
    let repaired = match strategy {
        DeleakStrategy::DropTestTriples => {
            let mut drop: BTreeMap<Triple, Vec<Split>> = BTreeMap::new();
            for report in std::iter::once(&audit.test).chain(audit.valid.as_ref()) {
                for leak in &report.leaked_test_triples {
                    drop.entry(leak.triple).or_default().push(report.split);
                    removals.push(Removal::Triple {
                        split: report.split,
                        triple: leak.triple,
                        cause: RemovalCause::Leak(leak.cause),
                    });
                }
            }
            if drop.is_empty() {
                return Ok(DeleakOutput {
                    store: store.clone(),
                    removals,
                });
            }
            store.filter(|t, mut m| {
                if let Some(splits) = drop.get(t) {
                    for s in splits {
                        m.remove(*s);
                    }
                }
                m
            })?
        }
        DeleakStrategy::DropInverseRelations => {
            let mut dropped: BTreeSet<RelationId> = BTreeSet::new();
            for pair in &audit.test.inverse_pairs_used {
                let (keep, drop) = if store.relation_label(pair.relation) <= store.relation_label(pair.partner) {
                    (pair.relation, pair.partner)
                } else {
                    (pair.partner, pair.relation)
                };
                if dropped.insert(drop) {
                    removals.push(Removal::Relation {
                        relation: drop,
                        inverse_of: keep,
                    });
                }
            }
            if dropped.is_empty() {
                return Ok(DeleakOutput {
                    store: store.clone(),
                    removals,
                });
            }
            for (t, m) in store.tagged_triples() {
                if dropped.contains(&t.relation) {
                    for split in m.iter() {
                        removals.push(Removal::Triple {
                            split,
                            triple: t,
                            cause: RemovalCause::DroppedRelation,
                        });
                    }
                }
            }
            store.filter(|t, m| {
                if dropped.contains(&t.relation) {
                    SplitMask::default()
                } else {
                    m
                }
            })?
        }
    };
    Ok(DeleakOutput {
        store: repaired,
        removals,
    })
}

/// Writes `<dir>/<split>.txt` for every split present in `store`.
pub fn write_split_files(store: &TripleStore, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for split in Split::ALL {
        if !store.has_split(split) {
            continue;
        }
        let path = dir.join(format!("{split}.txt"));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let rows = store
            .tagged_triples()
            .filter(|(_, m)| m.contains(split))
            .map(|(t, _)| store.label_triple(&t));
        write_tsv(BufWriter::new(file), rows).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// One removed item per line, tab separated:
///
/// ```text
/// triple    <split>  <head>  <relation>  <tail>  <cause>
/// relation  <label>  inverse_of:<kept label>
/// ```
///
/// where `<cause>` is `symmetric_self`, `inverse_partner:<label>` or
/// `dropped_relation`.
pub fn write_removal_manifest<W: Write>(store: &TripleStore, removals: &[Removal], mut out: W) -> std::io::Result<()> {
    for removal in removals {
        match removal {
            Removal::Triple { split, triple, cause } => {
                let (h, r, t) = store.label_triple(triple);
                let cause = match cause {
                    RemovalCause::Leak(LeakCause::SymmetricSelf) => "symmetric_self".to_string(),
                    RemovalCause::Leak(LeakCause::InversePartner(p)) => {
                        format!("inverse_partner:{}", store.relation_label(*p))
                    }
                    RemovalCause::DroppedRelation => "dropped_relation".to_string(),
                };
                writeln!(out, "triple\t{split}\t{h}\t{r}\t{t}\t{cause}")?;
            }
            Removal::Relation { relation, inverse_of } => {
                writeln!(
                    out,
                    "relation\t{}\tinverse_of:{}",
                    store.relation_label(*relation),
                    store.relation_label(*inverse_of)
                )?;
            }
        }
    }
    out.flush()
}

fn labeled_report(store: &TripleStore, report: &LeakageReport) -> serde_json::Value {
    let triple = |t: &Triple| {
        let (h, r, t) = store.label_triple(t);
        serde_json::json!([h, r, t])
    };
    let cause = |c: &LeakCause| match c {
        LeakCause::SymmetricSelf => serde_json::json!({ "kind": "symmetric_self" }),
        LeakCause::InversePartner(p) => serde_json::json!({
            "kind": "inverse_partner",
            "relation": store.relation_label(*p),
        }),
    };
    serde_json::json!({
        "split": report.split,
        "audited": report.audited,
        "leaked": report.leaked_test_triples.len(),
        "leakage_rate": report.leakage_rate,
        "symmetric_relations": report
            .symmetric_relations
            .iter()
            .map(|&r| store.relation_label(r))
            .collect::<Vec<_>>(),
        "inverse_pairs": report
            .inverse_pairs_used
            .iter()
            .map(|p| serde_json::json!({
                "relation": store.relation_label(p.relation),
                "partner": store.relation_label(p.partner),
                "confidence": p.confidence,
            }))
            .collect::<Vec<_>>(),
        "leaks": report
            .leaked_test_triples
            .iter()
            .map(|l| serde_json::json!({
                "triple": triple(&l.triple),
                "cause": cause(&l.cause),
                "witness": triple(&l.witness),
            }))
            .collect::<Vec<_>>(),
    })
}

/// The audit with ids replaced by labels.
pub fn audit_json(store: &TripleStore, outcome: &AuditOutcome) -> serde_json::Value {
    serde_json::json!({
        "test": labeled_report(store, &outcome.test),
        "valid": outcome.valid.as_ref().map(|v| labeled_report(store, v)),
    })
}

/// Distinct `(triple, split)` memberships, for comparing repaired datasets.
pub fn memberships(store: &TripleStore) -> HashSet<(String, String, String, Split)> {
    store
        .tagged_triples()
        .flat_map(|(t, m)| {
            let (h, r, tl) = store.label_triple(&t);
            let (h, r, tl) = (h.to_owned(), r.to_owned(), tl.to_owned());
            m.iter().map(move |s| (h.clone(), r.clone(), tl.clone(), s))
        })
        .collect()
}
