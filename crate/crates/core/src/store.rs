//! Immutable, dictionary-encoded triple store.
//!
//! Labels are interned into dense ids in first-appearance order. The distinct
//! triples are kept sorted by `(head, relation, tail)`, which doubles as the
//! per-entity out-adjacency. Three further indexes are derived from it:
//!
//! * per relation, `(head, tail)` pairs sorted by head (forward lookup),
//! * per relation, `(tail, head)` pairs sorted by tail (backward lookup),
//! * per head, `(tail, relation)` pairs sorted by tail, which answers
//!   "which relations connect this ordered entity pair".

use std::fmt;
use std::str::FromStr;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A directed labeled edge. Ordering is lexicographic by head, relation, tail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }

    /// The triple with head and tail swapped under the same relation.
    pub fn reversed(self) -> Self {
        Triple::new(self.tail, self.relation, self.head)
    }
}

/// Provenance of a triple in a split dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
    Unsplit,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::Valid, Split::Test, Split::Unsplit];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
            Split::Unsplit => "unsplit",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            "unsplit" => Ok(Split::Unsplit),
            other => Err(format!("unknown split tag {other:?}")),
        }
    }
}

/// Set of splits a distinct triple was seen in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SplitMask(u8);

impl SplitMask {
    pub fn single(split: Split) -> Self {
        SplitMask(split.bit())
    }

    pub fn contains(self, split: Split) -> bool {
        self.0 & split.bit() != 0
    }

    pub fn insert(&mut self, split: Split) {
        self.0 |= split.bit();
    }

    pub fn remove(&mut self, split: Split) {
        self.0 &= !split.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: SplitMask) -> SplitMask {
        SplitMask(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Split> {
        Split::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

/// A triple still in label form, as read from a file.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabeledTriple {
    pub head: String,
    pub relation: String,
    pub tail: String,
    pub split: Split,
}

impl LabeledTriple {
    pub fn new(head: &str, relation: &str, tail: &str, split: Split) -> Self {
        LabeledTriple {
            head: head.to_owned(),
            relation: relation.to_owned(),
            tail: tail.to_owned(),
            split,
        }
    }
}

/// Bidirectional label <-> id maps for entities and relations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entities: IndexSet<String>,
    relations: IndexSet<String>,
}

impl Vocabulary {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entities.get_index_of(label).map(|i| EntityId(i as u32))
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relations.get_index_of(label).map(|i| RelationId(i as u32))
    }

    pub fn entity_label(&self, id: EntityId) -> Option<&str> {
        self.entities.get_index(id.index()).map(String::as_str)
    }

    pub fn relation_label(&self, id: RelationId) -> Option<&str> {
        self.relations.get_index(id.index()).map(String::as_str)
    }

    fn intern_entity(&mut self, label: &str) -> EntityId {
        if let Some(i) = self.entities.get_index_of(label) {
            return EntityId(i as u32);
        }
        let (i, _) = self.entities.insert_full(label.to_owned());
        EntityId(i as u32)
    }

    fn intern_relation(&mut self, label: &str) -> RelationId {
        if let Some(i) = self.relations.get_index_of(label) {
            return RelationId(i as u32);
        }
        let (i, _) = self.relations.insert_full(label.to_owned());
        RelationId(i as u32)
    }
}

/// Incremental builder; interns labels as they arrive so callers can stream
/// large files without materializing labeled triples.
#[derive(Debug, Default)]
pub struct StoreBuilder {
    vocabulary: Vocabulary,
    raw: Vec<(Triple, Split)>,
}

impl StoreBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, head: &str, relation: &str, tail: &str, split: Split) {
        let head = self.vocabulary.intern_entity(head);
        let relation = self.vocabulary.intern_relation(relation);
        let tail = self.vocabulary.intern_entity(tail);
        self.raw.push((Triple::new(head, relation, tail), split));
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn build(self) -> Result<TripleStore> {
        let StoreBuilder {
            vocabulary,
            mut raw,
        } = self;
        if raw.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let raw_count = raw.len() as u64;
        let mut raw_split_counts = [0u64; 4];
        for (_, split) in &raw {
            raw_split_counts[*split as usize] += 1;
        }

        raw.sort_unstable_by_key(|(t, _)| *t);
        let mut triples: Vec<Triple> = Vec::with_capacity(raw.len());
        let mut splits: Vec<SplitMask> = Vec::with_capacity(raw.len());
        for (t, s) in raw {
            if triples.last() == Some(&t) {
                splits.last_mut().unwrap().insert(s);
            } else {
                triples.push(t);
                splits.push(SplitMask::single(s));
            }
        }
        triples.shrink_to_fit();
        splits.shrink_to_fit();

        Ok(TripleStore::index(vocabulary, triples, splits, raw_count, raw_split_counts))
    }
}

#[derive(Clone, Debug)]
pub struct TripleStore {
    vocabulary: Vocabulary,
    /// Distinct triples sorted by (head, relation, tail).
    triples: Vec<Triple>,
    splits: Vec<SplitMask>,
    raw_triple_count: u64,
    raw_split_counts: [u64; 4],
    /// `triples[out_offsets[e]..out_offsets[e + 1]]` are the triples headed by `e`;
    /// the same ranges index `pair_index`.
    out_offsets: Vec<usize>,
    in_degree: Vec<u32>,
    rel_offsets: Vec<usize>,
    forward: Vec<(EntityId, EntityId)>,
    backward: Vec<(EntityId, EntityId)>,
    pair_index: Vec<(EntityId, RelationId)>,
}

impl TripleStore {
    /// Encodes labeled triples; ids follow first appearance in `triples`.
    pub fn from_labeled<I, T>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: std::borrow::Borrow<LabeledTriple>,
    {
        let mut builder = StoreBuilder::new();
        for t in triples {
            let t = t.borrow();
            builder.push(&t.head, &t.relation, &t.tail, t.split);
        }
        builder.build()
    }

    fn index(
        vocabulary: Vocabulary,
        triples: Vec<Triple>,
        splits: Vec<SplitMask>,
        raw_triple_count: u64,
        raw_split_counts: [u64; 4],
    ) -> Self {
        let num_entities = vocabulary.num_entities();
        let num_relations = vocabulary.num_relations();

        let mut out_offsets = vec![0usize; num_entities + 1];
        let mut in_degree = vec![0u32; num_entities];
        let mut rel_offsets = vec![0usize; num_relations + 1];
        for t in &triples {
            out_offsets[t.head.index() + 1] += 1;
            in_degree[t.tail.index()] += 1;
            rel_offsets[t.relation.index() + 1] += 1;
        }
        for i in 0..num_entities {
            out_offsets[i + 1] += out_offsets[i];
        }
        for i in 0..num_relations {
            rel_offsets[i + 1] += rel_offsets[i];
        }

        // Stable bucketing by relation keeps (head, tail) order from the sorted triples.
        let mut forward = vec![(EntityId(0), EntityId(0)); triples.len()];
        let mut cursor = rel_offsets.clone();
        for t in &triples {
            let slot = &mut cursor[t.relation.index()];
            forward[*slot] = (t.head, t.tail);
            *slot += 1;
        }
        let mut backward: Vec<(EntityId, EntityId)> = forward.iter().map(|&(h, t)| (t, h)).collect();
        for r in 0..num_relations {
            backward[rel_offsets[r]..rel_offsets[r + 1]].sort_unstable();
        }

        let mut pair_index: Vec<(EntityId, RelationId)> =
            triples.iter().map(|t| (t.tail, t.relation)).collect();
        for e in 0..num_entities {
            pair_index[out_offsets[e]..out_offsets[e + 1]].sort_unstable();
        }

        TripleStore {
            vocabulary,
            triples,
            splits,
            raw_triple_count,
            raw_split_counts,
            out_offsets,
            in_degree,
            rel_offsets,
            forward,
            backward,
            pair_index,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn num_entities(&self) -> usize {
        self.vocabulary.num_entities()
    }

    pub fn num_relations(&self) -> usize {
        self.vocabulary.num_relations()
    }

    /// Number of distinct triples.
    pub fn num_triples(&self) -> usize {
        self.triples.len()
    }

    /// Number of input triples, duplicates included.
    pub fn raw_triple_count(&self) -> u64 {
        self.raw_triple_count
    }

    /// Number of input lines tagged with `split`, duplicates included.
    pub fn raw_split_count(&self, split: Split) -> u64 {
        self.raw_split_counts[split as usize]
    }

    /// Distinct triples in lexicographic order.
    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    /// Distinct triples paired with the splits they occurred in.
    pub fn tagged_triples(&self) -> impl Iterator<Item = (Triple, SplitMask)> + '_ {
        self.triples.iter().copied().zip(self.splits.iter().copied())
    }

    pub fn has_split(&self, split: Split) -> bool {
        self.splits.iter().any(|m| m.contains(split))
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.num_entities() as u32).map(EntityId)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> {
        (0..self.num_relations() as u32).map(RelationId)
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.index() < self.num_entities() {
            Ok(())
        } else {
            Err(Error::InvalidId {
                kind: "entity",
                id: e.0,
                len: self.num_entities(),
            })
        }
    }

    pub fn check_relation(&self, r: RelationId) -> Result<()> {
        if r.index() < self.num_relations() {
            Ok(())
        } else {
            Err(Error::InvalidId {
                kind: "relation",
                id: r.0,
                len: self.num_relations(),
            })
        }
    }

    pub fn contains(&self, t: &Triple) -> Result<bool> {
        self.check_entity(t.head)?;
        self.check_relation(t.relation)?;
        self.check_entity(t.tail)?;
        Ok(self.contains_unchecked(t))
    }

    /// Membership through the forward relation index; ids must be valid.
    pub fn contains_unchecked(&self, t: &Triple) -> bool {
        self.forward_pairs(t.relation)
            .binary_search(&(t.head, t.tail))
            .is_ok()
    }

    /// Relations `r'` such that `(t, r', h)` is in the store.
    pub fn relations_on_reversed_pair(&self, h: EntityId, t: EntityId) -> Result<Vec<RelationId>> {
        self.check_entity(h)?;
        self.check_entity(t)?;
        Ok(self.relations_between(t, h).collect())
    }

    /// Relations `r` such that `(from, r, to)` is in the store, ascending.
    pub fn relations_between(&self, from: EntityId, to: EntityId) -> impl Iterator<Item = RelationId> + '_ {
        let slice = &self.pair_index[self.out_offsets[from.index()]..self.out_offsets[from.index() + 1]];
        let lo = slice.partition_point(|&(tail, _)| tail < to);
        let hi = lo + slice[lo..].partition_point(|&(tail, _)| tail == to);
        slice[lo..hi].iter().map(|&(_, r)| r)
    }

    pub fn out_neighbors(&self, e: EntityId) -> Result<Vec<(RelationId, EntityId)>> {
        self.check_entity(e)?;
        Ok(self.out_triples(e).iter().map(|t| (t.relation, t.tail)).collect())
    }

    /// Triples headed by `e`, sorted by (relation, tail). Panics on an invalid id.
    pub fn out_triples(&self, e: EntityId) -> &[Triple] {
        &self.triples[self.out_offsets[e.index()]..self.out_offsets[e.index() + 1]]
    }

    pub fn out_degree(&self, e: EntityId) -> usize {
        self.out_offsets[e.index() + 1] - self.out_offsets[e.index()]
    }

    pub fn in_degree(&self, e: EntityId) -> usize {
        self.in_degree[e.index()] as usize
    }

    /// In-degree plus out-degree over distinct triples.
    pub fn degree(&self, e: EntityId) -> usize {
        self.out_degree(e) + self.in_degree(e)
    }

    pub fn relation_size(&self, r: RelationId) -> usize {
        self.rel_offsets[r.index() + 1] - self.rel_offsets[r.index()]
    }

    /// `(head, tail)` pairs of relation `r`, sorted.
    pub fn forward_pairs(&self, r: RelationId) -> &[(EntityId, EntityId)] {
        &self.forward[self.rel_offsets[r.index()]..self.rel_offsets[r.index() + 1]]
    }

    /// `(tail, head)` pairs of relation `r`, sorted.
    pub fn backward_pairs(&self, r: RelationId) -> &[(EntityId, EntityId)] {
        &self.backward[self.rel_offsets[r.index()]..self.rel_offsets[r.index() + 1]]
    }

    /// The contiguous run of `(head, tail)` pairs of `r` with the given head.
    pub fn tails_of(&self, r: RelationId, head: EntityId) -> &[(EntityId, EntityId)] {
        equal_range(self.forward_pairs(r), head)
    }

    /// The contiguous run of `(tail, head)` pairs of `r` with the given tail.
    pub fn heads_of(&self, r: RelationId, tail: EntityId) -> &[(EntityId, EntityId)] {
        equal_range(self.backward_pairs(r), tail)
    }

    pub fn label_triple(&self, t: &Triple) -> (&str, &str, &str) {
        (
            self.vocabulary.entity_label(t.head).unwrap_or_default(),
            self.vocabulary.relation_label(t.relation).unwrap_or_default(),
            self.vocabulary.entity_label(t.tail).unwrap_or_default(),
        )
    }

    pub fn relation_label(&self, r: RelationId) -> &str {
        self.vocabulary.relation_label(r).unwrap_or_default()
    }

    pub fn entity_label(&self, e: EntityId) -> &str {
        self.vocabulary.entity_label(e).unwrap_or_default()
    }

    /// Keeps the triples for which `keep` returns a non-empty mask. The
    /// vocabulary is shared with `self`, so ids stay comparable; entities
    /// and relations without surviving triples keep their ids. Raw counts of
    /// the result equal its distinct counts.
    pub fn filter<F>(&self, mut keep: F) -> Result<TripleStore>
    where
        F: FnMut(&Triple, SplitMask) -> SplitMask,
    {
        let mut triples = Vec::new();
        let mut splits = Vec::new();
        let mut raw_split_counts = [0u64; 4];
        for (t, m) in self.tagged_triples() {
            let m = keep(&t, m);
            if !m.is_empty() {
                triples.push(t);
                splits.push(m);
                for s in m.iter() {
                    raw_split_counts[s as usize] += 1;
                }
            }
        }
        if triples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = triples.len() as u64;
        Ok(TripleStore::index(
            self.vocabulary.clone(),
            triples,
            splits,
            n,
            raw_split_counts,
        ))
    }

    /// The distinct triples tagged with `split`, sharing this store's ids.
    /// The raw count is that of the split's input lines.
    pub fn split_view(&self, split: Split) -> Result<TripleStore> {
        if !self.has_split(split) {
            return Err(Error::MissingSplit(split));
        }
        let mut view = self.filter(|_, m| {
            if m.contains(split) {
                SplitMask::single(split)
            } else {
                SplitMask::default()
            }
        })?;
        let raw = self.raw_split_count(split);
        view.raw_triple_count = raw;
        view.raw_split_counts[split as usize] = raw;
        Ok(view)
    }

    /// Re-encodes the store so that only labels used by its triples remain.
    /// Surviving ids keep their relative order.
    pub fn compact(&self) -> Result<TripleStore> {
        let mut used_e = vec![false; self.num_entities()];
        let mut used_r = vec![false; self.num_relations()];
        for t in &self.triples {
            used_e[t.head.index()] = true;
            used_e[t.tail.index()] = true;
            used_r[t.relation.index()] = true;
        }
        let mut vocabulary = Vocabulary::default();
        let mut e_map = vec![EntityId(u32::MAX); self.num_entities()];
        for (i, used) in used_e.iter().enumerate() {
            if *used {
                e_map[i] = vocabulary.intern_entity(self.entity_label(EntityId(i as u32)));
            }
        }
        let mut r_map = vec![RelationId(u32::MAX); self.num_relations()];
        for (i, used) in used_r.iter().enumerate() {
            if *used {
                r_map[i] = vocabulary.intern_relation(self.relation_label(RelationId(i as u32)));
            }
        }
        // Relabelling is monotone, so the sorted order of triples is preserved.
        let triples: Vec<Triple> = self
            .triples
            .iter()
            .map(|t| Triple::new(e_map[t.head.index()], r_map[t.relation.index()], e_map[t.tail.index()]))
            .collect();
        Ok(TripleStore::index(
            vocabulary,
            triples,
            self.splits.clone(),
            self.raw_triple_count,
            self.raw_split_counts,
        ))
    }
}

fn equal_range(pairs: &[(EntityId, EntityId)], key: EntityId) -> &[(EntityId, EntityId)] {
    let lo = pairs.partition_point(|&(k, _)| k < key);
    let hi = lo + pairs[lo..].partition_point(|&(k, _)| k == key);
    &pairs[lo..hi]
}
