//! Shared test support: dataset lookup, random stores and brute-force oracles.
//!
//! The oracles work on plain label sets and never touch the store's indexes.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use proptest::prelude::*;

use kgprofile::ingest::{load_dataset, DatasetManifest};
use kgprofile::relations::MiningConfig;
use kgprofile::{LabeledTriple, Split, TripleStore};

/// Directory holding `<name>/manifest.toml` datasets. Tests honour
/// `KGPROFILE_DATA`, otherwise `data/` at the workspace root.
pub fn data_dir() -> PathBuf {
    std::env::var_os("KGPROFILE_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn manifest_path(name: &str) -> PathBuf {
    data_dir().join(name).join("manifest.toml")
}

/// `None` when the dataset is not installed.
pub fn load_named(name: &str) -> Option<Result<(DatasetManifest, TripleStore), kgprofile::Error>> {
    let path = manifest_path(name);
    if !path.exists() {
        return None;
    }
    Some(DatasetManifest::from_path(&path).and_then(|m| load_dataset(&m).map(|s| (m, s))))
}

pub type Raw = (u8, u8, u8, Split);

pub fn arb_split() -> impl Strategy<Value = Split> {
    prop_oneof![
        6 => Just(Split::Train),
        1 => Just(Split::Valid),
        2 => Just(Split::Test),
    ]
}

/// Up to `max_triples` triples over small random vocabularies, so that
/// reversals, inverses and joins occur often.
pub fn arb_raw(max_entities: u8, max_relations: u8, max_triples: usize) -> impl Strategy<Value = Vec<Raw>> {
    (1..=max_entities, 1..=max_relations).prop_flat_map(move |(ne, nr)| {
        prop::collection::vec((0..ne, 0..nr, 0..ne, arb_split()), 1..=max_triples)
    })
}

pub fn arb_mining() -> impl Strategy<Value = MiningConfig> {
    (prop_oneof![Just(0.5), Just(0.75), Just(0.95), Just(1.0)], 1u64..=3).prop_map(|(theta, min_support)| MiningConfig {
        confidence_threshold: theta,
        min_support,
        ..MiningConfig::default()
    })
}

pub fn ent(i: u8) -> String {
    format!("e{i}")
}

pub fn rel(i: u8) -> String {
    format!("r{i}")
}

pub fn build(raw: &[Raw]) -> TripleStore {
    TripleStore::from_labeled(
        raw.iter()
            .map(|&(h, r, t, s)| LabeledTriple::new(&ent(h), &rel(r), &ent(t), s)),
    )
    .expect("non-empty")
}

pub fn build_unsplit(raw: &[(u8, u8, u8)]) -> TripleStore {
    TripleStore::from_labeled(
        raw.iter()
            .map(|&(h, r, t)| LabeledTriple::new(&ent(h), &rel(r), &ent(t), Split::Unsplit)),
    )
    .expect("non-empty")
}

fn frac(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Brute-force reference over a set of distinct labelled triples.
pub struct Oracle {
    pub triples: HashSet<(String, String, String)>,
    pub entities: BTreeSet<String>,
    pub relations: BTreeSet<String>,
}

#[derive(Debug, PartialEq)]
pub struct OracleCardinality {
    pub distinct_heads: u64,
    pub functional_heads: u64,
    pub distinct_tails: u64,
    pub functional_tails: u64,
    pub class: &'static str,
}

impl Oracle {
    pub fn new<'a>(labeled: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Self {
        let mut o = Oracle {
            triples: HashSet::new(),
            entities: BTreeSet::new(),
            relations: BTreeSet::new(),
        };
        for (h, r, t) in labeled {
            o.entities.insert(h.to_owned());
            o.entities.insert(t.to_owned());
            o.relations.insert(r.to_owned());
            o.triples.insert((h.to_owned(), r.to_owned(), t.to_owned()));
        }
        o
    }

    pub fn from_raw(raw: &[Raw]) -> Self {
        let labeled: Vec<(String, String, String)> = raw.iter().map(|&(h, r, t, _)| (ent(h), rel(r), ent(t))).collect();
        Oracle::new(labeled.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())))
    }

    pub fn has(&self, h: &str, r: &str, t: &str) -> bool {
        self.triples.contains(&(h.to_owned(), r.to_owned(), t.to_owned()))
    }

    pub fn of(&self, r: &str) -> Vec<(&str, &str)> {
        self.triples
            .iter()
            .filter(|(_, rr, _)| rr == r)
            .map(|(h, _, t)| (h.as_str(), t.as_str()))
            .collect()
    }

    pub fn cardinality(&self, r: &str, theta: f64) -> OracleCardinality {
        let pairs = self.of(r);
        let mut tails_per_head: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        let mut heads_per_tail: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for &(h, t) in &pairs {
            tails_per_head.entry(h).or_default().insert(t);
            heads_per_tail.entry(t).or_default().insert(h);
        }
        let functional_heads = tails_per_head.values().filter(|s| s.len() == 1).count() as u64;
        let functional_tails = heads_per_tail.values().filter(|s| s.len() == 1).count() as u64;
        let fwd = frac(functional_heads, tails_per_head.len() as u64) >= theta;
        let bwd = frac(functional_tails, heads_per_tail.len() as u64) >= theta;
        OracleCardinality {
            distinct_heads: tails_per_head.len() as u64,
            functional_heads,
            distinct_tails: heads_per_tail.len() as u64,
            functional_tails,
            class: match (fwd, bwd) {
                (true, true) => "1-1",
                (true, false) => "M-1",
                (false, true) => "1-M",
                (false, false) => "M-M",
            },
        }
    }

    /// `(triples whose reversal is present, triples)`.
    pub fn symmetry(&self, r: &str) -> (u64, u64) {
        let pairs = self.of(r);
        let sym = pairs.iter().filter(|(h, t)| self.has(t, r, h)).count() as u64;
        (sym, pairs.len() as u64)
    }

    /// Accepted inverse partners of `r` with their match counts.
    pub fn inverse_partners(&self, r: &str, cfg: &MiningConfig) -> BTreeMap<String, u64> {
        let pairs = self.of(r);
        let total = pairs.len() as u64;
        let mut out = BTreeMap::new();
        for other in &self.relations {
            if other == r {
                continue;
            }
            let matches = pairs.iter().filter(|(h, t)| self.has(t, other, h)).count() as u64;
            if total >= cfg.min_support && frac(matches, total) >= cfg.confidence_threshold {
                out.insert(other.clone(), matches);
            }
        }
        out
    }

    /// Accepted composition witnesses: head relation → {(r1, r2, hits, support)}.
    pub fn composites(&self, cfg: &MiningConfig) -> BTreeMap<String, BTreeSet<(String, String, u64, u64)>> {
        let mut out: BTreeMap<String, BTreeSet<(String, String, u64, u64)>> = BTreeMap::new();
        for r1 in &self.relations {
            for r2 in &self.relations {
                let mut body: BTreeSet<(&str, &str)> = BTreeSet::new();
                for x in &self.entities {
                    for y in &self.entities {
                        if !self.has(x, r1, y) {
                            continue;
                        }
                        for z in &self.entities {
                            if self.has(y, r2, z) {
                                body.insert((x, z));
                            }
                        }
                    }
                }
                let support = body.len() as u64;
                if support == 0 {
                    continue;
                }
                for r in &self.relations {
                    let hits = body.iter().filter(|(x, z)| self.has(x, r, z)).count() as u64;
                    if hits > 0 && support >= cfg.min_support && frac(hits, support) >= cfg.confidence_threshold {
                        out.entry(r.clone())
                            .or_default()
                            .insert((r1.clone(), r2.clone(), hits, support));
                    }
                }
            }
        }
        out
    }

    /// Pattern flags per relation, in flag order.
    pub fn flags(&self, cfg: &MiningConfig) -> BTreeMap<String, Vec<&'static str>> {
        let composites = self.composites(cfg);
        self.relations
            .iter()
            .map(|r| {
                let (sym, total) = self.symmetry(r);
                let accepts = |c: f64| total >= cfg.min_support && c >= cfg.confidence_threshold;
                let mut flags = Vec::new();
                if accepts(frac(sym, total)) {
                    flags.push("symmetric");
                }
                if accepts(1.0 - frac(sym, total)) {
                    flags.push("antisymmetric");
                }
                if !self.inverse_partners(r, cfg).is_empty() {
                    flags.push("inverse");
                }
                if composites.contains_key(r) {
                    flags.push("composite");
                }
                (r.clone(), flags)
            })
            .collect()
    }

    /// Walk counts of lengths `1..=max_len` from `start`, by explicit DFS.
    pub fn walks(&self, start: &str, max_len: usize) -> Vec<u64> {
        let mut out_edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (h, _, t) in &self.triples {
            out_edges.entry(h.as_str()).or_default().push(t.as_str());
        }
        let mut counts = vec![0u64; max_len];
        fn dfs<'a>(node: &'a str, depth: usize, edges: &BTreeMap<&'a str, Vec<&'a str>>, counts: &mut [u64]) {
            if depth == counts.len() {
                return;
            }
            for &next in edges.get(node).map(Vec::as_slice).unwrap_or(&[]) {
                counts[depth] += 1;
                dfs(next, depth + 1, edges, counts);
            }
        }
        dfs(start, 0, &out_edges, &mut counts);
        counts
    }
}

/// Peak resident set size of this process in bytes, from `/proc`.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Compares pattern mining and cardinality on `raw` against the oracle.
pub fn check_patterns(raw: &[Raw], cfg: &MiningConfig) -> Result<(), String> {
    use kgprofile::relations::{cardinality_stats, mine_patterns};

    let store = build(raw);
    let oracle = Oracle::from_raw(raw);
    let reports = mine_patterns(&store, cfg).map_err(|e| e.to_string())?;
    if reports.len() != oracle.relations.len() {
        return Err(format!("{} reports for {} relations", reports.len(), oracle.relations.len()));
    }
    let composites = oracle.composites(cfg);
    let flags = oracle.flags(cfg);
    for p in &reports {
        let r = store.relation_label(p.relation);

        let got = cardinality_stats(&store, p.relation, cfg);
        let want = oracle.cardinality(r, cfg.confidence_threshold);
        let got_tuple = (got.distinct_heads, got.functional_heads, got.distinct_tails, got.functional_tails, got.class.as_str());
        let want_tuple = (want.distinct_heads, want.functional_heads, want.distinct_tails, want.functional_tails, want.class);
        if got_tuple != want_tuple {
            return Err(format!("cardinality of {r}: got {got_tuple:?}, want {want_tuple:?}"));
        }

        let (sym, total) = oracle.symmetry(r);
        if p.triples != total || p.sym_conf != frac(sym, total) || p.sym_conf + p.antisym_conf != 1.0 {
            return Err(format!("symmetry of {r}: got {}/{} triples {}, want {sym}/{total}", p.sym_conf, p.antisym_conf, p.triples));
        }

        let got_inv: BTreeMap<String, u64> = p
            .inverse_partners
            .iter()
            .map(|i| (store.relation_label(i.relation).to_owned(), i.matches))
            .collect();
        let want_inv = oracle.inverse_partners(r, cfg);
        if got_inv != want_inv {
            return Err(format!("inverse partners of {r}: got {got_inv:?}, want {want_inv:?}"));
        }
        for i in &p.inverse_partners {
            if i.confidence != frac(i.matches, total) {
                return Err(format!("inverse confidence of {r}: {} vs {}/{total}", i.confidence, i.matches));
            }
        }
        if p.inverse_partners.windows(2).any(|w| w[0].confidence < w[1].confidence) {
            return Err(format!("inverse partners of {r} not sorted"));
        }

        let got_comp: BTreeSet<(String, String, u64)> = p
            .composite_witnesses
            .iter()
            .map(|w| {
                (
                    store.relation_label(w.body.0).to_owned(),
                    store.relation_label(w.body.1).to_owned(),
                    w.support,
                )
            })
            .collect();
        let want_full = composites.get(r).cloned().unwrap_or_default();
        let want_comp: BTreeSet<(String, String, u64)> =
            want_full.iter().map(|(a, b, _, s)| (a.clone(), b.clone(), *s)).collect();
        if got_comp != want_comp {
            return Err(format!("composites of {r}: got {got_comp:?}, want {want_comp:?}"));
        }
        for w in &p.composite_witnesses {
            let (a, b) = (store.relation_label(w.body.0), store.relation_label(w.body.1));
            let (_, _, hits, support) = want_full
                .iter()
                .find(|(x, y, _, _)| x == a && y == b)
                .expect("matched above");
            if w.sampled || w.confidence != frac(*hits, *support) {
                return Err(format!("composite ({a},{b}) => {r}: confidence {} vs {hits}/{support}", w.confidence));
            }
        }

        let got_flags: Vec<&str> = p.flags.iter().map(|f| f.as_str()).collect();
        if got_flags != flags[r] {
            return Err(format!("flags of {r}: got {got_flags:?}, want {:?}", flags[r]));
        }
    }
    Ok(())
}

/// Compares DP walk counts for lengths 1..=4 from every entity against DFS.
pub fn check_walks(raw: &[(u8, u8, u8)]) -> Result<(), String> {
    use kgprofile::metapaths::walk_counts;
    use num_bigint::BigUint;

    let store = build_unsplit(raw);
    let labeled: Vec<(String, String, String)> = raw.iter().map(|&(h, r, t)| (ent(h), rel(r), ent(t))).collect();
    let oracle = Oracle::new(labeled.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())));
    for e in store.entities() {
        let got = walk_counts(&store, e, 4).map_err(|e| e.to_string())?;
        let want: Vec<BigUint> = oracle
            .walks(store.entity_label(e), 4)
            .into_iter()
            .map(BigUint::from)
            .collect();
        if got != want {
            return Err(format!("walks from {}: got {got:?}, want {want:?}", store.entity_label(e)));
        }
    }
    Ok(())
}

pub fn arb_walk_raw() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
    (1u8..=30, 1u8..=4).prop_flat_map(|(ne, nr)| prop::collection::vec((0..ne, 0..nr, 0..ne), 1..=200))
}

/// A split dataset with leaks planted by construction.
pub struct Planted {
    pub store: TripleStore,
    /// `(head, relation, tail, cause)` with cause `symmetric_self` or
    /// `inverse_partner:<relation>`.
    pub test_leaks: BTreeSet<(String, String, String, String)>,
    pub valid_leaks: BTreeSet<(String, String, String, String)>,
    pub test_size: usize,
}

/// Train holds `base` certified instances of an inverse pair
/// (`has_part`/`part_of`) and of a symmetric relation (`adjacent`), plus the
/// reversals that give away `inverse_leaks` and `symmetric_leaks` test
/// triples. `clean` test triples have no witness; one valid triple leaks.
pub fn planted(base: usize, inverse_leaks: usize, symmetric_leaks: usize, clean: usize) -> Planted {
    let mut triples: Vec<(String, &str, String, Split)> = Vec::new();
    let mut test_leaks = BTreeSet::new();
    let mut valid_leaks = BTreeSet::new();
    let mut push = |h: String, r: &'static str, t: String, s: Split| triples.push((h, r, t, s));
    for i in 0..base {
        push(format!("w{i}"), "has_part", format!("p{i}"), Split::Train);
        push(format!("p{i}"), "part_of", format!("w{i}"), Split::Train);
        push(format!("s{i}"), "adjacent", format!("t{i}"), Split::Train);
        push(format!("t{i}"), "adjacent", format!("s{i}"), Split::Train);
        push(format!("x{i}"), "causes", format!("y{i}"), Split::Train);
    }
    for j in 0..inverse_leaks {
        push(format!("lp{j}"), "part_of", format!("lw{j}"), Split::Train);
        push(format!("lw{j}"), "has_part", format!("lp{j}"), Split::Test);
        test_leaks.insert((format!("lw{j}"), "has_part".into(), format!("lp{j}"), "inverse_partner:part_of".into()));
    }
    for j in 0..symmetric_leaks {
        push(format!("st{j}"), "adjacent", format!("ss{j}"), Split::Train);
        push(format!("ss{j}"), "adjacent", format!("st{j}"), Split::Test);
        test_leaks.insert((format!("ss{j}"), "adjacent".into(), format!("st{j}"), "symmetric_self".into()));
    }
    for j in 0..clean {
        push(format!("c{j}"), "has_part", format!("d{j}"), Split::Test);
        push(format!("u{j}"), "causes", format!("v{j}"), Split::Test);
        push(format!("y{j}"), "adjacent", format!("z{j}"), Split::Test);
    }
    push("vp".into(), "part_of", "vw".into(), Split::Train);
    push("vw".into(), "has_part", "vp".into(), Split::Valid);
    push("vc".into(), "causes", "vd".into(), Split::Valid);
    valid_leaks.insert(("vw".into(), "has_part".into(), "vp".into(), "inverse_partner:part_of".into()));
    let test_size = inverse_leaks + symmetric_leaks + 3 * clean;
    let store = TripleStore::from_labeled(triples.iter().map(|(h, r, t, s)| LabeledTriple::new(h, r, t, *s))).unwrap();
    Planted {
        store,
        test_leaks,
        valid_leaks,
        test_size,
    }
}

pub fn leak_set(store: &TripleStore, report: &kgprofile::leakage::LeakageReport) -> BTreeSet<(String, String, String, String)> {
    use kgprofile::leakage::LeakCause;
    report
        .leaked_test_triples
        .iter()
        .map(|l| {
            let (h, r, t) = store.label_triple(&l.triple);
            let cause = match l.cause {
                LeakCause::SymmetricSelf => "symmetric_self".to_owned(),
                LeakCause::InversePartner(p) => format!("inverse_partner:{}", store.relation_label(p)),
            };
            (h.to_owned(), r.to_owned(), t.to_owned(), cause)
        })
        .collect()
}
