//! Profile reports, the cross-dataset comparison table and plot-ready CSVs.
//!
//! The JSON report is the canonical output. Field order is fixed by the
//! struct definitions below; relations and entities are referred to by label.
//! `timings` is informational and the only part that varies between runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metapaths::{estimate_metapaths, MetapathConfig};
use crate::metrics::{degree_histogram, relation_load, round_half_away, summarize, top_degree_entity, DegreeHistogram, GraphSummary};
use crate::relations::{
    cardinality_stats, cardinality_totals, distribution_of, mine_patterns, CardinalityClass, MiningConfig,
    PatternDistribution, PatternFlag,
};
use crate::store::{Split, TripleStore};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub mining: MiningConfig,
    pub metapaths: MetapathConfig,
    /// Split the analysis was restricted to; `None` means all splits merged.
    pub split: Option<Split>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeBin {
    pub degree: u64,
    pub entities: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopEntity {
    pub entity: String,
    pub degree: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegreeSection {
    pub min: u64,
    pub max: u64,
    pub top_entity: TopEntity,
    pub histogram: Vec<DegreeBin>,
}

impl DegreeSection {
    pub fn to_histogram(&self) -> DegreeHistogram {
        DegreeHistogram {
            bins: self.histogram.iter().map(|b| (b.degree, b.entities)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationCount {
    pub relation: String,
    pub triples: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCount {
    pub class: CardinalityClass,
    pub relations: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationCardinality {
    pub relation: String,
    pub class: CardinalityClass,
    pub distinct_heads: u64,
    pub functional_heads: u64,
    pub distinct_tails: u64,
    pub functional_tails: u64,
    pub forward_confidence: f64,
    pub backward_confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CardinalitySection {
    pub totals: Vec<ClassCount>,
    pub relations: Vec<RelationCardinality>,
}

impl CardinalitySection {
    /// Class covering the most relations; ties go to the earlier class in
    /// 1-1, 1-M, M-1, M-M order.
    pub fn dominant(&self) -> Option<CardinalityClass> {
        self.totals
            .iter()
            .fold(None::<&ClassCount>, |acc, c| match acc {
                Some(a) if a.relations >= c.relations => Some(a),
                _ => Some(c),
            })
            .filter(|c| c.relations > 0)
            .map(|c| c.class)
    }

    pub fn count(&self, class: CardinalityClass) -> u64 {
        self.totals
            .iter()
            .find(|c| c.class == class)
            .map_or(0, |c| c.relations)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartnerEntry {
    pub relation: String,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessEntry {
    pub body: [String; 2],
    pub confidence: f64,
    pub support: u64,
    pub sampled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationPatterns {
    pub relation: String,
    pub triples: u64,
    pub sym_conf: f64,
    pub antisym_conf: f64,
    pub flags: Vec<PatternFlag>,
    pub inverse_partners: Vec<PartnerEntry>,
    pub composite_witnesses: Vec<WitnessEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSection {
    pub distribution: PatternDistribution,
    pub relations: Vec<RelationPatterns>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthSection {
    pub length: usize,
    pub mean: f64,
    /// Decimal walk counts, one per sample.
    pub counts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetapathSection {
    pub sampled_entities: Vec<String>,
    pub lengths: Vec<LengthSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileReport {
    pub dataset: String,
    pub tool_version: String,
    pub config: ReportConfig,
    pub summary: GraphSummary,
    pub degree: DegreeSection,
    pub relation_load: Vec<RelationCount>,
    pub cardinality: CardinalitySection,
    pub patterns: PatternSection,
    pub metapaths: MetapathSection,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

struct Stopwatch(BTreeMap<String, f64>);

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.insert(stage.to_owned(), start.elapsed().as_secs_f64());
        out
    }
}

/// Runs every analysis over `store`.
pub fn analyze(
    store: &TripleStore,
    dataset: &str,
    mining: &MiningConfig,
    metapaths: &MetapathConfig,
    split: Option<Split>,
) -> Result<ProfileReport> {
    mining.validate()?;
    metapaths.validate()?;
    let mut watch = Stopwatch(BTreeMap::new());

    let summary = watch.time("summary", || summarize(store));

    let degree = watch.time("degree", || {
        let hist = degree_histogram(store);
        let (top, top_degree) = top_degree_entity(store).expect("non-empty store");
        DegreeSection {
            min: hist.min_degree().unwrap_or(0),
            max: hist.max_degree().unwrap_or(0),
            top_entity: TopEntity {
                entity: store.entity_label(top).to_owned(),
                degree: top_degree,
            },
            histogram: hist
                .bins
                .iter()
                .map(|(&degree, &entities)| DegreeBin { degree, entities })
                .collect(),
        }
    });

    let load = watch.time("relation_load", || {
        relation_load(store)
            .counts
            .into_iter()
            .map(|(r, triples)| RelationCount {
                relation: store.relation_label(r).to_owned(),
                triples,
            })
            .collect()
    });

    let cardinality = watch.time("cardinality", || {
        let stats: Vec<_> = store.relations().map(|r| cardinality_stats(store, r, mining)).collect();
        let classes = stats.iter().map(|s| (s.relation, s.class)).collect();
        CardinalitySection {
            totals: cardinality_totals(&classes)
                .into_iter()
                .map(|(class, relations)| ClassCount { class, relations })
                .collect(),
            relations: stats
                .into_iter()
                .map(|s| RelationCardinality {
                    relation: store.relation_label(s.relation).to_owned(),
                    class: s.class,
                    distinct_heads: s.distinct_heads,
                    functional_heads: s.functional_heads,
                    distinct_tails: s.distinct_tails,
                    functional_tails: s.functional_tails,
                    forward_confidence: s.forward_confidence,
                    backward_confidence: s.backward_confidence,
                })
                .collect(),
        }
    });

    let patterns = watch.time("patterns", || -> Result<PatternSection> {
        let reports = mine_patterns(store, mining)?;
        let distribution = distribution_of(&reports, store.num_triples() as u64);
        let label = |r| store.relation_label(r).to_owned();
        let relations = reports
            .into_iter()
            .map(|p| RelationPatterns {
                relation: label(p.relation),
                triples: p.triples,
                sym_conf: p.sym_conf,
                antisym_conf: p.antisym_conf,
                flags: p.flags,
                inverse_partners: p
                    .inverse_partners
                    .into_iter()
                    .map(|i| PartnerEntry {
                        relation: label(i.relation),
                        confidence: i.confidence,
                    })
                    .collect(),
                composite_witnesses: p
                    .composite_witnesses
                    .into_iter()
                    .map(|w| WitnessEntry {
                        body: [label(w.body.0), label(w.body.1)],
                        confidence: w.confidence,
                        support: w.support,
                        sampled: w.sampled,
                    })
                    .collect(),
            })
            .collect();
        Ok(PatternSection {
            distribution,
            relations,
        })
    })?;

    let metapath_section = watch.time("metapaths", || -> Result<MetapathSection> {
        let est = estimate_metapaths(store, metapaths)?;
        Ok(MetapathSection {
            sampled_entities: est
                .sampled_entities
                .iter()
                .map(|&e| store.entity_label(e).to_owned())
                .collect(),
            lengths: est
                .lengths
                .into_iter()
                .map(|l| LengthSection {
                    length: l.length,
                    mean: l.mean,
                    counts: l.counts.iter().map(ToString::to_string).collect(),
                })
                .collect(),
        })
    })?;

    Ok(ProfileReport {
        dataset: dataset.to_owned(),
        tool_version: TOOL_VERSION.to_owned(),
        config: ReportConfig {
            mining: mining.clone(),
            metapaths: metapaths.clone(),
            split,
        },
        summary,
        degree,
        relation_load: load,
        cardinality,
        patterns,
        metapaths: metapath_section,
        timings: watch.0,
    })
}

impl ProfileReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report serialized with timings cleared; identical across runs of
    /// the same input and configuration.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.timings.clear();
        copy.to_json()
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::MalformedReport {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// One row of the dataset comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    pub num_entities: u64,
    pub num_relations: u64,
    pub num_triples: u64,
    /// #T / #E rounded half away from zero.
    pub avg_degree: i64,
    /// −log10(#T / #E²) rounded to two decimals.
    #[serde(serialize_with = "two_decimals")]
    pub neg_log10_density: f64,
    pub dominant_cardinality: String,
    pub dominant_pattern: String,
}

fn two_decimals<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{x:.2}"))
}

pub fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl ComparisonRow {
    pub fn from_report(report: &ProfileReport) -> Self {
        let s = &report.summary;
        ComparisonRow {
            dataset: report.dataset.clone(),
            num_entities: s.num_entities,
            num_relations: s.num_relations,
            num_triples: s.num_triples_raw,
            avg_degree: round_half_away(s.avg_degree_table.value()),
            neg_log10_density: round2(s.neg_log10_density),
            dominant_cardinality: report
                .cardinality
                .dominant()
                .map_or("none".to_owned(), |c| c.to_string()),
            dominant_pattern: report
                .patterns
                .distribution
                .dominant()
                .map_or("none".to_owned(), |f| f.to_string()),
        }
    }
}

/// Rows sorted by dataset name.
pub fn comparison_table(reports: &[ProfileReport]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = reports.iter().map(ComparisonRow::from_report).collect();
    rows.sort_by(|a, b| a.dataset.cmp(&b.dataset));
    rows
}

pub fn write_comparison_csv<W: std::io::Write>(rows: &[ComparisonRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparison_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<ComparisonRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Clone, Debug, Default)]
pub struct PlotOptions {
    pub exclude_datasets: Vec<String>,
    /// Drop the single highest-degree entity from degree histograms.
    pub exclude_top_entity: bool,
}

fn file_stem(dataset: &str) -> String {
    dataset
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let to_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for row in rows {
        w.serialize(row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct DegreeRow {
    degree: u64,
    entities: u64,
}

#[derive(Serialize)]
struct LoadRow<'a> {
    rank: usize,
    relation: &'a str,
    triples: u64,
}

#[derive(Serialize)]
struct CardinalityRow {
    class: CardinalityClass,
    relations: u64,
}

#[derive(Serialize)]
struct PatternRow {
    flag: PatternFlag,
    relations: u64,
    triples: u64,
    triple_share: f64,
}

#[derive(Serialize)]
struct MetapathRow<'a> {
    length: usize,
    sample: usize,
    entity: &'a str,
    walks: &'a str,
    mean: f64,
}

/// The degree histogram as exported, after applying `opts`.
pub fn exported_histogram(report: &ProfileReport, opts: &PlotOptions) -> DegreeHistogram {
    let mut hist = report.degree.to_histogram();
    if opts.exclude_top_entity {
        hist.remove_one(report.degree.top_entity.degree);
    }
    hist
}

/// Writes per-report CSVs (`<dataset>.degree.csv`, `.relation_load.csv`,
/// `.cardinality.csv`, `.patterns.csv`, `.metapaths.csv`) plus
/// `summary.csv`, the comparison table of all included reports.
pub fn export_plots(reports: &[ProfileReport], dir: &Path, opts: &PlotOptions) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let included: Vec<&ProfileReport> = reports
        .iter()
        .filter(|r| !opts.exclude_datasets.contains(&r.dataset))
        .collect();
    let mut written = Vec::new();
    for report in &included {
        let stem = file_stem(&report.dataset);

        let path = dir.join(format!("{stem}.degree.csv"));
        let hist = exported_histogram(report, opts);
        write_csv(&path, hist.bins.iter().map(|(&degree, &entities)| DegreeRow { degree, entities }))?;
        written.push(path);

        let path = dir.join(format!("{stem}.relation_load.csv"));
        write_csv(
            &path,
            report.relation_load.iter().enumerate().map(|(i, r)| LoadRow {
                rank: i + 1,
                relation: &r.relation,
                triples: r.triples,
            }),
        )?;
        written.push(path);

        let path = dir.join(format!("{stem}.cardinality.csv"));
        write_csv(
            &path,
            report.cardinality.totals.iter().map(|c| CardinalityRow {
                class: c.class,
                relations: c.relations,
            }),
        )?;
        written.push(path);

        let path = dir.join(format!("{stem}.patterns.csv"));
        write_csv(
            &path,
            report.patterns.distribution.flags.iter().map(|f| PatternRow {
                flag: f.flag,
                relations: f.relations,
                triples: f.triples,
                triple_share: f.triple_share,
            }),
        )?;
        written.push(path);

        let path = dir.join(format!("{stem}.metapaths.csv"));
        let rows = report.metapaths.lengths.iter().flat_map(|l| {
            l.counts.iter().enumerate().map(move |(i, c)| MetapathRow {
                length: l.length,
                sample: i,
                entity: report.metapaths.sampled_entities.get(i).map_or("", String::as_str),
                walks: c,
                mean: l.mean,
            })
        });
        write_csv(&path, rows)?;
        written.push(path);
    }
    let owned: Vec<ProfileReport> = included.into_iter().cloned().collect();
    let path = dir.join("summary.csv");
    write_csv(&path, comparison_table(&owned))?;
    written.push(path);
    Ok(written)
}
