//! Python bindings. Reports and audits cross the boundary as JSON text.

use std::collections::BTreeSet;
use std::path::PathBuf;

use num_bigint::BigUint;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use kgprofile::ingest::{load_dataset, DatasetManifest};
use kgprofile::leakage::{audit_json, audit_splits};
use kgprofile::metapaths::{count_walks_exact, MetapathConfig};
use kgprofile::metrics::summarize;
use kgprofile::relations::{classify_cardinality, MiningConfig};
use kgprofile::report::analyze;
use kgprofile::{Error, LabeledTriple, Split};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_split(split: &str) -> PyResult<Split> {
    split.parse().map_err(PyValueError::new_err)
}

fn mining(confidence: f64, min_support: u64, join_cap: u64, seed: u64) -> MiningConfig {
    MiningConfig {
        confidence_threshold: confidence,
        min_support,
        composite_join_cap: join_cap,
        sample_seed: seed,
    }
}

/// An immutable, indexed set of labelled triples.
#[pyclass(frozen, module = "kgprofile_py")]
struct TripleStore {
    inner: kgprofile::TripleStore,
}

#[pymethods]
impl TripleStore {
    /// Builds a store from `(head, relation, tail)` or
    /// `(head, relation, tail, split)` tuples.
    #[staticmethod]
    #[pyo3(signature = (triples, split = "unsplit"))]
    fn from_triples(triples: Vec<Bound<'_, PyAny>>, split: &str) -> PyResult<Self> {
        let default = parse_split(split)?;
        let mut labeled = Vec::with_capacity(triples.len());
        for item in triples {
            let t = if let Ok((h, r, t)) = item.extract::<(String, String, String)>() {
                LabeledTriple::new(&h, &r, &t, default)
            } else {
                let (h, r, t, s) = item.extract::<(String, String, String, String)>()?;
                LabeledTriple::new(&h, &r, &t, parse_split(&s)?)
            };
            labeled.push(t);
        }
        let inner = kgprofile::TripleStore::from_labeled(labeled).map_err(to_py)?;
        Ok(TripleStore { inner })
    }

    /// Loads a TOML manifest, or a single TSV file as one unsplit dataset.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let manifest = if path.extension().is_some_and(|e| e == "toml") {
            DatasetManifest::from_path(&path).map_err(to_py)?
        } else {
            DatasetManifest::unsplit("dataset", &path)
        };
        let inner = load_dataset(&manifest).map_err(to_py)?;
        Ok(TripleStore { inner })
    }

    #[getter]
    fn num_entities(&self) -> usize {
        self.inner.num_entities()
    }

    #[getter]
    fn num_relations(&self) -> usize {
        self.inner.num_relations()
    }

    /// Distinct triples.
    #[getter]
    fn num_triples(&self) -> usize {
        self.inner.num_triples()
    }

    fn contains(&self, head: &str, relation: &str, tail: &str) -> bool {
        let v = self.inner.vocabulary();
        match (v.entity_id(head), v.relation_id(relation), v.entity_id(tail)) {
            (Some(h), Some(r), Some(t)) => self.inner.contains_unchecked(&kgprofile::Triple::new(h, r, t)),
            _ => false,
        }
    }

    fn split_view(&self, split: &str) -> PyResult<Self> {
        let inner = self.inner.split_view(parse_split(split)?).map_err(to_py)?;
        Ok(TripleStore { inner })
    }

    /// Graph summary as JSON.
    fn summary_json(&self) -> String {
        serde_json::to_string(&summarize(&self.inner)).expect("summary serializes")
    }

    /// Relation label to cardinality class.
    #[pyo3(signature = (confidence = 0.95, min_support = 1))]
    fn cardinality(&self, confidence: f64, min_support: u64) -> PyResult<Vec<(String, String)>> {
        let cfg = mining(confidence, min_support, 10_000_000, 42);
        cfg.validate().map_err(to_py)?;
        Ok(classify_cardinality(&self.inner, &cfg)
            .into_iter()
            .map(|(r, c)| (self.inner.relation_label(r).to_owned(), c.to_string()))
            .collect())
    }

    /// Number of directed walks with `length` edges starting at `entity`.
    fn count_walks(&self, entity: &str, length: usize) -> PyResult<BigUint> {
        let e = self
            .inner
            .vocabulary()
            .entity_id(entity)
            .ok_or_else(|| PyValueError::new_err(format!("unknown entity {entity:?}")))?;
        count_walks_exact(&self.inner, e, length).map_err(to_py)
    }

    /// Full profile report as JSON, timings included.
    #[pyo3(signature = (
        name = "dataset",
        confidence = 0.95,
        min_support = 1,
        join_cap = 10_000_000,
        metapath_samples = 3,
        metapath_lengths = vec![2, 3, 4],
        seed = 42,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn analyze_json(
        &self,
        py: Python<'_>,
        name: &str,
        confidence: f64,
        min_support: u64,
        join_cap: u64,
        metapath_samples: usize,
        metapath_lengths: Vec<usize>,
        seed: u64,
    ) -> PyResult<String> {
        let cfg = mining(confidence, min_support, join_cap, seed);
        let paths = MetapathConfig {
            lengths: metapath_lengths.into_iter().collect::<BTreeSet<_>>(),
            num_samples: metapath_samples,
            seed,
        };
        let report = py
            .detach(|| analyze(&self.inner, name, &cfg, &paths, None))
            .map_err(to_py)?;
        Ok(report.to_json())
    }

    /// Train/test leakage audit as JSON.
    #[pyo3(signature = (confidence = 0.95, min_support = 1))]
    fn audit_leakage_json(&self, py: Python<'_>, confidence: f64, min_support: u64) -> PyResult<String> {
        let cfg = mining(confidence, min_support, 10_000_000, 42);
        let outcome = py.detach(|| audit_splits(&self.inner, &cfg)).map_err(to_py)?;
        Ok(audit_json(&self.inner, &outcome).to_string())
    }

    fn __len__(&self) -> usize {
        self.inner.num_triples()
    }

    fn __repr__(&self) -> String {
        format!(
            "TripleStore(entities={}, relations={}, triples={})",
            self.inner.num_entities(),
            self.inner.num_relations(),
            self.inner.num_triples()
        )
    }
}

#[pymodule]
fn kgprofile_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TripleStore>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
