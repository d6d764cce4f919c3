//! Structural profiling for knowledge-graph link-prediction datasets.
//!
//! Load a dataset into a [`TripleStore`], then run any of the analyses:
//! [`metrics`] for counts, degrees and density, [`relations`] for cardinality
//! and relation patterns, [`metapaths`] for walk counts, and [`leakage`] for
//! train/test leakage audits. [`report::analyze`] runs everything at once.

pub mod error;
pub mod ingest;
pub mod leakage;
pub mod metapaths;
pub mod metrics;
pub mod relations;
pub mod report;
pub mod store;

pub use error::{Error, Result};
pub use ingest::{load_dataset, DatasetManifest, ParseError};
pub use metapaths::MetapathConfig;
pub use relations::MiningConfig;
pub use report::{analyze, ProfileReport};
pub use store::{EntityId, LabeledTriple, RelationId, Split, Triple, TripleStore};
