//! Triple files and dataset manifests.
//!
//! A triple file holds one `head<TAB>relation<TAB>tail` record per line,
//! UTF-8, LF or CRLF terminated. Blank lines are skipped; there is no comment
//! syntax. Files ending in `.gz` are decompressed on the fly.
//!
//! A manifest is a TOML document:
//!
//! ```toml
//! name = "nations"
//! format = "tsv"
//!
//! [[files]]
//! path = "train.txt"   # relative to the manifest's directory
//! split = "train"      # train | valid | test | unsplit
//! ```

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{LabeledTriple, Split, StoreBuilder, TripleStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    WrongArity { fields: usize },
    EmptyField,
    Encoding,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::WrongArity { fields } => {
                write!(f, "expected 3 tab-separated fields, found {fields}")
            }
            ParseErrorKind::EmptyField => f.write_str("empty field"),
            ParseErrorKind::Encoding => f.write_str("invalid UTF-8"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{path}:{line_number}: {kind}")]
pub struct ParseError {
    pub path: String,
    /// 1-based physical line.
    pub line_number: u64,
    pub kind: ParseErrorKind,
}

/// Streams the records of a triple file into `sink`. Stops at the first
/// malformed line.
pub fn for_each_record<R, F>(mut reader: R, path: &str, mut sink: F) -> Result<()>
where
    R: BufRead,
    F: FnMut(&str, &str, &str),
{
    let mut buf = Vec::with_capacity(256);
    let mut line_number = 0u64;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Ok(());
        }
        line_number += 1;
        let mut line: &[u8] = &buf;
        if let Some(rest) = line.strip_suffix(b"\n") {
            line = rest;
        }
        if let Some(rest) = line.strip_suffix(b"\r") {
            line = rest;
        }
        if line.is_empty() {
            continue;
        }
        let err = |kind| {
            Error::Parse(ParseError {
                path: path.to_owned(),
                line_number,
                kind,
            })
        };
        let text = std::str::from_utf8(line).map_err(|_| err(ParseErrorKind::Encoding))?;
        let mut fields = text.split('\t');
        let (Some(h), Some(r), Some(t), None) = (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(err(ParseErrorKind::WrongArity {
                fields: text.split('\t').count(),
            }));
        };
        if h.is_empty() || r.is_empty() || t.is_empty() {
            return Err(err(ParseErrorKind::EmptyField));
        }
        sink(h, r, t);
    }
}

/// Parses a whole triple stream, tagging every record with `split`.
pub fn parse_tsv<R: Read>(stream: R, split: Split) -> Result<Vec<LabeledTriple>> {
    let mut out = Vec::new();
    for_each_record(BufReader::new(stream), "<stream>", |h, r, t| {
        out.push(LabeledTriple::new(h, r, t, split))
    })?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Tsv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: PathBuf,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default)]
    pub format: Format,
    pub files: Vec<ManifestFile>,
}

impl DatasetManifest {
    /// Reads a TOML manifest; relative file paths are resolved against the
    /// manifest's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for f in &mut manifest.files {
            if f.path.is_relative() {
                f.path = base.join(&f.path);
            }
        }
        manifest.validate().map_err(|message| Error::Manifest {
            path: path.to_owned(),
            message,
        })?;
        Ok(manifest)
    }

    /// Manifest for a single file with no split information.
    pub fn unsplit(name: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            name: name.into(),
            format: Format::Tsv,
            files: vec![ManifestFile {
                path: path.into(),
                split: Split::Unsplit,
            }],
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.files.is_empty() {
            return Err("manifest lists no files".into());
        }
        for split in [Split::Train, Split::Valid, Split::Test] {
            if self.files.iter().filter(|f| f.split == split).count() > 1 {
                return Err(format!("split {split} is listed more than once"));
            }
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|ext| ext == "gz") {
        Ok(Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
    }
}

/// Parses every file of the manifest, in manifest order, into one store.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<TripleStore> {
    manifest.validate().map_err(|message| Error::Manifest {
        path: PathBuf::from(&manifest.name),
        message,
    })?;
    let mut builder = StoreBuilder::new();
    for file in &manifest.files {
        let reader = open(&file.path)?;
        let path = file.path.display().to_string();
        for_each_record(reader, &path, |h, r, t| builder.push(h, r, t, file.split))?;
    }
    builder.build()
}

/// Writes triples as TSV in the given order.
pub fn write_tsv<'a, W, I>(mut out: W, triples: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
{
    for (h, r, t) in triples {
        writeln!(out, "{h}\t{r}\t{t}")?;
    }
    out.flush()
}
