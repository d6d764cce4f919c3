use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kgprofile::ingest::{load_dataset, DatasetManifest, ManifestFile};
use kgprofile::leakage::{audit_json, audit_splits, deleak, write_removal_manifest, write_split_files, DeleakStrategy};
use kgprofile::metapaths::MetapathConfig;
use kgprofile::relations::MiningConfig;
use kgprofile::report::{analyze, comparison_table, export_plots, write_comparison_csv, PlotOptions, ProfileReport};
use kgprofile::{Error, Split, TripleStore};

#[derive(Parser)]
#[command(name = "kgprofile", version, about = "Structural profiler for knowledge graph datasets")]
struct Cli {
    /// Worker threads; defaults to one per core. Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Profile one dataset and write a JSON report.
    Analyze(AnalyzeArgs),
    /// Tabulate several reports as CSV, one row per dataset.
    Compare(CompareArgs),
    /// Audit evaluation splits for inverse-relation leakage, optionally repairing them.
    Leakage(LeakageArgs),
    /// Write plot-ready CSVs from reports.
    ExportPlots(ExportArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Dataset manifest (.toml) or a single unsplit TSV file.
    #[arg(long, conflicts_with_all = ["train", "valid", "test"])]
    input: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Dataset name; defaults to the manifest name or the file stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct MiningArgs {
    /// Minimum rule confidence for pattern and cardinality flags.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    /// Minimum rule support.
    #[arg(long, default_value_t = 1)]
    min_support: u64,
    /// Composite joins with more paths than this are sampled.
    #[arg(long, default_value_t = 10_000_000)]
    join_cap: u64,
    /// Seed for every sampling step.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl MiningArgs {
    fn config(&self) -> MiningConfig {
        MiningConfig {
            confidence_threshold: self.confidence,
            min_support: self.min_support,
            composite_join_cap: self.join_cap,
            sample_seed: self.seed,
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    mining: MiningArgs,
    /// Restrict the analysis to one split instead of merging all of them.
    #[arg(long)]
    split: Option<Split>,
    #[arg(long, default_value_t = 3)]
    metapath_samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    metapath_lengths: Vec<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write plot CSVs here.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    DropTestTriples,
    DropInverseRelations,
}

impl From<StrategyArg> for DeleakStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::DropTestTriples => DeleakStrategy::DropTestTriples,
            StrategyArg::DropInverseRelations => DeleakStrategy::DropInverseRelations,
        }
    }
}

#[derive(Args)]
struct LeakageArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    mining: MiningArgs,
    /// Audit report path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, requires = "repair_dir")]
    strategy: Option<StrategyArg>,
    /// Directory for repaired split files and removals.tsv.
    #[arg(long, requires = "strategy")]
    repair_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long)]
    csv_dir: PathBuf,
    /// Skip the named dataset; repeatable.
    #[arg(long)]
    exclude_dataset: Vec<String>,
    /// Leave the highest-degree entity out of degree histograms.
    #[arg(long)]
    exclude_top_entity: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidWalkLength => 2,
        _ => 1,
    }
}

fn manifest_for(input: &InputArgs) -> Result<DatasetManifest, Error> {
    let mut manifest = if let Some(path) = &input.input {
        if path.extension().is_some_and(|e| e == "toml") {
            DatasetManifest::from_path(path)?
        } else {
            let stem = path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
            DatasetManifest::unsplit(stem, path)
        }
    } else {
        let files: Vec<ManifestFile> = [(Split::Train, &input.train), (Split::Valid, &input.valid), (Split::Test, &input.test)]
            .into_iter()
            .filter_map(|(split, p)| {
                p.as_ref().map(|path| ManifestFile {
                    path: path.clone(),
                    split,
                })
            })
            .collect();
        if files.is_empty() {
            return Err(Error::InvalidConfig("one of --input or --train/--valid/--test is required".into()));
        }
        let name = files[0]
            .path
            .parent()
            .and_then(Path::file_name)
            .map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
        DatasetManifest {
            name,
            format: Default::default(),
            files,
        }
    };
    if let Some(name) = &input.name {
        manifest.name = name.clone();
    }
    Ok(manifest)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Error> {
    let result = match path {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    };
    result.map_err(|source| Error::Io {
        path: path.unwrap_or(Path::new("<stdout>")).to_owned(),
        source,
    })
}

fn load(manifest: &DatasetManifest) -> Result<(TripleStore, f64), Error> {
    let start = Instant::now();
    let store = load_dataset(manifest)?;
    Ok((store, start.elapsed().as_secs_f64()))
}

fn run_analyze(args: &AnalyzeArgs) -> Result<(), Error> {
    let mining = args.mining.config();
    let metapaths = MetapathConfig {
        lengths: args.metapath_lengths.iter().copied().collect::<BTreeSet<_>>(),
        num_samples: args.metapath_samples,
        seed: args.mining.seed,
    };
    mining.validate()?;
    metapaths.validate()?;
    for w in metapaths.warnings() {
        eprintln!("warning: {w}");
    }
    let manifest = manifest_for(&args.input)?;
    let (store, ingest_secs) = load(&manifest)?;
    let store = match args.split {
        Some(split) => store.split_view(split)?.compact()?,
        None => store,
    };
    let mut report = analyze(&store, &manifest.name, &mining, &metapaths, args.split)?;
    report.timings.insert("ingest".into(), ingest_secs);
    write_output(args.out.as_deref(), &report.to_json())?;
    if let Some(dir) = &args.csv_dir {
        export_plots(std::slice::from_ref(&report), dir, &PlotOptions::default())?;
    }
    Ok(())
}

fn load_reports(paths: &[PathBuf]) -> Result<Vec<ProfileReport>, Error> {
    paths.iter().map(|p| ProfileReport::from_path(p)).collect()
}

fn run_compare(args: &CompareArgs) -> Result<(), Error> {
    let reports = load_reports(&args.reports)?;
    let mut buf = Vec::new();
    let target = args.out.clone().unwrap_or_else(|| "<stdout>".into());
    write_comparison_csv(&comparison_table(&reports), &mut buf).map_err(|e| Error::Io {
        path: target,
        source: std::io::Error::other(e),
    })?;
    write_output(args.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}

fn run_leakage(args: &LeakageArgs) -> Result<(), Error> {
    let mining = args.mining.config();
    mining.validate()?;
    let manifest = manifest_for(&args.input)?;
    let (store, _) = load(&manifest)?;
    let outcome = audit_splits(&store, &mining)?;
    for report in std::iter::once(&outcome.test).chain(outcome.valid.as_ref()) {
        println!(
            "{} leakage rate: {:.4} ({} of {} triples)",
            report.split,
            report.leakage_rate,
            report.leaked_test_triples.len(),
            report.audited
        );
    }
    if let Some(out) = &args.out {
        let mut text = serde_json::to_string_pretty(&audit_json(&store, &outcome)).expect("audit serializes");
        text.push('\n');
        write_output(Some(out), &text)?;
    }
    if let (Some(strategy), Some(dir)) = (args.strategy, &args.repair_dir) {
        let repaired = deleak(&store, strategy.into(), &mining)?;
        let written = write_split_files(&repaired.store, dir)?;
        write_repair_manifest(&manifest.name, &repaired.store, &written, dir)?;
        let path = dir.join("removals.tsv");
        let file = std::fs::File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        write_removal_manifest(&store, &repaired.removals, std::io::BufWriter::new(file))
            .map_err(|e| Error::Io { path: path.clone(), source: e })?;
        println!("removed {} items; repaired splits in {}", repaired.removals.len(), dir.display());
    }
    Ok(())
}

/// Manifest beside the repaired splits so the directory can be re-audited.
fn write_repair_manifest(name: &str, store: &TripleStore, written: &[PathBuf], dir: &Path) -> Result<(), Error> {
    let files = Split::ALL
        .into_iter()
        .filter(|&s| store.has_split(s))
        .zip(written)
        .map(|(split, path)| ManifestFile {
            path: PathBuf::from(path.file_name().expect("split file has a name")),
            split,
        })
        .collect();
    let manifest = DatasetManifest {
        name: name.to_owned(),
        format: Default::default(),
        files,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    let path = dir.join("manifest.toml");
    std::fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
}

fn run_export(args: &ExportArgs) -> Result<(), Error> {
    let reports = load_reports(&args.reports)?;
    let opts = PlotOptions {
        exclude_datasets: args.exclude_dataset.clone(),
        exclude_top_entity: args.exclude_top_entity,
    };
    for path in export_plots(&reports, &args.csv_dir, &opts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global pool configured once");
    }
    let result = match &cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Compare(a) => run_compare(a),
        Command::Leakage(a) => run_leakage(a),
        Command::ExportPlots(a) => run_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
