//! Command-line wiring: manifests, providers, stores, experiments, and
//! visualization as reproducible subcommands.
//!
//! Exit codes: 0 on success, 1 on user error (bad flags, malformed inputs,
//! infeasible requests), 2 on internal failure (unexpected I/O problems).
//! Every data-producing run writes a `run.json` provenance record with the
//! invocation parameters and SHA-256 digests of its inputs; records carry
//! no timestamps, so reruns with identical inputs produce identical bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::audio::{read_wav, resample, ModelSpec};
use crate::embedding::{
    embed_recording, read_window_file, store_read, store_write, EmbeddingProvider,
    EmbeddingStore, PrecomputedProvider, ProviderConcurrency, SyntheticProvider,
};
use crate::experiment::{
    emit_report, load_report_json, run_experiment, summary_table, ExperimentConfig, ReportFormat,
};
use crate::manifest::{
    class_counts, derive_task_labels, load_manifest, DatasetManifest, TaskSpec,
};
use crate::viz::{
    emit_scatter, pca_fit, pca_transform, tsne_affinities, tsne_embed, write_coords_csv,
    TsneConfig,
};

#[derive(Debug)]
pub enum CliError {
    /// Caller-correctable: malformed input, missing file, infeasible ask.
    User(String),
    /// Unexpected failure writing outputs or an internal invariant breach.
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::User(msg) => write!(f, "{msg}"),
            CliError::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

macro_rules! user_error_from {
    ($($ty:ty),+) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::User(e.to_string())
            }
        })+
    };
}

user_error_from!(
    crate::manifest::ManifestError,
    crate::audio::AudioError,
    crate::embedding::EmbeddingError,
    crate::embedding::StoreError,
    crate::experiment::ExperimentError,
    crate::viz::VizError,
    crate::probe::ProbeError
);

impl From<crate::experiment::ReportError> for CliError {
    fn from(e: crate::experiment::ReportError) -> Self {
        match e {
            crate::experiment::ReportError::Io { .. } => CliError::Internal(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bioprobe",
    version,
    about = "Few-shot linear-probe evaluation for bioacoustic embeddings"
)]
struct Cli {
    /// Worker threads for parallel stages; 1 runs fully serial and any
    /// value produces identical outputs.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a manifest (and optionally a task spec) and print counts.
    ManifestValidate {
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        #[arg(long)]
        task: Option<PathBuf>,
    },
    /// Embed every manifest recording and write an embedding store.
    Embed {
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        /// Model spec JSON (name, sample_rate_hz, window_s, embedding_dim,
        /// output_layout).
        #[arg(long = "model-spec")]
        model_spec: PathBuf,
        /// `synthetic:<seed>` or `precomputed:<window-file>`.
        #[arg(long)]
        provider: String,
        /// Output store path.
        #[arg(long)]
        store: PathBuf,
    },
    /// Run the few-shot probe evaluation grid and write reports.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        #[arg(long, required = true)]
        task: Vec<PathBuf>,
        /// Embedding store per model as `name=path`; repeatable.
        #[arg(long, required = true)]
        store: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a model's own classifier outputs (no probe training).
    ScorePretrained {
        /// CSV with header `recording_id,<class>,...` and one score row per
        /// recording.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compress a store with PCA, run t-SNE, and emit coordinates + SVG.
    Tsne {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        #[arg(long)]
        task: PathBuf,
        /// Output prefix: writes `<out>.csv`, `<out>.svg`, `<out>.run.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
    },
    /// Re-emit a JSON report as CSV or JSON.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses and executes a full command line (including `argv[0]`), returning
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return 1;
    }

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("internal error: could not build thread pool: {e}");
            return 2;
        }
    };

    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(CliError::User(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::ManifestValidate { manifest, task } => cmd_manifest_validate(&manifest, task),
        Command::Embed {
            manifest,
            model_spec,
            provider,
            store,
        } => cmd_embed(&manifest, &model_spec, &provider, &store),
        Command::Eval {
            config,
            manifest,
            task,
            store,
            out,
            seed,
        } => cmd_eval(&config, &manifest, &task, &store, &out, seed),
        Command::ScorePretrained {
            scores,
            manifest,
            task,
            out,
        } => cmd_score_pretrained(&scores, &manifest, &task, &out),
        Command::Tsne {
            store,
            manifest,
            task,
            out,
            seed,
            perplexity,
            iterations,
        } => cmd_tsne(&store, &manifest, &task, &out, seed, perplexity, iterations),
        Command::Report {
            report,
            format,
            out,
        } => cmd_report(&report, format, &out),
    }
}

/// Loads one or more manifests, resolving relative audio paths against each
/// manifest's parent directory, and merges them.
fn load_manifests(paths: &[PathBuf]) -> Result<DatasetManifest, CliError> {
    let mut parts = Vec::new();
    for path in paths {
        let mut manifest = load_manifest(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for rec in &mut manifest.recordings {
            let uri = Path::new(&rec.audio_uri);
            if uri.is_relative() {
                rec.audio_uri = base.join(uri).display().to_string();
            }
        }
        parts.push(manifest);
    }
    Ok(DatasetManifest::merge(parts)?)
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunRecord {
    command: String,
    parameters: BTreeMap<String, serde_json::Value>,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn write_run_record(
    path: &Path,
    command: &str,
    parameters: BTreeMap<String, serde_json::Value>,
    inputs: &[&Path],
    outputs: &[&Path],
) -> Result<(), CliError> {
    let mut digests = Vec::new();
    for input in inputs {
        digests.push(InputDigest {
            path: input.display().to_string(),
            sha256: sha256_file(input)?,
        });
    }
    let record = RunRecord {
        command: command.to_string(),
        parameters,
        inputs: digests,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    let text = serde_json::to_string_pretty(&record).expect("run record serializes");
    std::fs::write(path, text)
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))
}

fn json_param(value: impl Serialize) -> serde_json::Value {
    serde_json::to_value(value).expect("parameter serializes")
}

fn cmd_manifest_validate(
    manifest_paths: &[PathBuf],
    task_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let manifest = load_manifests(manifest_paths)?;
    println!(
        "manifest `{}`: {} recordings",
        manifest.dataset_id,
        manifest.len()
    );
    let raw_counts = {
        let pairs: Vec<(String, String)> = manifest
            .recordings
            .iter()
            .map(|r| (r.recording_id.clone(), r.raw_label.clone()))
            .collect();
        class_counts(&pairs)
    };
    println!("raw labels: {}", raw_counts.len());
    for (label, count) in &raw_counts {
        println!("  {label}: {count}");
    }
    if let Some(task_path) = task_path {
        let task = TaskSpec::load(&task_path)?;
        let labels = derive_task_labels(&manifest, &task)?;
        let counts = class_counts(&labels);
        println!(
            "task `{}`: {} recordings retained, {} dropped",
            task.task_id,
            labels.len(),
            manifest.len() - labels.len()
        );
        for (label, count) in &counts {
            println!("  {label}: {count}");
        }
    }
    Ok(())
}

fn parse_provider(spec: &str, model: &ModelSpec) -> Result<Box<dyn EmbeddingProvider>, CliError> {
    match spec.split_once(':') {
        Some(("synthetic", seed)) => {
            let seed: u64 = seed
                .parse()
                .map_err(|_| CliError::User(format!("invalid synthetic seed `{seed}`")))?;
            Ok(Box::new(SyntheticProvider::new(model.clone(), seed)))
        }
        Some(("precomputed", path)) => {
            let (dim, entries) = read_window_file(path)?;
            if dim != model.embedding_dim {
                return Err(CliError::User(format!(
                    "precomputed file has dimension {dim}, model `{}` expects {}",
                    model.name, model.embedding_dim
                )));
            }
            Ok(Box::new(PrecomputedProvider::new(model.clone(), entries)))
        }
        _ => Err(CliError::User(format!(
            "invalid provider `{spec}` (expected `synthetic:<seed>` or `precomputed:<file>`)"
        ))),
    }
}

fn cmd_embed(
    manifest_paths: &[PathBuf],
    model_spec_path: &Path,
    provider_spec: &str,
    store_path: &Path,
) -> Result<(), CliError> {
    let manifest = load_manifests(manifest_paths)?;
    let model = ModelSpec::load(model_spec_path)?;
    let provider = parse_provider(provider_spec, &model)?;

    let embed_one = |rec: &crate::manifest::LabeledRecording| {
        let clip = read_wav(&rec.audio_uri)?;
        let clip = resample(&clip, model.sample_rate_hz)?;
        let embedding = embed_recording(provider.as_ref(), &rec.recording_id, &clip)?;
        Ok::<_, CliError>(embedding)
    };

    log::info!(
        "embedding {} recordings with model `{}`",
        manifest.len(),
        model.name
    );
    let results: Vec<(String, Result<crate::embedding::RecordingEmbedding, CliError>)> =
        if provider.concurrency() == ProviderConcurrency::Concurrent {
            manifest
                .recordings
                .par_iter()
                .map(|rec| (rec.recording_id.clone(), embed_one(rec)))
                .collect()
        } else {
            manifest
                .recordings
                .iter()
                .map(|rec| (rec.recording_id.clone(), embed_one(rec)))
                .collect()
        };

    let mut store = EmbeddingStore::new(model.embedding_dim);
    let mut failures: Vec<(String, String)> = Vec::new();
    for (id, result) in results {
        match result {
            Ok(embedding) => store.insert(embedding)?,
            Err(e) => failures.push((id, e.to_string())),
        }
    }

    if store.is_empty() {
        return Err(CliError::User(format!(
            "all {} recordings failed to embed; first failure: {}",
            manifest.len(),
            failures
                .first()
                .map(|(id, e)| format!("{id}: {e}"))
                .unwrap_or_default()
        )));
    }

    store_write(store_path, &store)?;
    log::info!(
        "wrote {} embeddings (dim {}) to {}",
        store.len(),
        store.dim(),
        store_path.display()
    );
    if !failures.is_empty() {
        eprintln!("{} recording(s) failed:", failures.len());
        for (id, error) in &failures {
            eprintln!("  {id}: {error}");
        }
    }

    let mut parameters = BTreeMap::new();
    parameters.insert("model".to_string(), json_param(&model));
    parameters.insert("provider".to_string(), json_param(provider_spec));
    parameters.insert("embedded".to_string(), json_param(store.len()));
    parameters.insert(
        "failures".to_string(),
        json_param(
            failures
                .iter()
                .map(|(id, e)| format!("{id}: {e}"))
                .collect::<Vec<_>>(),
        ),
    );
    let mut inputs: Vec<&Path> = manifest_paths.iter().map(PathBuf::as_path).collect();
    inputs.push(model_spec_path);
    let run_path = sibling_run_record_path(store_path);
    write_run_record(&run_path, "embed", parameters, &inputs, &[store_path])?;
    Ok(())
}

fn sibling_run_record_path(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".run.json");
    output.with_file_name(name)
}

fn parse_store_binding(binding: &str) -> Result<(String, PathBuf), CliError> {
    match binding.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(CliError::User(format!(
            "invalid --store binding `{binding}` (expected `name=path`)"
        ))),
    }
}

fn cmd_eval(
    config_path: &Path,
    manifest_paths: &[PathBuf],
    task_paths: &[PathBuf],
    store_bindings: &[String],
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        config.master_seed = seed;
    }

    let manifest = load_manifests(manifest_paths)?;
    let mut tasks = BTreeMap::new();
    for path in task_paths {
        let task = TaskSpec::load(path)?;
        tasks.insert(task.task_id.clone(), task);
    }
    let mut stores = BTreeMap::new();
    let mut store_paths = Vec::new();
    for binding in store_bindings {
        let (name, path) = parse_store_binding(binding)?;
        stores.insert(name, store_read(&path)?);
        store_paths.push(path);
    }

    let report = run_experiment(&config, &stores, &manifest, &tasks)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Internal(format!("creating {}: {e}", out_dir.display())))?;
    let mut written = emit_report(&report, ReportFormat::Csv, out_dir)?;
    written.extend(emit_report(&report, ReportFormat::Json, out_dir)?);

    print!("{}", summary_table(&report));
    let succeeded = report
        .cells
        .iter()
        .filter(|c| c.auc_macro_mean.is_some())
        .count();
    let infeasible: Vec<&crate::experiment::ReportCell> = report
        .cells
        .iter()
        .filter(|c| c.infeasible.is_some())
        .collect();
    for cell in &infeasible {
        eprintln!(
            "cell ({}, {}, k={}) skipped: {}",
            cell.task,
            cell.model,
            cell.k,
            cell.infeasible.as_deref().unwrap_or("unknown")
        );
    }

    let mut parameters = BTreeMap::new();
    parameters.insert("config".to_string(), json_param(&config));
    let mut inputs: Vec<&Path> = vec![config_path];
    inputs.extend(manifest_paths.iter().map(PathBuf::as_path));
    inputs.extend(task_paths.iter().map(PathBuf::as_path));
    inputs.extend(store_paths.iter().map(PathBuf::as_path));
    let output_refs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    write_run_record(
        &out_dir.join("run.json"),
        "eval",
        parameters,
        &inputs,
        &output_refs,
    )?;

    if succeeded == 0 {
        return Err(CliError::User(
            "no evaluation cell succeeded; see the aggregate report for reasons".into(),
        ));
    }
    Ok(())
}

/// Parses a scores CSV: header `recording_id,<class>,...`, one row of f64
/// scores per recording.
fn load_scores_csv(path: &Path) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::User(e.to_string()))?
        .clone();
    let mut columns = headers.iter();
    if columns.next() != Some("recording_id") {
        return Err(CliError::User(format!(
            "{}: first column must be `recording_id`",
            path.display()
        )));
    }
    let classes: Vec<String> = columns.map(str::to_string).collect();
    if classes.len() < 2 {
        return Err(CliError::User(format!(
            "{}: need at least two class columns",
            path.display()
        )));
    }

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::User(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record
            .get(0)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CliError::User(format!("{}:{line}: empty recording_id", path.display())))?;
        let mut row = Vec::with_capacity(classes.len());
        for i in 0..classes.len() {
            let field = record.get(i + 1).unwrap_or("");
            let value: f64 = field.parse().map_err(|_| {
                CliError::User(format!(
                    "{}:{line}: invalid score `{field}`",
                    path.display()
                ))
            })?;
            row.push(value);
        }
        ids.push(id.to_string());
        rows.push(row);
    }
    if ids.is_empty() {
        return Err(CliError::User(format!(
            "{}: no score rows",
            path.display()
        )));
    }
    Ok((ids, classes, rows))
}

fn cmd_score_pretrained(
    scores_path: &Path,
    manifest_paths: &[PathBuf],
    task_path: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    let (ids, classes, rows) = load_scores_csv(scores_path)?;
    let manifest = load_manifests(manifest_paths)?;
    let task = TaskSpec::load(task_path)?;
    let labels = derive_task_labels(&manifest, &task)?;
    let label_of: BTreeMap<&str, &str> = labels
        .iter()
        .map(|(id, label)| (id.as_str(), label.as_str()))
        .collect();

    let mut kept_rows = Vec::new();
    let mut kept_labels = Vec::new();
    let mut skipped = 0usize;
    for (id, row) in ids.iter().zip(&rows) {
        match label_of.get(id.as_str()) {
            Some(label) => {
                kept_rows.push(row.clone());
                kept_labels.push(label.to_string());
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} score row(s) have no task label and were skipped");
    }
    if kept_rows.is_empty() {
        return Err(CliError::User(
            "no score rows overlap the task labels".into(),
        ));
    }

    let flat: Vec<f64> = kept_rows.iter().flatten().copied().collect();
    let matrix = DMatrix::from_row_slice(kept_rows.len(), classes.len(), &flat);
    let result =
        crate::experiment::score_pretrained(&matrix, &classes, &kept_labels, Default::default())?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Internal(format!("creating {}: {e}", out_dir.display())))?;
    let out_path = out_dir.join("pretrained_auc.json");
    let text = serde_json::to_string_pretty(&result).expect("result serializes");
    std::fs::write(&out_path, text)
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", out_path.display())))?;
    println!("macro AUC: {:.4} ({} rows)", result.macro_auc, kept_rows.len());

    let mut parameters = BTreeMap::new();
    parameters.insert("task".to_string(), json_param(&task.task_id));
    parameters.insert("rows".to_string(), json_param(kept_rows.len()));
    let mut inputs: Vec<&Path> = vec![scores_path, task_path];
    inputs.extend(manifest_paths.iter().map(PathBuf::as_path));
    write_run_record(
        &out_dir.join("run.json"),
        "score-pretrained",
        parameters,
        &inputs,
        &[&out_path],
    )?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_tsne(
    store_path: &Path,
    manifest_paths: &[PathBuf],
    task_path: &Path,
    out_prefix: &Path,
    seed: u64,
    perplexity: f64,
    iterations: usize,
) -> Result<(), CliError> {
    let store = store_read(store_path)?;
    let manifest = load_manifests(manifest_paths)?;
    let task = TaskSpec::load(task_path)?;
    let labels = derive_task_labels(&manifest, &task)?;
    let label_of: BTreeMap<&str, &str> = labels
        .iter()
        .map(|(id, label)| (id.as_str(), label.as_str()))
        .collect();

    // Sorted intersection of store entries and labeled recordings.
    let ids: Vec<String> = store
        .ids()
        .filter(|id| label_of.contains_key(id))
        .map(str::to_string)
        .collect();
    if ids.len() < 4 {
        return Err(CliError::User(format!(
            "need at least 4 labeled embeddings for t-SNE, found {}",
            ids.len()
        )));
    }

    let dim = store.dim();
    let mut rows = Vec::with_capacity(ids.len() * dim);
    for id in &ids {
        rows.extend(store.get(id).expect("id from store").vector.iter().map(|&v| v as f64));
    }
    let x = DMatrix::from_row_slice(ids.len(), dim, &rows);

    let out_dim = 32.min(ids.len() - 1).min(dim);
    if out_dim < 32 {
        log::warn!("PCA output clamped to {out_dim} dimensions (N-1 or dim is below 32)");
    }
    let pca = pca_fit(&x, out_dim)?;
    let compressed = pca_transform(&pca, &x)?;

    let affinities = tsne_affinities(&compressed, perplexity)?;
    let config = TsneConfig {
        perplexity,
        iterations,
        seed,
        ..Default::default()
    };
    let embedding = tsne_embed(&affinities, ids.len(), &config)?;
    log::info!(
        "t-SNE finished: KL {:.4} -> {:.4}",
        embedding.kl_initial,
        embedding.kl_final
    );

    let point_labels: Vec<String> = ids.iter().map(|id| label_of[id.as_str()].to_string()).collect();
    let csv_path = out_prefix.with_extension("csv");
    let svg_path = out_prefix.with_extension("svg");
    if let Some(parent) = out_prefix.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Internal(format!("creating {}: {e}", parent.display())))?;
        }
    }
    write_coords_csv(&ids, &embedding.coords, &point_labels, &csv_path)?;
    emit_scatter(&embedding.coords, &point_labels, &svg_path)?;

    let mut parameters = BTreeMap::new();
    parameters.insert("seed".to_string(), json_param(seed));
    parameters.insert("perplexity".to_string(), json_param(perplexity));
    parameters.insert("iterations".to_string(), json_param(iterations));
    parameters.insert("pca_out_dim".to_string(), json_param(out_dim));
    parameters.insert("points".to_string(), json_param(ids.len()));
    let mut inputs: Vec<&Path> = vec![store_path, task_path];
    inputs.extend(manifest_paths.iter().map(PathBuf::as_path));
    write_run_record(
        &sibling_run_record_path(out_prefix),
        "tsne",
        parameters,
        &inputs,
        &[&csv_path, &svg_path],
    )?;
    Ok(())
}

fn cmd_report(report_path: &Path, format: FormatArg, out_dir: &Path) -> Result<(), CliError> {
    let report = load_report_json(report_path)?;
    let format = match format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    let written = emit_report(&report, format, out_dir)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    let parameters = BTreeMap::new();
    let output_refs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    write_run_record(
        &out_dir.join("run.json"),
        "report",
        parameters,
        &[report_path],
        &output_refs,
    )?;
    Ok(())
}
