//! The few-shot protocol: class-floor filtering, seeded k-shot sampling,
//! probe training, holdout scoring, and trial aggregation.
//!
//! Per (task, model, k, trial): drop classes with fewer than k+1 examples,
//! sample exactly k ids per retained class without replacement, train a
//! probe on the sampled embeddings, and score everything held out with
//! one-vs-all ROC-AUC. Trial seeds derive from a stable hash of the cell
//! key, so adding a model or task never perturbs other cells' sampling; in
//! the default paired mode the sampling seed excludes the model, giving
//! every model the same splits.

mod report;

pub use report::{
    emit_report, load_report_json, summary_table, ExperimentReport, ReportCell, ReportError,
    ReportFormat, TrialRecord,
};

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingStore;
use crate::manifest::{class_counts, derive_task_labels, DatasetManifest, TaskSpec};
use crate::metrics::{one_vs_all_auc, AucAveraging, AucResult, MetricsError};
use crate::probe::{predict_proba, train_probe, ProbeError, TrainConfig};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("infeasible at k={k}: only {retained} class(es) have at least k+1 examples")]
    Infeasible { k: usize, retained: usize },
    #[error("class `{class}` has {have} examples; sampling k={k} requires at least {need}")]
    TooFewExamples {
        class: String,
        have: usize,
        k: usize,
        need: usize,
    },
    #[error("task `{0}` is not among the provided task specs")]
    UnknownTask(String),
    #[error("model `{0}` has no provided embedding store")]
    UnknownModel(String),
    #[error("no recordings are present in both the task labels and the store")]
    NoOverlap,
    #[error("invalid experiment config: {0}")]
    BadConfig(String),
    #[error("failed to read config {path}: {message}")]
    ConfigFile { path: String, message: String },
    #[error("label class `{0}` is absent from the score columns")]
    ClassNotScored(String),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Manifest(#[from] crate::manifest::ManifestError),
}

/// Whether every model sees the same train/holdout split for a given
/// (task, k, trial), or each model resamples independently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    #[default]
    Paired,
    Independent,
}

/// Experiment-level settings; the JSON config file mirrors these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Task ids to evaluate; empty means every provided task.
    #[serde(default)]
    pub tasks: Vec<String>,
    /// Model names to evaluate; empty means every provided store.
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub auc_averaging: AucAveraging,
    #[serde(default)]
    pub pairing: Pairing,
}

fn default_k_values() -> Vec<usize> {
    vec![4, 8, 16, 32]
}

fn default_trials() -> usize {
    5
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k_values: default_k_values(),
            trials: default_trials(),
            master_seed: 0,
            tasks: Vec::new(),
            models: Vec::new(),
            train: TrainConfig::default(),
            auc_averaging: AucAveraging::default(),
            pairing: Pairing::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.k_values.is_empty() {
            return Err(ExperimentError::BadConfig("k_values is empty".into()));
        }
        if self.k_values.iter().any(|&k| k == 0) {
            return Err(ExperimentError::BadConfig("k values must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(ExperimentError::BadConfig("trials must be >= 1".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ExperimentError> {
        let path_str = path.as_ref().display().to_string();
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| ExperimentError::ConfigFile {
                path: path_str.clone(),
                message: e.to_string(),
            })?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| ExperimentError::ConfigFile {
                path: path_str,
                message: e.to_string(),
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), ExperimentError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path.as_ref(), text).map_err(|e| ExperimentError::ConfigFile {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Identity of one trial within the experiment grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialKey {
    pub task: String,
    pub model: String,
    pub k: usize,
    pub trial: usize,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    #[serde(flatten)]
    pub key: TrialKey,
    pub auc: AucResult,
    pub retained_classes: Vec<String>,
    pub dropped_classes: Vec<String>,
}

/// FNV-1a over length-prefixed byte parts: a stable 64-bit hash that will
/// never change underneath persisted seeds.
pub fn stable_hash(parts: &[&[u8]]) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut hash = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(PRIME);
        }
    };
    for part in parts {
        eat(&(part.len() as u64).to_le_bytes());
        eat(part);
    }
    hash
}

/// Seed for one cell's sampling. Paired mode omits the model so all models
/// share splits for a given (task, k, trial).
pub fn split_seed(
    master_seed: u64,
    task: &str,
    model: &str,
    k: usize,
    trial: usize,
    pairing: Pairing,
) -> u64 {
    let model_part: &[u8] = match pairing {
        Pairing::Paired => b"",
        Pairing::Independent => model.as_bytes(),
    };
    stable_hash(&[
        b"split",
        &master_seed.to_le_bytes(),
        task.as_bytes(),
        model_part,
        &(k as u64).to_le_bytes(),
        &(trial as u64).to_le_bytes(),
    ])
}

/// Splits class counts into (retained, dropped) around the k+1 floor:
/// a class needs at least k+1 recording-level embeddings to give k training
/// examples plus a non-empty holdout. Fewer than two retained classes makes
/// the cell infeasible.
pub fn apply_class_floor(
    counts: &BTreeMap<String, usize>,
    k: usize,
) -> Result<(Vec<String>, Vec<String>), ExperimentError> {
    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    for (class, &count) in counts {
        if count >= k + 1 {
            retained.push(class.clone());
        } else {
            dropped.push(class.clone());
        }
    }
    if retained.len() < 2 {
        return Err(ExperimentError::Infeasible {
            k,
            retained: retained.len(),
        });
    }
    Ok((retained, dropped))
}

fn sample_indices_without_replacement(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(k);
    indices
}

/// Draws exactly k ids per class uniformly without replacement; the holdout
/// is everything else. Deterministic in `seed` and independent of input
/// ordering (classes and ids are processed sorted).
pub fn sample_few_shot(
    examples_by_class: &BTreeMap<String, Vec<String>>,
    k: usize,
    seed: u64,
) -> Result<(BTreeSet<String>, BTreeSet<String>), ExperimentError> {
    let mut train = BTreeSet::new();
    let mut holdout = BTreeSet::new();
    for (class, ids) in examples_by_class {
        if ids.len() < k + 1 {
            return Err(ExperimentError::TooFewExamples {
                class: class.clone(),
                have: ids.len(),
                k,
                need: k + 1,
            });
        }
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort();
        sorted.dedup();
        let class_seed = stable_hash(&[b"class", &seed.to_le_bytes(), class.as_bytes()]);
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed);
        let chosen: BTreeSet<usize> =
            sample_indices_without_replacement(&mut rng, sorted.len(), k)
                .into_iter()
                .collect();
        for (i, id) in sorted.into_iter().enumerate() {
            if chosen.contains(&i) {
                train.insert(id.clone());
            } else {
                holdout.insert(id.clone());
            }
        }
    }
    Ok((train, holdout))
}

fn matrix_for_ids(
    store: &EmbeddingStore,
    ids: &BTreeSet<String>,
    label_of: &BTreeMap<&str, &str>,
    class_index: &BTreeMap<&str, usize>,
) -> (DMatrix<f64>, Vec<usize>) {
    let dim = store.dim();
    let mut rows = Vec::with_capacity(ids.len() * dim);
    let mut y = Vec::with_capacity(ids.len());
    for id in ids {
        let entry = store.get(id).expect("id filtered against store");
        rows.extend(entry.vector.iter().map(|&v| v as f64));
        y.push(class_index[label_of[id.as_str()]]);
    }
    (DMatrix::from_row_slice(ids.len(), dim, &rows), y)
}

/// Runs one trial: floor, sample, train, predict, score. Deterministic
/// given the split seed; insensitive to store insertion order.
pub fn run_trial(
    key: &TrialKey,
    store: &EmbeddingStore,
    task_labels: &[(String, String)],
    split_seed: u64,
    train_config: &TrainConfig,
    averaging: AucAveraging,
) -> Result<TrialResult, ExperimentError> {
    // Only recordings present in both the labels and the store participate.
    let labeled: Vec<(String, String)> = task_labels
        .iter()
        .filter(|(id, _)| store.contains(id))
        .cloned()
        .collect();
    let skipped = task_labels.len() - labeled.len();
    if skipped > 0 {
        log::warn!(
            "{skipped} labeled recording(s) missing from store for task `{}`",
            key.task
        );
    }
    if labeled.is_empty() {
        return Err(ExperimentError::NoOverlap);
    }
    if let Some((id, _)) = labeled
        .iter()
        .find(|(id, _)| !store.get(id).map(|e| e.normalized).unwrap_or(false))
    {
        log::warn!("store entry `{id}` is not normalized; AUCs may be affected");
    }

    let counts = class_counts(&labeled);
    let (retained, dropped) = apply_class_floor(&counts, key.k)?;
    let retained_set: BTreeSet<&str> = retained.iter().map(String::as_str).collect();

    let mut examples_by_class: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (id, label) in &labeled {
        if retained_set.contains(label.as_str()) {
            examples_by_class
                .entry(label.clone())
                .or_default()
                .push(id.clone());
        }
    }
    let (train_ids, holdout_ids) = sample_few_shot(&examples_by_class, key.k, split_seed)?;

    let label_of: BTreeMap<&str, &str> = labeled
        .iter()
        .map(|(id, label)| (id.as_str(), label.as_str()))
        .collect();
    let class_index: BTreeMap<&str, usize> = retained
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();

    let (x_train, y_train) = matrix_for_ids(store, &train_ids, &label_of, &class_index);
    let (x_holdout, y_holdout) = matrix_for_ids(store, &holdout_ids, &label_of, &class_index);

    let probe = train_probe(&x_train, &y_train, &retained, train_config)?;
    let probabilities = predict_proba(&probe, &x_holdout)?;
    let auc = one_vs_all_auc(&probabilities, &y_holdout, &retained, averaging)?;

    Ok(TrialResult {
        key: key.clone(),
        auc,
        retained_classes: retained,
        dropped_classes: dropped,
    })
}

/// Runs the full grid (tasks x models x k x trials) and aggregates per-cell
/// means and standard deviations. Infeasible or failed cells are recorded
/// with a reason instead of aborting the run. Cells and trials execute in
/// parallel under the ambient rayon pool; results are reduced in a fixed
/// order so the report is identical regardless of thread count.
pub fn run_experiment(
    config: &ExperimentConfig,
    stores: &BTreeMap<String, EmbeddingStore>,
    manifest: &DatasetManifest,
    tasks: &BTreeMap<String, TaskSpec>,
) -> Result<ExperimentReport, ExperimentError> {
    config.validate()?;
    if stores.is_empty() {
        return Err(ExperimentError::BadConfig("no embedding stores".into()));
    }
    if tasks.is_empty() {
        return Err(ExperimentError::BadConfig("no task specs".into()));
    }

    let task_ids: Vec<String> = if config.tasks.is_empty() {
        tasks.keys().cloned().collect()
    } else {
        for id in &config.tasks {
            if !tasks.contains_key(id) {
                return Err(ExperimentError::UnknownTask(id.clone()));
            }
        }
        config.tasks.clone()
    };
    let model_names: Vec<String> = if config.models.is_empty() {
        stores.keys().cloned().collect()
    } else {
        for name in &config.models {
            if !stores.contains_key(name) {
                return Err(ExperimentError::UnknownModel(name.clone()));
            }
        }
        config.models.clone()
    };

    let mut labels_by_task: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for id in &task_ids {
        labels_by_task.insert(id.clone(), derive_task_labels(manifest, &tasks[id])?);
    }

    let mut jobs: Vec<TrialKey> = Vec::new();
    for task in &task_ids {
        for model in &model_names {
            for &k in &config.k_values {
                for trial in 0..config.trials {
                    jobs.push(TrialKey {
                        task: task.clone(),
                        model: model.clone(),
                        k,
                        trial,
                    });
                }
            }
        }
    }

    let outcomes: Vec<(TrialKey, Result<TrialResult, ExperimentError>)> = jobs
        .into_par_iter()
        .map(|key| {
            let seed = split_seed(
                config.master_seed,
                &key.task,
                &key.model,
                key.k,
                key.trial,
                config.pairing,
            );
            let result = run_trial(
                &key,
                &stores[&key.model],
                &labels_by_task[&key.task],
                seed,
                &config.train,
                config.auc_averaging,
            );
            (key, result)
        })
        .collect();

    let mut grouped: BTreeMap<(String, String, usize), Vec<(usize, Result<TrialResult, ExperimentError>)>> =
        BTreeMap::new();
    for (key, outcome) in outcomes {
        grouped
            .entry((key.task.clone(), key.model.clone(), key.k))
            .or_default()
            .push((key.trial, outcome));
    }

    let mut cells = Vec::new();
    for ((task, model, k), mut trials) in grouped {
        trials.sort_by_key(|(trial, _)| *trial);
        let mut records = Vec::new();
        let mut dropped_classes = Vec::new();
        let mut failure: Option<String> = None;
        for (trial, outcome) in trials {
            match outcome {
                Ok(result) => {
                    dropped_classes = result.dropped_classes.clone();
                    records.push(TrialRecord {
                        trial,
                        auc_macro: result.auc.macro_auc,
                        per_class: result.auc.per_class.clone(),
                    });
                }
                Err(e) => {
                    failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        cells.push(ReportCell::from_trials(
            task,
            model,
            k,
            records,
            dropped_classes,
            failure,
        ));
    }

    Ok(ExperimentReport {
        master_seed: config.master_seed,
        auc_averaging: config.auc_averaging,
        cells,
    })
}

/// Scores a model's own classifier head directly (no probe training): the
/// off-the-shelf evaluation path. Score columns follow `score_classes`;
/// every observed label must be among them.
pub fn score_pretrained(
    scores: &DMatrix<f64>,
    score_classes: &[String],
    labels: &[String],
    averaging: AucAveraging,
) -> Result<AucResult, ExperimentError> {
    let class_index: BTreeMap<&str, usize> = score_classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut indices = Vec::with_capacity(labels.len());
    for label in labels {
        match class_index.get(label.as_str()) {
            Some(&i) => indices.push(i),
            None => return Err(ExperimentError::ClassNotScored(label.clone())),
        }
    }
    Ok(one_vs_all_auc(scores, &indices, score_classes, averaging)?)
}
