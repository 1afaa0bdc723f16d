//! Dataset manifests and task label derivation.
//!
//! A manifest is a CSV listing of labeled recordings (id, audio path,
//! duration, raw annotator label). A [`TaskSpec`] maps raw labels onto task
//! labels by first-match-wins rules, which lets one annotation vocabulary
//! serve several classification tasks: merging fine-grained labels (all orca
//! ecotypes into `orca`), dropping uncertain ones, or passing labels through
//! unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Required manifest CSV header, in order.
pub const MANIFEST_HEADER: [&str; 4] = ["recording_id", "audio_uri", "duration_s", "raw_label"];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header `{expected}`, got `{got}`")]
    Header {
        path: String,
        expected: String,
        got: String,
    },
    #[error("{path}:{line}: {message}")]
    Row {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}:{line}: duplicate recording_id `{id}`")]
    DuplicateId {
        path: String,
        line: u64,
        id: String,
    },
    #[error("manifest `{0}` contains no recordings")]
    Empty(String),
    #[error("invalid pattern `{0}`: `*` is only allowed as a trailing wildcard")]
    BadPattern(String),
    #[error("task `{task}` can produce {n} distinct label(s); at least two are required")]
    TooFewLabels { task: String, n: usize },
    #[error("task `{task}`: raw label `{label}` matched no rule (unmatched policy is `error`)")]
    UnmatchedLabel { task: String, label: String },
    #[error("invalid task spec {path}: {message}")]
    BadTaskSpec { path: String, message: String },
}

/// One annotated recording: the unit the few-shot protocol samples over.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub recording_id: String,
    pub audio_uri: String,
    pub duration_s: f64,
    pub raw_label: String,
}

/// An ordered collection of recordings with distinct ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub recordings: Vec<LabeledRecording>,
}

impl DatasetManifest {
    /// Builds a manifest from rows, enforcing the id-uniqueness and
    /// positive-duration invariants.
    pub fn new(
        dataset_id: impl Into<String>,
        recordings: Vec<LabeledRecording>,
    ) -> Result<Self, ManifestError> {
        let dataset_id = dataset_id.into();
        if recordings.is_empty() {
            return Err(ManifestError::Empty(dataset_id));
        }
        let mut seen = BTreeSet::new();
        for (i, rec) in recordings.iter().enumerate() {
            if rec.recording_id.is_empty() {
                return Err(ManifestError::Row {
                    path: dataset_id,
                    line: i as u64 + 2,
                    message: "empty recording_id".into(),
                });
            }
            if !rec.duration_s.is_finite() || rec.duration_s <= 0.0 {
                return Err(ManifestError::Row {
                    path: dataset_id,
                    line: i as u64 + 2,
                    message: format!("duration_s must be > 0, got {}", rec.duration_s),
                });
            }
            if !seen.insert(rec.recording_id.clone()) {
                return Err(ManifestError::DuplicateId {
                    path: dataset_id.clone(),
                    line: i as u64 + 2,
                    id: rec.recording_id.clone(),
                });
            }
        }
        Ok(Self {
            dataset_id,
            recordings,
        })
    }

    /// Merges several manifests into one; recording ids must stay distinct
    /// across all inputs.
    pub fn merge(parts: Vec<DatasetManifest>) -> Result<Self, ManifestError> {
        let dataset_id = parts
            .iter()
            .map(|m| m.dataset_id.as_str())
            .collect::<Vec<_>>()
            .join("+");
        let recordings = parts.into_iter().flat_map(|m| m.recordings).collect();
        Self::new(dataset_id, recordings)
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }
}

/// Loads a manifest CSV (`recording_id,audio_uri,duration_s,raw_label`),
/// preserving row order. Errors carry 1-based line numbers.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, ManifestError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let dataset_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path_str.clone());

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| io_err(&path_str, e))?;

    let headers = reader.headers().map_err(|e| io_err(&path_str, e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != MANIFEST_HEADER {
        return Err(ManifestError::Header {
            path: path_str,
            expected: MANIFEST_HEADER.join(","),
            got: got.join(","),
        });
    }

    let mut recordings = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for result in reader.records() {
        let record = result.map_err(|e| match e.position() {
            Some(pos) => ManifestError::Row {
                path: path_str.clone(),
                line: pos.line(),
                message: e.to_string(),
            },
            None => io_err(&path_str, e),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").to_string();

        let recording_id = field(0);
        if recording_id.is_empty() {
            return Err(ManifestError::Row {
                path: path_str.clone(),
                line,
                message: "empty recording_id".into(),
            });
        }
        if !seen.insert(recording_id.clone()) {
            return Err(ManifestError::DuplicateId {
                path: path_str.clone(),
                line,
                id: recording_id,
            });
        }
        let duration_s: f64 = field(2).parse().map_err(|_| ManifestError::Row {
            path: path_str.clone(),
            line,
            message: format!("invalid duration_s `{}`", field(2)),
        })?;
        if !duration_s.is_finite() || duration_s <= 0.0 {
            return Err(ManifestError::Row {
                path: path_str.clone(),
                line,
                message: format!("duration_s must be > 0, got {duration_s}"),
            });
        }
        recordings.push(LabeledRecording {
            recording_id,
            audio_uri: field(1),
            duration_s,
            raw_label: field(3),
        });
    }

    if recordings.is_empty() {
        return Err(ManifestError::Empty(path_str));
    }
    Ok(DatasetManifest {
        dataset_id,
        recordings,
    })
}

fn io_err(path: &str, e: csv::Error) -> ManifestError {
    ManifestError::Io {
        path: path.to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    }
}

/// Writes a manifest back out in the canonical CSV format.
pub fn write_manifest(
    path: impl AsRef<Path>,
    manifest: &DatasetManifest,
) -> Result<(), ManifestError> {
    let path_str = path.as_ref().display().to_string();
    let mut writer = csv::Writer::from_path(path.as_ref()).map_err(|e| io_err(&path_str, e))?;
    writer
        .write_record(MANIFEST_HEADER)
        .map_err(|e| io_err(&path_str, e))?;
    for rec in &manifest.recordings {
        writer
            .write_record([
                rec.recording_id.as_str(),
                rec.audio_uri.as_str(),
                &rec.duration_s.to_string(),
                rec.raw_label.as_str(),
            ])
            .map_err(|e| io_err(&path_str, e))?;
    }
    writer.flush().map_err(|e| ManifestError::Io {
        path: path_str,
        source: e,
    })?;
    Ok(())
}

/// A raw-label matcher: an exact string or a prefix (written `prefix*`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelPattern {
    Literal(String),
    Prefix(String),
}

impl LabelPattern {
    /// Parses `foo` as a literal and `foo*` as a prefix. `*` anywhere else
    /// is rejected.
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        match text.strip_suffix('*') {
            Some(prefix) if !prefix.contains('*') => Ok(LabelPattern::Prefix(prefix.to_string())),
            None if !text.contains('*') => Ok(LabelPattern::Literal(text.to_string())),
            _ => Err(ManifestError::BadPattern(text.to_string())),
        }
    }

    pub fn matches(&self, raw_label: &str) -> bool {
        match self {
            LabelPattern::Literal(s) => raw_label == s,
            LabelPattern::Prefix(p) => raw_label.starts_with(p.as_str()),
        }
    }
}

impl fmt::Display for LabelPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelPattern::Literal(s) => write!(f, "{s}"),
            LabelPattern::Prefix(p) => write!(f, "{p}*"),
        }
    }
}

/// One mapping rule: matching raw labels become `label`, or are dropped when
/// `label` is `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRule {
    pub pattern: LabelPattern,
    pub label: Option<String>,
}

/// What to do with raw labels no rule matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnmatchedPolicy {
    Drop,
    Error,
}

/// A label-derivation task: ordered rules, first match wins.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_id: String,
    pub rules: Vec<TaskRule>,
    pub unmatched: UnmatchedPolicy,
}

#[derive(Serialize, Deserialize)]
struct TaskRuleFile {
    #[serde(rename = "match")]
    pattern: String,
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct TaskSpecFile {
    task_id: String,
    unmatched: UnmatchedPolicy,
    rules: Vec<TaskRuleFile>,
}

impl TaskSpec {
    /// Builds and validates a task spec. At least two distinct task labels
    /// must be reachable through the rules.
    pub fn new(
        task_id: impl Into<String>,
        rules: Vec<TaskRule>,
        unmatched: UnmatchedPolicy,
    ) -> Result<Self, ManifestError> {
        let task_id = task_id.into();
        let distinct: BTreeSet<&str> = rules.iter().filter_map(|r| r.label.as_deref()).collect();
        if distinct.len() < 2 {
            return Err(ManifestError::TooFewLabels {
                task: task_id,
                n: distinct.len(),
            });
        }
        Ok(Self {
            task_id,
            rules,
            unmatched,
        })
    }

    /// Convenience constructor from `(pattern, label)` pairs; `None` drops.
    pub fn from_pairs(
        task_id: &str,
        pairs: &[(&str, Option<&str>)],
        unmatched: UnmatchedPolicy,
    ) -> Result<Self, ManifestError> {
        let rules = pairs
            .iter()
            .map(|(pat, label)| {
                Ok(TaskRule {
                    pattern: LabelPattern::parse(pat)?,
                    label: label.map(str::to_string),
                })
            })
            .collect::<Result<Vec<_>, ManifestError>>()?;
        Self::new(task_id, rules, unmatched)
    }

    /// A task that maps every listed label to itself.
    pub fn identity(
        task_id: &str,
        labels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, ManifestError> {
        let rules = labels
            .into_iter()
            .map(|l| {
                let l = l.into();
                Ok(TaskRule {
                    pattern: LabelPattern::parse(&l)?,
                    label: Some(l),
                })
            })
            .collect::<Result<Vec<_>, ManifestError>>()?;
        Self::new(task_id, rules, UnmatchedPolicy::Drop)
    }

    /// DCLDE species task: humpback, orca (all ecotypes and undetermined
    /// orcas combined), abiotic, and undetermined biological sounds.
    pub fn dclde_species() -> Self {
        Self::from_pairs(
            "dclde-species",
            &[
                ("orca-*", Some("orca")),
                ("orca", Some("orca")),
                ("humpback", Some("humpback")),
                ("abiotic", Some("abiotic")),
                ("undetermined-bio", Some("undetermined-bio")),
            ],
            UnmatchedPolicy::Drop,
        )
        .expect("built-in task is valid")
    }

    /// DCLDE ecotype task: the five orca ecotypes, everything else dropped.
    pub fn dclde_ecotype() -> Self {
        Self::from_pairs(
            "dclde-ecotype",
            &[
                ("orca-NRKW", Some("NRKW")),
                ("orca-OKW", Some("OKW")),
                ("orca-SAR", Some("SAR")),
                ("orca-SRKW", Some("SRKW")),
                ("orca-TKW", Some("TKW")),
            ],
            UnmatchedPolicy::Drop,
        )
        .expect("built-in task is valid")
    }

    /// DCLDE known-species task: humpback vs orca, with uncertain orca
    /// annotations dropped.
    pub fn dclde_known_species() -> Self {
        Self::from_pairs(
            "dclde-known-species",
            &[
                ("orca-NRKW", Some("orca")),
                ("orca-OKW", Some("orca")),
                ("orca-SAR", Some("orca")),
                ("orca-SRKW", Some("orca")),
                ("orca-TKW", Some("orca")),
                // Any other orca-<qualifier> marks annotator uncertainty.
                ("orca-*", None),
                ("orca", Some("orca")),
                ("humpback", Some("humpback")),
            ],
            UnmatchedPolicy::Drop,
        )
        .expect("built-in task is valid")
    }

    /// Loads a task spec from its JSON file format.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ManifestError> {
        let path_str = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| ManifestError::Io {
            path: path_str.clone(),
            source: e,
        })?;
        let file: TaskSpecFile =
            serde_json::from_str(&text).map_err(|e| ManifestError::BadTaskSpec {
                path: path_str.clone(),
                message: e.to_string(),
            })?;
        let rules = file
            .rules
            .into_iter()
            .map(|r| {
                Ok(TaskRule {
                    pattern: LabelPattern::parse(&r.pattern)?,
                    label: r.label,
                })
            })
            .collect::<Result<Vec<_>, ManifestError>>()?;
        Self::new(file.task_id, rules, file.unmatched)
    }

    /// Writes the task spec in its JSON file format.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ManifestError> {
        let path_str = path.as_ref().display().to_string();
        let file = TaskSpecFile {
            task_id: self.task_id.clone(),
            unmatched: self.unmatched,
            rules: self
                .rules
                .iter()
                .map(|r| TaskRuleFile {
                    pattern: r.pattern.to_string(),
                    label: r.label.clone(),
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file).expect("task spec serializes");
        std::fs::write(path.as_ref(), text).map_err(|e| ManifestError::Io {
            path: path_str,
            source: e,
        })
    }

    /// Applies first-match-wins rules to one raw label. `Ok(None)` means
    /// dropped (by rule or by the `Drop` unmatched policy).
    pub fn map_label(&self, raw_label: &str) -> Result<Option<String>, ManifestError> {
        for rule in &self.rules {
            if rule.pattern.matches(raw_label) {
                return Ok(rule.label.clone());
            }
        }
        match self.unmatched {
            UnmatchedPolicy::Drop => Ok(None),
            UnmatchedPolicy::Error => Err(ManifestError::UnmatchedLabel {
                task: self.task_id.clone(),
                label: raw_label.to_string(),
            }),
        }
    }
}

/// Maps every recording through the task rules, keeping manifest order.
/// Dropped recordings (by rule or unmatched-drop policy) are excluded; the
/// count of unmatched drops is logged.
pub fn derive_task_labels(
    manifest: &DatasetManifest,
    task: &TaskSpec,
) -> Result<Vec<(String, String)>, ManifestError> {
    let mut out = Vec::with_capacity(manifest.recordings.len());
    let mut unmatched = 0usize;
    for rec in &manifest.recordings {
        let matched = task
            .rules
            .iter()
            .any(|r| r.pattern.matches(&rec.raw_label));
        match task.map_label(&rec.raw_label)? {
            Some(label) => out.push((rec.recording_id.clone(), label)),
            None => {
                if !matched {
                    unmatched += 1;
                }
            }
        }
    }
    if unmatched > 0 {
        log::warn!(
            "task `{}`: dropped {unmatched} recording(s) with unmatched raw labels",
            task.task_id
        );
    }
    Ok(out)
}

/// Counts examples per task label.
pub fn class_counts(labels: &[(String, String)]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for (_, label) in labels {
        *counts.entry(label.clone()).or_insert(0usize) += 1;
    }
    counts
}
