//! Few-shot linear-probe evaluation for bioacoustic embedding models.
//!
//! `bioprobe` measures how well a frozen audio embedding separates classes
//! in a labeled recording collection, using the standard transfer-learning
//! protocol: window each recording (hop equal to the window), embed every
//! window, mean-pool to a recording-level vector, L2-normalize, then train
//! k-shot logistic-regression probes and score the holdout with one-vs-all
//! ROC-AUC, averaged over repeated trials. It also ships the companion
//! visualization pipeline (PCA to 32 dimensions, then exact t-SNE to 2-D)
//! and a small binary embedding store with exact nearest-neighbor search.
//!
//! Embeddings come from pluggable providers: a deterministic synthetic
//! provider for tests and demos, or files of precomputed per-window vectors
//! produced by real models elsewhere.
//!
//! The `examples/` directory holds one runnable example per capability; the
//! `bioprobe` binary exposes the same pipeline as subcommands
//! (`manifest-validate`, `embed`, `eval`, `score-pretrained`, `tsne`,
//! `report`).
//!
//! ```
//! use bioprobe::embedding::{EmbeddingStore, RecordingEmbedding, l2_normalize};
//! use bioprobe::experiment::{run_trial, TrialKey};
//! use bioprobe::probe::TrainConfig;
//! use bioprobe::metrics::AucAveraging;
//!
//! // Two toy classes at opposite corners of a 3-D embedding space.
//! let mut store = EmbeddingStore::new(3);
//! let mut labels = Vec::new();
//! for i in 0..12 {
//!     let (class, base) = if i % 2 == 0 { ("croak", 1.0) } else { ("whistle", -1.0) };
//!     let v = vec![base as f32, 0.2 * i as f32 / 12.0, 0.1];
//!     let (vector, normalized) = l2_normalize(&v);
//!     let id = format!("r{i:02}");
//!     store
//!         .insert(RecordingEmbedding { recording_id: id.clone(), vector, normalized })
//!         .unwrap();
//!     labels.push((id, class.to_string()));
//! }
//!
//! let key = TrialKey { task: "demo".into(), model: "toy".into(), k: 4, trial: 0 };
//! let result = run_trial(&key, &store, &labels, 7, &TrainConfig::default(),
//!                        AucAveraging::Macro).unwrap();
//! assert!(result.auc.macro_auc > 0.99);
//! ```

pub mod audio;
pub mod cli;
pub mod embedding;
pub mod experiment;
pub mod manifest;
pub mod metrics;
pub mod probe;
pub mod viz;

pub use audio::{AudioClip, ModelSpec, OutputLayout, WindowPlan};
pub use embedding::{EmbeddingStore, RecordingEmbedding, WindowEmbedding};
pub use experiment::{ExperimentConfig, ExperimentReport, TrialResult};
pub use manifest::{DatasetManifest, LabeledRecording, TaskSpec};
pub use metrics::AucResult;
pub use probe::{ProbeModel, TrainConfig};
