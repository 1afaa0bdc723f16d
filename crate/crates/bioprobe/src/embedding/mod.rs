//! Recording-level embeddings: per-window provider output, time pooling,
//! window pooling, and L2 normalization.
//!
//! The composition is fixed: plan windows, embed each window, mean-pool any
//! time axis per window, mean-pool across windows into one vector per
//! recording, then L2-normalize once at recording level.

mod provider;
mod store;

pub use provider::{
    EmbeddingProvider, PrecomputedProvider, ProviderConcurrency, SyntheticProvider, WindowRef,
    SYNTHETIC_FEATURE_SEGMENTS,
};
pub use store::{
    nn_search, read_window_file, store_read, store_write, write_window_file, EmbeddingStore,
    StoreError, STORE_MAGIC, STORE_VERSION,
};

use crate::audio::{extract_window, plan_windows, AudioClip, ModelSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("recording `{recording_id}` window {window_index}: {detail}")]
    Provider {
        recording_id: String,
        window_index: usize,
        detail: String,
    },
    #[error(
        "recording `{recording_id}` window {window_index}: expected shape ({frames}, {dim}), got ({got_frames}, {got_dim})"
    )]
    Shape {
        recording_id: String,
        window_index: usize,
        frames: usize,
        dim: usize,
        got_frames: usize,
        got_dim: usize,
    },
    #[error("window embedding contains a non-finite value")]
    NonFinite,
    #[error("cannot pool an empty list of vectors")]
    EmptyPool,
    #[error("vector dimensions disagree: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error(transparent)]
    Audio(#[from] crate::audio::AudioError),
    #[error(transparent)]
    Store(#[from] store::StoreError),
}

/// One window's model output: a (frames, dim) row-major matrix. `Vector`
/// layouts have a single frame.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEmbedding {
    pub frames: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl WindowEmbedding {
    pub fn new(frames: usize, dim: usize, data: Vec<f32>) -> Result<Self, EmbeddingError> {
        assert_eq!(data.len(), frames * dim, "shape does not match data length");
        if data.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self { frames, dim, data })
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.data[frame * self.dim..(frame + 1) * self.dim]
    }
}

/// A pooled, normalized embedding for one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingEmbedding {
    pub recording_id: String,
    pub vector: Vec<f32>,
    /// False only for degenerate (zero-norm) vectors left unnormalized.
    pub normalized: bool,
}

/// Column-wise mean across a window's time frames; identity for one frame.
pub fn pool_time(we: &WindowEmbedding) -> Vec<f32> {
    assert!(we.frames >= 1, "window embedding has no frames");
    if we.frames == 1 {
        return we.data.clone();
    }
    let mut acc = vec![0.0f64; we.dim];
    for frame in 0..we.frames {
        for (a, &v) in acc.iter_mut().zip(we.row(frame)) {
            *a += v as f64;
        }
    }
    acc.into_iter()
        .map(|a| (a / we.frames as f64) as f32)
        .collect()
}

/// Arithmetic mean across per-window vectors.
pub fn pool_recording(vectors: &[Vec<f32>]) -> Result<Vec<f32>, EmbeddingError> {
    let first = vectors.first().ok_or(EmbeddingError::EmptyPool)?;
    let dim = first.len();
    let mut acc = vec![0.0f64; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(EmbeddingError::DimMismatch(dim, v.len()));
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x as f64;
        }
    }
    Ok(acc
        .into_iter()
        .map(|a| (a / vectors.len() as f64) as f32)
        .collect())
}

const NORM_EPSILON: f64 = 1e-12;

/// Scales a vector to unit Euclidean norm. A (near-)zero vector is returned
/// unchanged with `false` so one silent recording cannot abort a batch run.
pub fn l2_normalize(v: &[f32]) -> (Vec<f32>, bool) {
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if norm <= NORM_EPSILON {
        log::warn!("zero-norm vector left unnormalized");
        return (v.to_vec(), false);
    }
    (v.iter().map(|&x| ((x as f64) / norm) as f32).collect(), true)
}

/// Embeds a whole recording: window, embed, pool time, pool windows,
/// normalize. The clip must already be at the model's sample rate.
pub fn embed_recording(
    provider: &dyn EmbeddingProvider,
    recording_id: &str,
    clip: &AudioClip,
) -> Result<RecordingEmbedding, EmbeddingError> {
    let model = provider.model();
    if clip.sample_rate_hz != model.sample_rate_hz {
        return Err(EmbeddingError::Audio(
            crate::audio::AudioError::SampleRateMismatch {
                clip_hz: clip.sample_rate_hz,
                model_hz: model.sample_rate_hz,
            },
        ));
    }
    let plan = plan_windows(clip.len(), clip.sample_rate_hz, model.window_s);
    let mut window_vectors = Vec::with_capacity(plan.len());
    for (window_index, window) in plan.windows.iter().enumerate() {
        let samples = extract_window(&clip.samples, window);
        let reference = WindowRef {
            recording_id,
            window_index,
        };
        let we = provider.embed_window(&reference, &samples)?;
        check_shape(model, &reference, &we)?;
        window_vectors.push(pool_time(&we));
    }
    let pooled = pool_recording(&window_vectors)?;
    let (vector, normalized) = l2_normalize(&pooled);
    if !normalized {
        log::warn!("recording `{recording_id}` pooled to a zero vector");
    }
    Ok(RecordingEmbedding {
        recording_id: recording_id.to_string(),
        vector,
        normalized,
    })
}

fn check_shape(
    model: &ModelSpec,
    reference: &WindowRef<'_>,
    we: &WindowEmbedding,
) -> Result<(), EmbeddingError> {
    let frames = model.frames_per_window();
    if we.dim != model.embedding_dim || we.frames != frames {
        return Err(EmbeddingError::Shape {
            recording_id: reference.recording_id.to_string(),
            window_index: reference.window_index,
            frames,
            dim: model.embedding_dim,
            got_frames: we.frames,
            got_dim: we.dim,
        });
    }
    Ok(())
}
