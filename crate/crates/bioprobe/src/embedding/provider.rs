//! Embedding providers: anything that turns a window of audio samples into
//! a [`WindowEmbedding`].
//!
//! Neural inference stays outside this crate. The two shipped providers are
//! a seeded synthetic model (deterministic, class-separable when classes
//! differ in energy envelope) and a lookup over precomputed per-window
//! vectors keyed by `(recording_id, window_index)`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EmbeddingError, WindowEmbedding};
use crate::audio::ModelSpec;

/// Identity of the window being embedded, for error reporting and
/// precomputed lookup.
#[derive(Debug, Clone, Copy)]
pub struct WindowRef<'a> {
    pub recording_id: &'a str,
    pub window_index: usize,
}

/// Whether a provider tolerates concurrent `embed_window` calls. The
/// harness serializes calls to single-threaded providers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderConcurrency {
    Concurrent,
    SingleThreaded,
}

pub trait EmbeddingProvider: Send + Sync {
    fn model(&self) -> &ModelSpec;

    /// Embeds one window. `samples` has exactly the model's window length.
    /// Must be deterministic for a given provider configuration and input.
    fn embed_window(
        &self,
        window: &WindowRef<'_>,
        samples: &[f32],
    ) -> Result<WindowEmbedding, EmbeddingError>;

    fn concurrency(&self) -> ProviderConcurrency {
        ProviderConcurrency::Concurrent
    }
}

/// Number of equal sub-segments the synthetic provider summarizes a window
/// into before the random linear map.
pub const SYNTHETIC_FEATURE_SEGMENTS: usize = 16;

/// A deterministic stand-in for a neural embedding model.
///
/// Features are the mean absolute amplitude of 16 equal sub-segments of the
/// window, pushed through a seeded fixed random linear map to
/// `embedding_dim`, plus a seeded bias. Recordings whose classes differ in
/// energy envelope become linearly separable, which is all the evaluation
/// pipeline needs from a test model.
pub struct SyntheticProvider {
    model: ModelSpec,
    map: Vec<f32>, // (embedding_dim x SEGMENTS) row-major
    bias: Vec<f32>,
}

impl SyntheticProvider {
    pub fn new(model: ModelSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = model.embedding_dim;
        let normal = StandardNormal;
        let map: Vec<f32> = (0..dim * SYNTHETIC_FEATURE_SEGMENTS)
            .map(|_| {
                let x: f64 = normal.sample(&mut rng);
                x as f32
            })
            .collect();
        let bias: Vec<f32> = (0..dim)
            .map(|_| {
                let x: f64 = normal.sample(&mut rng);
                (0.1 * x) as f32
            })
            .collect();
        Self { model, map, bias }
    }

    /// The embedding of an all-zero window.
    pub fn bias_vector(&self) -> &[f32] {
        &self.bias
    }

    fn features(samples: &[f32]) -> [f64; SYNTHETIC_FEATURE_SEGMENTS] {
        let mut features = [0.0f64; SYNTHETIC_FEATURE_SEGMENTS];
        let n = samples.len();
        for (j, feature) in features.iter_mut().enumerate() {
            let start = j * n / SYNTHETIC_FEATURE_SEGMENTS;
            let end = (j + 1) * n / SYNTHETIC_FEATURE_SEGMENTS;
            if end > start {
                let sum: f64 = samples[start..end].iter().map(|&s| s.abs() as f64).sum();
                *feature = sum / (end - start) as f64;
            }
        }
        features
    }
}

impl EmbeddingProvider for SyntheticProvider {
    fn model(&self) -> &ModelSpec {
        &self.model
    }

    fn embed_window(
        &self,
        _window: &WindowRef<'_>,
        samples: &[f32],
    ) -> Result<WindowEmbedding, EmbeddingError> {
        let features = Self::features(samples);
        let dim = self.model.embedding_dim;
        let mut vector = Vec::with_capacity(dim);
        for row in 0..dim {
            let mut acc = self.bias[row] as f64;
            for (col, &f) in features.iter().enumerate() {
                acc += self.map[row * SYNTHETIC_FEATURE_SEGMENTS + col] as f64 * f;
            }
            vector.push(acc as f32);
        }
        let frames = self.model.frames_per_window();
        let data = if frames == 1 {
            vector
        } else {
            let mut data = Vec::with_capacity(frames * dim);
            for _ in 0..frames {
                data.extend_from_slice(&vector);
            }
            data
        };
        WindowEmbedding::new(frames, dim, data)
    }
}

/// Serves per-window vectors computed elsewhere, keyed by
/// `(recording_id, window_index)`. Always single-frame output: any time
/// pooling has been applied by whatever produced the file.
pub struct PrecomputedProvider {
    model: ModelSpec,
    entries: BTreeMap<(String, u32), Vec<f32>>,
}

impl PrecomputedProvider {
    pub fn new(model: ModelSpec, entries: BTreeMap<(String, u32), Vec<f32>>) -> Self {
        Self { model, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl EmbeddingProvider for PrecomputedProvider {
    fn model(&self) -> &ModelSpec {
        &self.model
    }

    fn embed_window(
        &self,
        window: &WindowRef<'_>,
        _samples: &[f32],
    ) -> Result<WindowEmbedding, EmbeddingError> {
        let key = (window.recording_id.to_string(), window.window_index as u32);
        let vector = self
            .entries
            .get(&key)
            .ok_or_else(|| EmbeddingError::Provider {
                recording_id: window.recording_id.to_string(),
                window_index: window.window_index,
                detail: "no precomputed embedding for this window".into(),
            })?;
        WindowEmbedding::new(1, vector.len(), vector.clone())
    }
}
