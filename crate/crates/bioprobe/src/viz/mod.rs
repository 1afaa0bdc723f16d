//! Embedding visualization: PCA compression followed by exact t-SNE, and
//! SVG scatter emission.

mod pca;
mod scatter;
mod tsne;

pub use pca::{pca_fit, pca_transform, PcaModel};
pub use scatter::{emit_scatter, write_coords_csv};
pub use tsne::{
    conditional_affinities, kl_divergence, tsne_affinities, tsne_embed, TsneConfig, TsneEmbedding,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("PCA needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("out_dim {out_dim} exceeds min(N-1, dim) = {max}")]
    OutDimTooLarge { out_dim: usize, max: usize },
    #[error("out_dim must be >= 1")]
    ZeroOutDim,
    #[error("data rank {rank} is below the requested {out_dim} components")]
    RankDeficient { rank: usize, out_dim: usize },
    #[error("input has dimension {got}, model expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("t-SNE needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("perplexity {perplexity} must satisfy perplexity < (N-1)/3 = {limit} (N = {n})")]
    PerplexityTooLarge {
        perplexity: f64,
        limit: f64,
        n: usize,
    },
    #[error("perplexity must be at least 1")]
    PerplexityTooSmall,
    #[error("affinity matrix has {got} entries, expected {expected} for N = {n}")]
    BadAffinityShape { expected: usize, got: usize, n: usize },
    #[error("coordinates and labels differ in length ({coords} vs {labels})")]
    LabelMismatch { coords: usize, labels: usize },
    #[error("cannot plot zero points")]
    NoPoints,
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
