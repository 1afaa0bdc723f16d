//! PCA via eigendecomposition of the smaller Gram/covariance matrix.
//!
//! For N samples of dimension d the decomposition works on the
//! min(N, d)-sized symmetric matrix, so compressing a handful of recordings
//! with large embeddings (the common case here) stays cheap. Component
//! signs follow a fixed convention: the entry of largest magnitude in each
//! component is positive, making fits bit-reproducible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::VizError;

/// A fitted PCA basis: per-feature mean, orthonormal component rows
/// (out_dim x dim), and non-increasing explained variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    pub components: DMatrix<f64>,
    pub explained_variance: DVector<f64>,
}

impl PcaModel {
    pub fn out_dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.components.ncols()
    }
}

/// Fits PCA on rows of `x`. Requires `1 <= out_dim <= min(N-1, dim)` and
/// data of rank at least `out_dim`.
pub fn pca_fit(x: &DMatrix<f64>, out_dim: usize) -> Result<PcaModel, VizError> {
    let n = x.nrows();
    let dim = x.ncols();
    if n < 2 {
        return Err(VizError::TooFewSamples(n));
    }
    if out_dim == 0 {
        return Err(VizError::ZeroOutDim);
    }
    let max_dim = (n - 1).min(dim);
    if out_dim > max_dim {
        return Err(VizError::OutDimTooLarge {
            out_dim,
            max: max_dim,
        });
    }

    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }

    let scale = 1.0 / (n as f64 - 1.0);
    let (eigenvalues, components) = if dim <= n {
        // Covariance route: eigenvectors are the components directly.
        let cov = centered.transpose() * &centered * scale;
        let eig = SymmetricEigen::new(cov);
        let order = descending_order(&eig.eigenvalues);
        let values: Vec<f64> = order
            .iter()
            .take(out_dim)
            .map(|&i| eig.eigenvalues[i].max(0.0))
            .collect();
        let mut comps = DMatrix::zeros(out_dim, dim);
        for (row, &i) in order.iter().take(out_dim).enumerate() {
            comps.set_row(row, &eig.eigenvectors.column(i).transpose());
        }
        (values, comps)
    } else {
        // Gram route: eigenvectors u of X X^T / (n-1) map to components
        // v = X^T u / ||X^T u||, sharing the same nonzero eigenvalues.
        let gram = &centered * centered.transpose() * scale;
        let eig = SymmetricEigen::new(gram);
        let order = descending_order(&eig.eigenvalues);
        let mut values = Vec::with_capacity(out_dim);
        let mut comps = DMatrix::zeros(out_dim, dim);
        for (row, &i) in order.iter().take(out_dim).enumerate() {
            let value = eig.eigenvalues[i].max(0.0);
            values.push(value);
            let unnormalized = centered.transpose() * eig.eigenvectors.column(i);
            let norm = unnormalized.norm();
            if norm <= 1e-12 {
                return Err(VizError::RankDeficient { rank: row, out_dim });
            }
            comps.set_row(row, &(unnormalized / norm).transpose());
        }
        (values, comps)
    };

    if eigenvalues.iter().any(|&v| v <= 1e-12 * eigenvalues[0].max(1e-300)) {
        let rank = eigenvalues
            .iter()
            .take_while(|&&v| v > 1e-12 * eigenvalues[0].max(1e-300))
            .count();
        if rank < out_dim {
            return Err(VizError::RankDeficient { rank, out_dim });
        }
    }

    let mut components = components;
    fix_signs(&mut components);

    Ok(PcaModel {
        mean,
        components,
        explained_variance: DVector::from_vec(eigenvalues),
    })
}

fn descending_order(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite eigenvalues"));
    order
}

/// Flips each component so its largest-magnitude entry is positive; the
/// first such entry wins ties.
fn fix_signs(components: &mut DMatrix<f64>) {
    for mut row in components.row_iter_mut() {
        let mut pivot = 0usize;
        let mut best = 0.0f64;
        for (i, &v) in row.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                pivot = i;
            }
        }
        if row[pivot] < 0.0 {
            row.neg_mut();
        }
    }
}

/// Projects rows of `x` onto the fitted basis: `(x - mean) * components^T`.
pub fn pca_transform(model: &PcaModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>, VizError> {
    if x.ncols() != model.dim() {
        return Err(VizError::DimMismatch {
            expected: model.dim(),
            got: x.ncols(),
        });
    }
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= model.mean.transpose();
    }
    Ok(centered * model.components.transpose())
}
