//! Multinomial logistic-regression probes on frozen embeddings.
//!
//! The objective is softmax cross-entropy summed over samples plus an L2
//! penalty on the weight matrix (biases unpenalized):
//! `sum_i -log softmax(W x_i + b)[y_i] + (l2/2) * ||W||_F^2`.
//! Training starts from zeros and runs L-BFGS; the objective is convex, so
//! zero initialization makes the fit fully deterministic.

mod lbfgs;

pub use lbfgs::{lbfgs_minimize, LbfgsOptions, LbfgsOutcome};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("class `{0}` has no training sample")]
    ClassAbsent(String),
    #[error("need at least {need} samples for {classes} classes, got {got}")]
    TooFewSamples {
        need: usize,
        classes: usize,
        got: usize,
    },
    #[error("need at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("label index {index} out of range for {classes} classes")]
    LabelOutOfRange { index: usize, classes: usize },
    #[error("input has dimension {got}, model expects {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("probe parameters are not finite")]
    NonFinite,
    #[error("failed to read probe model {path}: {message}")]
    File { path: String, message: String },
}

/// Training hyperparameters. `seed` is carried for config completeness;
/// zero-initialized convex training does not consume randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_l2")]
    pub l2_strength: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_history")]
    pub history_size: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_l2() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    1000
}
fn default_grad_tol() -> f64 {
    1e-5
}
fn default_history() -> usize {
    10
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_strength: default_l2(),
            max_iters: default_max_iters(),
            grad_tol: default_grad_tol(),
            history_size: default_history(),
            seed: 0,
        }
    }
}

/// A trained linear probe: class list, weight matrix (classes x dim), and
/// per-class biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub classes: Vec<String>,
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProbeModelFile {
    classes: Vec<String>,
    dim: usize,
    /// Row-major (classes x dim).
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl ProbeModel {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Serializes to JSON (classes, row-major weights, biases) for
    /// inspection.
    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), ProbeError> {
        let file = ProbeModelFile {
            classes: self.classes.clone(),
            dim: self.dim(),
            weights: (0..self.weights.nrows())
                .flat_map(|r| self.weights.row(r).iter().copied().collect::<Vec<_>>())
                .collect(),
            biases: self.biases.iter().copied().collect(),
        };
        let text = serde_json::to_string_pretty(&file).expect("probe model serializes");
        std::fs::write(path.as_ref(), text).map_err(|e| ProbeError::File {
            path: path.as_ref().display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, ProbeError> {
        let path_str = path.as_ref().display().to_string();
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| ProbeError::File {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
        let file: ProbeModelFile =
            serde_json::from_str(&text).map_err(|e| ProbeError::File {
                path: path_str.clone(),
                message: e.to_string(),
            })?;
        if file.weights.len() != file.classes.len() * file.dim
            || file.biases.len() != file.classes.len()
        {
            return Err(ProbeError::File {
                path: path_str,
                message: "inconsistent weight/bias shapes".into(),
            });
        }
        Ok(Self {
            classes: file.classes.clone(),
            weights: DMatrix::from_row_slice(file.classes.len(), file.dim, &file.weights),
            biases: DVector::from_vec(file.biases),
        })
    }
}

/// Loss and analytic gradient of the penalized softmax cross-entropy at
/// `params` (row-major W rows, then b). Numerically stabilized by
/// log-sum-exp; the gradient is exact.
pub fn objective(
    params: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &[usize],
    n_classes: usize,
    l2_strength: f64,
) -> (f64, DVector<f64>) {
    let n = x.nrows();
    let dim = x.ncols();
    assert_eq!(params.len(), n_classes * dim + n_classes, "parameter shape");
    assert_eq!(y.len(), n, "one label per sample");

    let weights = DMatrix::from_row_slice(n_classes, dim, &params.as_slice()[..n_classes * dim]);
    let biases = DVector::from_column_slice(&params.as_slice()[n_classes * dim..]);

    // logits: (n x classes)
    let mut logits = x * weights.transpose();
    for mut row in logits.row_iter_mut() {
        row += biases.transpose();
    }

    let mut loss = 0.0f64;
    // residual = softmax(logits) - onehot(y), reused for both gradients
    let mut residual = logits;
    for (i, mut row) in residual.row_iter_mut().enumerate() {
        let max = row.max();
        let z_true = row[y[i]];
        let mut sum = 0.0f64;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        // -log softmax[y_i] = log-sum-exp(z) - z[y_i]
        loss += sum.ln() + max - z_true;
        for v in row.iter_mut() {
            *v /= sum;
        }
        row[y[i]] -= 1.0;
    }

    let mut grad_w = residual.transpose() * x; // (classes x dim)
    grad_w += l2_strength * &weights;
    loss += 0.5 * l2_strength * weights.iter().map(|w| w * w).sum::<f64>();

    let mut grad = DVector::zeros(params.len());
    for r in 0..n_classes {
        for c in 0..dim {
            grad[r * dim + c] = grad_w[(r, c)];
        }
    }
    for r in 0..n_classes {
        grad[n_classes * dim + r] = residual.column(r).sum();
    }
    (loss, grad)
}

/// Trains a probe from zero-initialized parameters. Deterministic given
/// inputs and config. Every class must have at least one sample and there
/// must be at least as many samples as classes.
pub fn train_probe(
    x: &DMatrix<f64>,
    y: &[usize],
    classes: &[String],
    config: &TrainConfig,
) -> Result<ProbeModel, ProbeError> {
    let n_classes = classes.len();
    if n_classes < 2 {
        return Err(ProbeError::TooFewClasses(n_classes));
    }
    if x.nrows() < n_classes {
        return Err(ProbeError::TooFewSamples {
            need: n_classes,
            classes: n_classes,
            got: x.nrows(),
        });
    }
    for &label in y {
        if label >= n_classes {
            return Err(ProbeError::LabelOutOfRange {
                index: label,
                classes: n_classes,
            });
        }
    }
    for (index, class) in classes.iter().enumerate() {
        if !y.contains(&index) {
            return Err(ProbeError::ClassAbsent(class.clone()));
        }
    }

    let dim = x.ncols();
    let opts = LbfgsOptions {
        history_size: config.history_size,
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
        ..Default::default()
    };
    let l2 = config.l2_strength;
    let outcome = lbfgs_minimize(
        |params| objective(params, x, y, n_classes, l2),
        DVector::zeros(n_classes * dim + n_classes),
        &opts,
    );
    if !outcome.converged {
        log::warn!(
            "probe training stopped before reaching grad_tol (grad inf-norm {:.3e} after {} iterations)",
            outcome.grad_inf_norm,
            outcome.iterations
        );
    }
    if outcome.point.iter().any(|v| !v.is_finite()) {
        return Err(ProbeError::NonFinite);
    }

    let params = outcome.point;
    Ok(ProbeModel {
        classes: classes.to_vec(),
        weights: DMatrix::from_row_slice(n_classes, dim, &params.as_slice()[..n_classes * dim]),
        biases: DVector::from_column_slice(&params.as_slice()[n_classes * dim..]),
    })
}

/// Class probabilities for each row of `x`, computed via log-sum-exp; each
/// row sums to one.
pub fn predict_proba(model: &ProbeModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>, ProbeError> {
    if x.ncols() != model.dim() {
        return Err(ProbeError::DimMismatch {
            expected: model.dim(),
            got: x.ncols(),
        });
    }
    let mut probabilities = x * model.weights.transpose();
    for mut row in probabilities.row_iter_mut() {
        row += model.biases.transpose();
        let max = row.max();
        let mut sum = 0.0f64;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(probabilities)
}
