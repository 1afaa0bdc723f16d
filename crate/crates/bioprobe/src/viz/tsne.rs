//! Exact O(N^2) t-SNE.
//!
//! Per-point Gaussian bandwidths come from a binary search matching each
//! row's entropy to log(perplexity); affinities are symmetrized to a joint
//! distribution summing to one. The 2-D embedding minimizes KL(P || Q) with
//! a Student-t (one degree of freedom) low-dimensional kernel by gradient
//! descent with the canonical schedule: early exaggeration, momentum switch,
//! and per-parameter gains.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::VizError;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    /// P is multiplied by this factor for the first `exaggeration_iters`.
    pub early_exaggeration: f64,
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
        }
    }
}

/// Embedding coordinates plus the KL divergence (against the plain,
/// unexaggerated P) at initialization and after the last iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TsneEmbedding {
    pub coords: Vec<[f64; 2]>,
    pub kl_initial: f64,
    pub kl_final: f64,
}

const ENTROPY_TOLERANCE: f64 = 1e-5;
const BANDWIDTH_SEARCH_ITERS: usize = 50;
/// Cap on the Gaussian precision, equivalent to a bandwidth floor of 1e-12;
/// keeps duplicated points from driving the search to infinity.
const BETA_CAP: f64 = 0.5e24;

fn squared_distances(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut d2 = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for c in 0..x.ncols() {
                let diff = x[(i, c)] - x[(j, c)];
                acc += diff * diff;
            }
            d2[i * n + j] = acc;
            d2[j * n + i] = acc;
        }
    }
    d2
}

/// Row-normalized conditional affinities P(j|i) with per-row bandwidths
/// matched to `perplexity`. Returns the N x N row-major matrix and a
/// per-row flag marking rows whose entropy search converged.
pub fn conditional_affinities(
    x: &DMatrix<f64>,
    perplexity: f64,
) -> Result<(Vec<f64>, Vec<bool>), VizError> {
    let n = x.nrows();
    if n < 4 {
        return Err(VizError::TooFewPoints(n));
    }
    if perplexity < 1.0 {
        return Err(VizError::PerplexityTooSmall);
    }
    let limit = (n as f64 - 1.0) / 3.0;
    if perplexity >= limit {
        return Err(VizError::PerplexityTooLarge {
            perplexity,
            limit,
            n,
        });
    }

    let d2 = squared_distances(x);
    let target_entropy = perplexity.ln();
    let mut p = vec![0.0f64; n * n];
    let mut converged = vec![true; n];

    for i in 0..n {
        let row_d2 = &d2[i * n..(i + 1) * n];
        let mut beta = 1.0f64;
        let mut beta_min = f64::NEG_INFINITY;
        let mut beta_max = f64::INFINITY;
        let mut ok = false;

        for _ in 0..BANDWIDTH_SEARCH_ITERS {
            let entropy = row_entropy(row_d2, i, beta, &mut p[i * n..(i + 1) * n]);
            let diff = entropy - target_entropy;
            if diff.abs() <= ENTROPY_TOLERANCE {
                ok = true;
                break;
            }
            if diff > 0.0 {
                // Too spread out: sharpen by raising beta.
                beta_min = beta;
                beta = if beta_max.is_finite() {
                    0.5 * (beta + beta_max)
                } else {
                    beta * 2.0
                };
            } else {
                beta_max = beta;
                beta = if beta_min.is_finite() {
                    0.5 * (beta + beta_min)
                } else {
                    beta * 0.5
                };
            }
            if beta >= BETA_CAP {
                beta = BETA_CAP;
                let entropy = row_entropy(row_d2, i, beta, &mut p[i * n..(i + 1) * n]);
                ok = (entropy - target_entropy).abs() <= ENTROPY_TOLERANCE;
                break;
            }
        }
        if !ok {
            // Leave the last computed row in place (it is still a valid
            // distribution) and flag it.
            converged[i] = false;
            log::warn!("bandwidth search did not reach target perplexity for row {i}");
        }
    }
    Ok((p, converged))
}

/// Writes row i of the conditional distribution for precision `beta` and
/// returns its entropy (natural log).
fn row_entropy(row_d2: &[f64], skip: usize, beta: f64, out: &mut [f64]) -> f64 {
    let min_d2 = row_d2
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0f64;
    let mut weighted_d2 = 0.0f64;
    for (j, &d) in row_d2.iter().enumerate() {
        if j == skip {
            out[j] = 0.0;
            continue;
        }
        let w = (-beta * (d - min_d2)).exp();
        out[j] = w;
        sum += w;
        weighted_d2 += w * (d - min_d2);
    }
    for (j, v) in out.iter_mut().enumerate() {
        if j != skip {
            *v /= sum;
        }
    }
    sum.ln() + beta * weighted_d2 / sum
}

/// Symmetrized joint affinities: `(P(j|i) + P(i|j)) / 2N`. Non-negative,
/// zero diagonal, total sum one.
pub fn tsne_affinities(x: &DMatrix<f64>, perplexity: f64) -> Result<Vec<f64>, VizError> {
    let (conditional, _) = conditional_affinities(x, perplexity)?;
    let n = x.nrows();
    let mut p = vec![0.0f64; n * n];
    let scale = 1.0 / (2.0 * n as f64);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) * scale;
            }
        }
    }
    Ok(p)
}

/// KL(P || Q) where Q is the Student-t kernel of `coords`, floored at
/// 1e-12 to keep the divergence finite.
pub fn kl_divergence(p: &[f64], coords: &[[f64; 2]]) -> f64 {
    let n = coords.len();
    assert_eq!(p.len(), n * n, "affinity matrix shape");
    let mut weights = vec![0.0f64; n * n];
    let mut z = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            weights[i * n + j] = w;
            weights[j * n + i] = w;
            z += 2.0 * w;
        }
    }
    let mut kl = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let p_ij = p[i * n + j];
            if i != j && p_ij > 0.0 {
                let q_ij = (weights[i * n + j] / z).max(1e-12);
                kl += p_ij * (p_ij / q_ij).ln();
            }
        }
    }
    kl
}

/// Runs the gradient descent. Output is centered (mean zero) and fully
/// determined by `config.seed`.
pub fn tsne_embed(p: &[f64], n: usize, config: &TsneConfig) -> Result<TsneEmbedding, VizError> {
    if p.len() != n * n {
        return Err(VizError::BadAffinityShape {
            expected: n * n,
            got: p.len(),
            n,
        });
    }
    if n < 4 {
        return Err(VizError::TooFewPoints(n));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = StandardNormal;
    let mut coords: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let a: f64 = normal.sample(&mut rng);
            let b: f64 = normal.sample(&mut rng);
            [a * 1e-4, b * 1e-4]
        })
        .collect();
    center(&mut coords);

    let kl_initial = kl_divergence(p, &coords);

    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut weights = vec![0.0f64; n * n];

    for iteration in 0..config.iterations {
        let exaggeration = if iteration < config.exaggeration_iters {
            config.early_exaggeration
        } else {
            1.0
        };
        let momentum = if iteration < config.momentum_switch_iter {
            config.initial_momentum
        } else {
            config.final_momentum
        };

        // Student-t weights and their total.
        let mut z = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = coords[i][0] - coords[j][0];
                let dy = coords[i][1] - coords[j][1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                weights[i * n + j] = w;
                weights[j * n + i] = w;
                z += 2.0 * w;
            }
        }

        for i in 0..n {
            let mut grad = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = weights[i * n + j];
                let q = w / z;
                let coefficient = 4.0 * (exaggeration * p[i * n + j] - q) * w;
                grad[0] += coefficient * (coords[i][0] - coords[j][0]);
                grad[1] += coefficient * (coords[i][1] - coords[j][1]);
            }
            for c in 0..2 {
                // Per-parameter gains: grow when the gradient keeps its
                // direction against the velocity, shrink otherwise.
                if grad[c].signum() != velocity[i][c].signum() {
                    gains[i][c] += 0.2;
                } else {
                    gains[i][c] = (gains[i][c] * 0.8).max(0.01);
                }
                velocity[i][c] =
                    momentum * velocity[i][c] - config.learning_rate * gains[i][c] * grad[c];
            }
        }
        for (coord, v) in coords.iter_mut().zip(&velocity) {
            coord[0] += v[0];
            coord[1] += v[1];
        }
        center(&mut coords);
    }

    let kl_final = kl_divergence(p, &coords);
    Ok(TsneEmbedding {
        coords,
        kl_initial,
        kl_final,
    })
}

fn center(coords: &mut [[f64; 2]]) {
    let n = coords.len() as f64;
    let mut mean = [0.0f64; 2];
    for c in coords.iter() {
        mean[0] += c[0];
        mean[1] += c[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    for c in coords.iter_mut() {
        c[0] -= mean[0];
        c[1] -= mean[1];
    }
}
