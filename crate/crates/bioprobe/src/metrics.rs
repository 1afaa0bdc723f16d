//! Binary and one-vs-all ROC-AUC with exact tie handling.
//!
//! AUC is computed in its Mann-Whitney form: the fraction of
//! (positive, negative) pairs ranked correctly, ties counting one half.
//! The implementation sorts once and uses average ranks, O(N log N), and is
//! arithmetically identical to brute-force pair counting: both numerators
//! are sums of exact half-integers.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("AUC undefined: need at least one positive and one negative, got {positives}+/{negatives}-")]
    Degenerate { positives: usize, negatives: usize },
    #[error("score at index {0} is not finite")]
    NonFinite(usize),
    #[error("every class is degenerate; one-vs-all AUC undefined")]
    AllDegenerate,
    #[error("labels reference class index {index} but there are only {classes} score columns")]
    LabelOutOfRange { index: usize, classes: usize },
    #[error("probability matrix has {rows} rows but there are {labels} labels")]
    ShapeMismatch { rows: usize, labels: usize },
}

/// How per-class AUCs aggregate into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AucAveraging {
    /// Unweighted mean over classes.
    #[default]
    Macro,
    /// Mean weighted by each class's positive count.
    Weighted,
}

/// Per-class one-vs-all AUCs plus their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucResult {
    pub per_class: BTreeMap<String, f64>,
    #[serde(rename = "macro")]
    pub macro_auc: f64,
}

/// Mann-Whitney AUC of `scores` against boolean labels: the probability a
/// random positive outscores a random negative, ties counting 0.5.
pub fn roc_auc_binary(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite(i));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::Degenerate {
            positives,
            negatives,
        });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Average ranks over tie groups; ranks are 1-based.
    let mut positive_rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                positive_rank_sum += rank;
            }
        }
        i = j + 1;
    }

    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// One-vs-all AUC per class over a probability (or score) matrix whose
/// columns follow `classes`. Classes with no positives in `labels` are
/// excluded from the aggregate with a warning; if every class is degenerate
/// the call fails.
pub fn one_vs_all_auc(
    scores: &DMatrix<f64>,
    labels: &[usize],
    classes: &[String],
    averaging: AucAveraging,
) -> Result<AucResult, MetricsError> {
    if scores.nrows() != labels.len() {
        return Err(MetricsError::ShapeMismatch {
            rows: scores.nrows(),
            labels: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
        return Err(MetricsError::LabelOutOfRange {
            index: bad,
            classes: classes.len(),
        });
    }

    let mut per_class = BTreeMap::new();
    let mut supports: BTreeMap<String, usize> = BTreeMap::new();
    for (index, class) in classes.iter().enumerate() {
        let class_labels: Vec<bool> = labels.iter().map(|&l| l == index).collect();
        let positives = class_labels.iter().filter(|&&l| l).count();
        if positives == 0 || positives == labels.len() {
            log::warn!("class `{class}` is degenerate in the holdout; excluded from the aggregate");
            continue;
        }
        let column: Vec<f64> = scores.column(index).iter().copied().collect();
        let auc = roc_auc_binary(&column, &class_labels)?;
        per_class.insert(class.clone(), auc);
        supports.insert(class.clone(), positives);
    }

    if per_class.is_empty() {
        return Err(MetricsError::AllDegenerate);
    }

    let macro_auc = match averaging {
        AucAveraging::Macro => {
            per_class.values().sum::<f64>() / per_class.len() as f64
        }
        AucAveraging::Weighted => {
            let total: usize = supports.values().sum();
            per_class
                .iter()
                .map(|(class, auc)| auc * supports[class] as f64)
                .sum::<f64>()
                / total as f64
        }
    };

    Ok(AucResult {
        per_class,
        macro_auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute-force pair-counting oracle: wins + half-ties over all
    /// positive/negative pairs.
    fn auc_pair_counting(scores: &[f64], labels: &[bool]) -> f64 {
        let mut numerator = 0.0f64;
        let mut pairs = 0.0f64;
        for (i, &pos) in labels.iter().enumerate() {
            if !pos {
                continue;
            }
            for (j, &neg) in labels.iter().enumerate() {
                if neg {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    numerator += 1.0;
                } else if scores[i] == scores[j] {
                    numerator += 0.5;
                }
            }
        }
        numerator / pairs
    }

    #[test]
    fn perfect_separation_is_one() {
        let scores = [0.9, 0.8, 0.3, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(roc_auc_binary(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn inverted_labels_give_zero() {
        let scores = [0.9, 0.8, 0.3, 0.2];
        let labels = [false, false, true, true];
        assert_eq!(roc_auc_binary(&scores, &labels).unwrap(), 0.0);
    }

    #[test]
    fn all_ties_give_one_half() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let labels = [true, true, false, false];
        assert_eq!(roc_auc_binary(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class_input_is_degenerate() {
        let scores = [0.1, 0.2];
        assert!(matches!(
            roc_auc_binary(&scores, &[true, true]),
            Err(MetricsError::Degenerate { .. })
        ));
    }

    #[test]
    fn random_instance_matches_pair_counting_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 30;
        // Quantized scores to force ties.
        let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0..10) as f64) / 10.0).collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let fast = roc_auc_binary(&scores, &labels).unwrap();
        let slow = auc_pair_counting(&scores, &labels);
        assert_eq!(fast, slow);
    }

    #[test]
    fn binary_one_vs_all_classes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 24;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let scores = DMatrix::from_fn(n, 2, |r, c| {
            let p: f64 = rng.gen_range(0.01..0.99);
            let _ = r;
            if c == 0 {
                p
            } else {
                0.0 // overwritten below
            }
        });
        // Column 1 is the complement so rows form a distribution.
        let mut scores = scores;
        for r in 0..n {
            scores[(r, 1)] = 1.0 - scores[(r, 0)];
        }
        let classes = vec!["a".to_string(), "b".to_string()];
        let result = one_vs_all_auc(&scores, &labels, &classes, AucAveraging::Macro).unwrap();
        let a = result.per_class["a"];
        let b = result.per_class["b"];
        assert!((a - b).abs() < 1e-12);
        assert!((result.macro_auc - a).abs() < 1e-12);
    }

    #[test]
    fn separable_three_class_scores_reach_one() {
        let n = 12;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let scores = DMatrix::from_fn(n, 3, |r, c| if labels[r] == c { 0.9 } else { 0.05 });
        let classes: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let result = one_vs_all_auc(&scores, &labels, &classes, AucAveraging::Macro).unwrap();
        assert_eq!(result.macro_auc, 1.0);
        assert!(result.per_class.values().all(|&v| v == 1.0));
    }

    #[test]
    fn random_three_class_matches_per_class_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 20;
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        // Ensure all classes appear.
        let mut labels = labels;
        labels[0] = 0;
        labels[1] = 1;
        labels[2] = 2;
        let scores = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(0.0..1.0));
        let classes: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let result = one_vs_all_auc(&scores, &labels, &classes, AucAveraging::Macro).unwrap();
        for (c, class) in classes.iter().enumerate() {
            let column: Vec<f64> = scores.column(c).iter().copied().collect();
            let bools: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            assert_eq!(result.per_class[class], auc_pair_counting(&column, &bools));
        }
    }

    #[test]
    fn class_without_positives_is_excluded_with_macro_over_rest() {
        let n = 8;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect(); // class 2 absent
        let scores = DMatrix::from_fn(n, 3, |r, c| if labels[r] == c { 0.8 } else { 0.1 });
        let classes: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let result = one_vs_all_auc(&scores, &labels, &classes, AucAveraging::Macro).unwrap();
        assert!(!result.per_class.contains_key("z"));
        assert_eq!(result.per_class.len(), 2);
    }

    #[test]
    fn all_degenerate_errors() {
        let scores = DMatrix::from_element(4, 2, 0.5);
        let labels = vec![0usize; 4];
        let classes: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
        assert!(matches!(
            one_vs_all_auc(&scores, &labels, &classes, AucAveraging::Macro),
            Err(MetricsError::AllDegenerate)
        ));
    }

    #[test]
    fn weighted_averaging_uses_supports() {
        // Class a: 3 positives with AUC 1.0; class b: 1 positive with AUC 0.0.
        let scores = DMatrix::from_row_slice(
            4,
            2,
            &[
                0.9, 0.9, //
                0.8, 0.8, //
                0.7, 0.7, //
                0.1, 0.1, //
            ],
        );
        let labels = vec![0, 0, 0, 1];
        let classes: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let macro_result =
            one_vs_all_auc(&scores, &labels, &classes, AucAveraging::Macro).unwrap();
        let weighted_result =
            one_vs_all_auc(&scores, &labels, &classes, AucAveraging::Weighted).unwrap();
        assert!((macro_result.macro_auc - 0.5).abs() < 1e-12);
        assert!((weighted_result.macro_auc - 0.75).abs() < 1e-12);
    }

    #[test]
    fn macro_auc_is_invariant_under_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let n = 18;
        let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        labels[0] = 0;
        labels[1] = 1;
        labels[2] = 2;
        let scores = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(0.0..1.0));
        let classes: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let base = one_vs_all_auc(&scores, &labels, &classes, AucAveraging::Macro).unwrap();

        // Permute classes (columns and label indices together).
        let perm = [1usize, 2, 0];
        let permuted_scores = DMatrix::from_fn(n, 3, |r, c| scores[(r, perm[c])]);
        let permuted_labels: Vec<usize> = labels
            .iter()
            .map(|&l| perm.iter().position(|&p| p == l).unwrap())
            .collect();
        let permuted_classes: Vec<String> = perm.iter().map(|&i| classes[i].clone()).collect();
        let permuted = one_vs_all_auc(
            &permuted_scores,
            &permuted_labels,
            &permuted_classes,
            AucAveraging::Macro,
        )
        .unwrap();
        assert!((base.macro_auc - permuted.macro_auc).abs() < 1e-12);
    }

    proptest! {
        // Rank-based implementation equals brute force exactly, ties included.
        #[test]
        fn rank_auc_equals_pair_counting(
            raw in proptest::collection::vec((0u8..12, proptest::bool::ANY), 4..40)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 11.0).collect();
            let labels: Vec<bool> = raw.iter().map(|(_, l)| *l).collect();
            let positives = labels.iter().filter(|&&l| l).count();
            prop_assume!(positives > 0 && positives < labels.len());
            let fast = roc_auc_binary(&scores, &labels).unwrap();
            prop_assert_eq!(fast, auc_pair_counting(&scores, &labels));
        }

        // AUC is invariant under strictly increasing transforms, and
        // complementing labels reflects it around one half: the Mann-Whitney
        // numerators (exact half-integers) sum to P*N exactly; the two final
        // divisions may each round, so the float sum is held to one ulp.
        #[test]
        fn auc_transform_and_complement_identities(
            raw in proptest::collection::vec((-50i32..50, proptest::bool::ANY), 4..40)
        ) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 10.0).collect();
            let labels: Vec<bool> = raw.iter().map(|(_, l)| *l).collect();
            let positives = labels.iter().filter(|&&l| l).count();
            let negatives = labels.len() - positives;
            prop_assume!(positives > 0 && negatives > 0);
            let base = roc_auc_binary(&scores, &labels).unwrap();

            let transformed: Vec<f64> = scores.iter().map(|s| (0.3 * s).exp() + 2.0 * s).collect();
            prop_assert_eq!(roc_auc_binary(&transformed, &labels).unwrap(), base);

            let complement: Vec<bool> = labels.iter().map(|l| !l).collect();
            let flipped = roc_auc_binary(&scores, &complement).unwrap();
            let numerator = |labels: &[bool]| -> f64 {
                let mut acc = 0.0f64;
                for (i, &pos) in labels.iter().enumerate() {
                    for (j, &other) in labels.iter().enumerate() {
                        if pos && !other {
                            if scores[i] > scores[j] {
                                acc += 1.0;
                            } else if scores[i] == scores[j] {
                                acc += 0.5;
                            }
                        }
                    }
                }
                acc
            };
            let pairs = (positives * negatives) as f64;
            prop_assert_eq!(numerator(&labels) + numerator(&complement), pairs);
            prop_assert!((base + flipped - 1.0).abs() <= f64::EPSILON);
        }
    }
}
