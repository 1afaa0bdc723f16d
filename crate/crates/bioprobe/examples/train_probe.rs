//! Train one k-shot linear probe by hand and score its holdout.
//!
//! Builds normalized recording embeddings for three synthetic classes,
//! draws a seeded k-shot split, trains the L-BFGS logistic-regression
//! probe, and prints holdout probabilities and one-vs-all AUCs.
//!
//! Run with: `cargo run --example train_probe`

use std::collections::BTreeMap;

use bioprobe::embedding::l2_normalize;
use bioprobe::experiment::sample_few_shot;
use bioprobe::metrics::{one_vs_all_auc, AucAveraging};
use bioprobe::probe::{predict_proba, train_probe, TrainConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let classes = ["croak", "whistle", "click"];
    let dim = 12;

    // 24 embeddings per class on separate axes, lightly perturbed.
    let mut vectors: BTreeMap<String, Vec<f32>> = BTreeMap::new();
    let mut by_class: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (c, class) in classes.iter().enumerate() {
        for i in 0..24 {
            let mut v = vec![0.0f32; dim];
            for (d, value) in v.iter_mut().enumerate() {
                let center = if d == c * 4 { 1.0 } else { 0.0 };
                *value = center + rng.gen_range(-0.35..0.35);
            }
            let id = format!("{class}-{i:02}");
            vectors.insert(id.clone(), l2_normalize(&v).0);
            by_class.entry(class.to_string()).or_default().push(id);
        }
    }

    let k = 8;
    let (train_ids, holdout_ids) = sample_few_shot(&by_class, k, 2024)?;
    println!(
        "k = {k}: {} training embeddings, {} held out",
        train_ids.len(),
        holdout_ids.len()
    );

    let class_list: Vec<String> = classes.iter().map(|s| s.to_string()).collect();
    let class_of = |id: &str| {
        class_list
            .iter()
            .position(|c| id.starts_with(c.as_str()))
            .expect("id is prefixed by its class")
    };
    let matrix_of = |ids: &std::collections::BTreeSet<String>| {
        let rows: Vec<f64> = ids
            .iter()
            .flat_map(|id| vectors[id].iter().map(|&v| v as f64))
            .collect();
        DMatrix::from_row_slice(ids.len(), dim, &rows)
    };

    let x_train = matrix_of(&train_ids);
    let y_train: Vec<usize> = train_ids.iter().map(|id| class_of(id)).collect();
    let probe = train_probe(&x_train, &y_train, &class_list, &TrainConfig::default())?;
    println!(
        "probe: {} classes x {} dims, bias {:?}",
        probe.n_classes(),
        probe.dim(),
        probe
            .biases
            .iter()
            .map(|b| format!("{b:.3}"))
            .collect::<Vec<_>>()
    );

    let x_holdout = matrix_of(&holdout_ids);
    let y_holdout: Vec<usize> = holdout_ids.iter().map(|id| class_of(id)).collect();
    let probabilities = predict_proba(&probe, &x_holdout)?;

    println!("\nfirst five holdout rows (true class -> probabilities):");
    for (i, id) in holdout_ids.iter().take(5).enumerate() {
        let row: Vec<String> = probabilities
            .row(i)
            .iter()
            .map(|p| format!("{p:.3}"))
            .collect();
        println!("  {id}: {row:?}");
    }

    let auc = one_vs_all_auc(&probabilities, &y_holdout, &class_list, AucAveraging::Macro)?;
    println!("\nper-class one-vs-all AUC:");
    for (class, value) in &auc.per_class {
        println!("  {class}: {value:.4}");
    }
    println!("macro AUC: {:.4}", auc.macro_auc);
    Ok(())
}
