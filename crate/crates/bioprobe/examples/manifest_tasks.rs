//! Load a manifest and derive labels for several classification tasks.
//!
//! Builds a small DCLDE-style annotation manifest, then shows how one raw
//! label vocabulary serves three tasks: species (ecotypes merged), ecotype
//! (orcas only), and known-species (uncertain orcas dropped).
//!
//! Run with: `cargo run --example manifest_tasks`

use bioprobe::manifest::{
    class_counts, derive_task_labels, load_manifest, write_manifest, DatasetManifest,
    LabeledRecording, TaskSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("bioprobe-example-manifest");
    std::fs::create_dir_all(&dir)?;

    // A miniature annotation set with the raw labels a DCLDE-style
    // vocabulary uses.
    let raw_labels = [
        "orca-SRKW",
        "orca-SRKW",
        "orca-TKW",
        "orca-NRKW",
        "orca-OKW",
        "orca-SAR",
        "orca-uncertain",
        "humpback",
        "humpback",
        "abiotic",
        "undetermined-bio",
    ];
    let recordings = raw_labels
        .iter()
        .enumerate()
        .map(|(i, label)| LabeledRecording {
            recording_id: format!("rec-{i:03}"),
            audio_uri: format!("audio/rec-{i:03}.wav"),
            duration_s: 0.73,
            raw_label: label.to_string(),
        })
        .collect();
    let manifest = DatasetManifest::new("dclde-mini", recordings)?;

    let manifest_path = dir.join("manifest.csv");
    write_manifest(&manifest_path, &manifest)?;
    let loaded = load_manifest(&manifest_path)?;
    println!(
        "loaded {} recordings from {}",
        loaded.len(),
        manifest_path.display()
    );

    for task in [
        TaskSpec::dclde_species(),
        TaskSpec::dclde_ecotype(),
        TaskSpec::dclde_known_species(),
    ] {
        let labels = derive_task_labels(&loaded, &task)?;
        let counts = class_counts(&labels);
        println!(
            "\ntask `{}`: {} retained, {} dropped",
            task.task_id,
            labels.len(),
            loaded.len() - labels.len()
        );
        for (label, count) in counts {
            println!("  {label}: {count}");
        }
    }

    // Task specs serialize to JSON for use with the CLI.
    let task_path = dir.join("dclde-species.json");
    TaskSpec::dclde_species().save(&task_path)?;
    println!("\nwrote task spec to {}", task_path.display());
    Ok(())
}
