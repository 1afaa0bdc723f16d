//! Embed recordings with the synthetic provider and search the store.
//!
//! Generates tone recordings at two loudness levels, embeds each one
//! (window, pool, normalize), persists the store, and runs exact cosine
//! nearest-neighbor search to find recordings similar to a query.
//!
//! Run with: `cargo run --example embed_and_search`

use bioprobe::audio::{read_wav, write_wav_pcm16, AudioClip, ModelSpec, OutputLayout};
use bioprobe::embedding::{
    embed_recording, nn_search, store_read, store_write, EmbeddingStore, SyntheticProvider,
};

fn tone(rate: u32, seconds: f64, freq: f64, amplitude: f32) -> Vec<f32> {
    let n = (seconds * rate as f64) as usize;
    (0..n)
        .map(|i| amplitude * (2.0 * std::f64::consts::PI * freq * i as f64 / rate as f64).sin() as f32)
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("bioprobe-example-embed");
    std::fs::create_dir_all(&dir)?;

    let model = ModelSpec {
        name: "synthetic-demo".into(),
        sample_rate_hz: 16000,
        window_s: 1.0,
        embedding_dim: 16,
        output_layout: OutputLayout::Vector,
    };
    let provider = SyntheticProvider::new(model.clone(), 42);

    let mut store = EmbeddingStore::new(model.embedding_dim);
    for i in 0..10 {
        // Two groups: quiet tones and loud tones.
        let loud = i % 2 == 1;
        let amplitude = if loud { 0.5 } else { 0.05 };
        let id = format!("{}-{i:02}", if loud { "loud" } else { "quiet" });

        // Round-trip through a real WAV file, as the CLI would.
        let wav_path = dir.join(format!("{id}.wav"));
        let samples = tone(16000, 2.5, 300.0 + 40.0 * i as f64, amplitude);
        write_wav_pcm16(&wav_path, 16000, &[&samples])?;
        let clip = read_wav(&wav_path)?;

        let embedding = embed_recording(&provider, &id, &clip)?;
        store.insert(embedding)?;
    }

    let store_path = dir.join("demo.embs");
    store_write(&store_path, &store)?;
    let store = store_read(&store_path)?;
    println!(
        "store: {} embeddings, dim {}, at {}",
        store.len(),
        store.dim(),
        store_path.display()
    );

    // Query with a fresh loud recording: loud entries should rank first.
    let query_clip = AudioClip::new(16000, tone(16000, 2.5, 500.0, 0.5))?;
    let query = embed_recording(&provider, "query", &query_clip)?;
    let hits = nn_search(&store, &query.vector, 5)?;
    println!("\ntop 5 neighbors of a loud query:");
    for (id, similarity) in hits {
        println!("  {id}: {similarity:.4}");
    }
    Ok(())
}
