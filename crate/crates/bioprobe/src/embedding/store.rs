//! Binary embedding store: a persistent map from recording id to vector,
//! plus exact nearest-neighbor search.
//!
//! File layout (little-endian): magic `EMBS`, u32 version = 1, u32 dim,
//! u64 count, then one entry per record: u16 id length, UTF-8 id bytes,
//! dim f32 values. Precomputed window files share the header; each entry
//! additionally carries a u32 window index between the id and the vector.
//! Vectors round-trip bit-exactly.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::RecordingEmbedding;

pub const STORE_MAGIC: [u8; 4] = *b"EMBS";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic (not an embedding store)")]
    Magic { path: String },
    #[error("{path}: unsupported store version {got} (expected {STORE_VERSION})")]
    Version { path: String, got: u32 },
    #[error("{path}: truncated payload while reading entry {entry}")]
    Truncated { path: String, entry: u64 },
    #[error("{path}: {extra} trailing byte(s) after the declared {count} entries")]
    TrailingBytes {
        path: String,
        count: u64,
        extra: usize,
    },
    #[error("{path}: entry {entry} has an invalid UTF-8 id")]
    BadId { path: String, entry: u64 },
    #[error("duplicate recording id `{0}` in store")]
    DuplicateId(String),
    #[error("vector for `{id}` has dimension {got}, store expects {expected}")]
    DimMismatch {
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("recording id `{0}` is too long to serialize (max 65535 bytes)")]
    IdTooLong(String),
    #[error("store is empty")]
    EmptyStore,
    #[error("query has dimension {got}, store expects {expected}")]
    QueryDim { expected: usize, got: usize },
    #[error("top_k must be >= 1")]
    ZeroTopK,
}

/// In-memory embedding store with a fixed vector dimension and unique ids.
/// Iteration order is always sorted by id, so writes are reproducible
/// regardless of insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    entries: BTreeMap<String, RecordingEmbedding>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "store dimension must be positive");
        Self {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, embedding: RecordingEmbedding) -> Result<(), StoreError> {
        if embedding.vector.len() != self.dim {
            return Err(StoreError::DimMismatch {
                id: embedding.recording_id.clone(),
                expected: self.dim,
                got: embedding.vector.len(),
            });
        }
        if self.entries.contains_key(&embedding.recording_id) {
            return Err(StoreError::DuplicateId(embedding.recording_id));
        }
        self.entries
            .insert(embedding.recording_id.clone(), embedding);
        Ok(())
    }

    pub fn get(&self, recording_id: &str) -> Option<&RecordingEmbedding> {
        self.entries.get(recording_id)
    }

    pub fn contains(&self, recording_id: &str) -> bool {
        self.entries.contains_key(recording_id)
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = &RecordingEmbedding> {
        self.entries.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_header(w: &mut impl Write, dim: usize, count: u64, path: &Path) -> Result<(), StoreError> {
    w.write_all(&STORE_MAGIC).map_err(|e| io_err(path, e))?;
    w.write_all(&STORE_VERSION.to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(&(dim as u32).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(&count.to_le_bytes()).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn write_id(w: &mut impl Write, id: &str, path: &Path) -> Result<(), StoreError> {
    let bytes = id.as_bytes();
    if bytes.len() > u16::MAX as usize {
        return Err(StoreError::IdTooLong(id.to_string()));
    }
    w.write_all(&(bytes.len() as u16).to_le_bytes())
        .map_err(|e| io_err(path, e))?;
    w.write_all(bytes).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn write_vector(w: &mut impl Write, vector: &[f32], path: &Path) -> Result<(), StoreError> {
    let mut buf = Vec::with_capacity(vector.len() * 4);
    for &v in vector {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| io_err(path, e))
}

/// Persists a store; entries are written in id order.
pub fn store_write(path: impl AsRef<Path>, store: &EmbeddingStore) -> Result<(), StoreError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_header(&mut w, store.dim, store.len() as u64, path)?;
    for entry in store.iter() {
        write_id(&mut w, &entry.recording_id, path)?;
        write_vector(&mut w, &entry.vector, path)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

struct HeaderInfo {
    dim: usize,
    count: u64,
}

fn read_header(r: &mut impl Read, path: &Path) -> Result<HeaderInfo, StoreError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| StoreError::Magic {
            path: path.display().to_string(),
        })?;
    if magic != STORE_MAGIC {
        return Err(StoreError::Magic {
            path: path.display().to_string(),
        });
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
    let version = u32::from_le_bytes(u32buf);
    if version != STORE_VERSION {
        return Err(StoreError::Version {
            path: path.display().to_string(),
            got: version,
        });
    }
    r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(|e| io_err(path, e))?;
    let count = u64::from_le_bytes(u64buf);
    Ok(HeaderInfo { dim, count })
}

fn truncated(path: &Path, entry: u64) -> StoreError {
    StoreError::Truncated {
        path: path.display().to_string(),
        entry,
    }
}

fn read_id(r: &mut impl Read, path: &Path, entry: u64) -> Result<String, StoreError> {
    let mut len_buf = [0u8; 2];
    r.read_exact(&mut len_buf)
        .map_err(|_| truncated(path, entry))?;
    let len = u16::from_le_bytes(len_buf) as usize;
    let mut id_bytes = vec![0u8; len];
    r.read_exact(&mut id_bytes)
        .map_err(|_| truncated(path, entry))?;
    String::from_utf8(id_bytes).map_err(|_| StoreError::BadId {
        path: path.display().to_string(),
        entry,
    })
}

fn read_vector(
    r: &mut impl Read,
    dim: usize,
    path: &Path,
    entry: u64,
) -> Result<Vec<f32>, StoreError> {
    let mut buf = vec![0u8; dim * 4];
    r.read_exact(&mut buf).map_err(|_| truncated(path, entry))?;
    Ok(buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn expect_eof(r: &mut impl Read, path: &Path, count: u64) -> Result<(), StoreError> {
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| io_err(path, e))?;
    if !rest.is_empty() {
        return Err(StoreError::TrailingBytes {
            path: path.display().to_string(),
            count,
            extra: rest.len(),
        });
    }
    Ok(())
}

/// Loads a store written by [`store_write`]; vectors are bit-exact.
pub fn store_read(path: impl AsRef<Path>) -> Result<EmbeddingStore, StoreError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_header(&mut r, path)?;
    let mut store = EmbeddingStore::new(header.dim.max(1));
    if header.dim == 0 {
        return Err(StoreError::Magic {
            path: path.display().to_string(),
        });
    }
    for entry in 0..header.count {
        let id = read_id(&mut r, path, entry)?;
        let vector = read_vector(&mut r, header.dim, path, entry)?;
        let norm: f64 = vector.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>();
        let normalized = (norm.sqrt() - 1.0).abs() <= 1e-6;
        store.insert(RecordingEmbedding {
            recording_id: id,
            vector,
            normalized,
        })?;
    }
    expect_eof(&mut r, path, header.count)?;
    Ok(store)
}

/// Writes a precomputed per-window embedding file: the store header followed
/// by (id, u32 window index, vector) entries in key order.
pub fn write_window_file(
    path: impl AsRef<Path>,
    dim: usize,
    entries: &BTreeMap<(String, u32), Vec<f32>>,
) -> Result<(), StoreError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_header(&mut w, dim, entries.len() as u64, path)?;
    for ((id, window_index), vector) in entries {
        if vector.len() != dim {
            return Err(StoreError::DimMismatch {
                id: id.clone(),
                expected: dim,
                got: vector.len(),
            });
        }
        write_id(&mut w, id, path)?;
        w.write_all(&window_index.to_le_bytes())
            .map_err(|e| io_err(path, e))?;
        write_vector(&mut w, vector, path)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Loads a precomputed per-window embedding file. Returns the dimension and
/// the `(recording_id, window_index)`-keyed vectors.
pub fn read_window_file(
    path: impl AsRef<Path>,
) -> Result<(usize, BTreeMap<(String, u32), Vec<f32>>), StoreError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let header = read_header(&mut r, path)?;
    let mut entries = BTreeMap::new();
    for entry in 0..header.count {
        let id = read_id(&mut r, path, entry)?;
        let mut idx_buf = [0u8; 4];
        r.read_exact(&mut idx_buf)
            .map_err(|_| truncated(path, entry))?;
        let window_index = u32::from_le_bytes(idx_buf);
        let vector = read_vector(&mut r, header.dim, path, entry)?;
        entries.insert((id, window_index), vector);
    }
    expect_eof(&mut r, path, header.count)?;
    Ok((header.dim, entries))
}

/// Exact top-k by cosine similarity (the dot product once both sides are
/// normalized). Results are sorted by descending similarity, ties broken by
/// lexicographic recording id; `top_k` larger than the store returns all
/// entries.
pub fn nn_search(
    store: &EmbeddingStore,
    query: &[f32],
    top_k: usize,
) -> Result<Vec<(String, f64)>, StoreError> {
    if store.is_empty() {
        return Err(StoreError::EmptyStore);
    }
    if top_k == 0 {
        return Err(StoreError::ZeroTopK);
    }
    if query.len() != store.dim() {
        return Err(StoreError::QueryDim {
            expected: store.dim(),
            got: query.len(),
        });
    }
    let mut scored: Vec<(String, f64)> = store
        .iter()
        .map(|e| {
            (
                e.recording_id.clone(),
                cosine_similarity(query, &e.vector),
            )
        })
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("similarities are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(top_k);
    Ok(scored)
}

fn cosine_similarity(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    let denom = na.sqrt() * nb.sqrt();
    if denom <= 0.0 {
        return 0.0;
    }
    dot / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::l2_normalize;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn entry(id: &str, vector: Vec<f32>) -> RecordingEmbedding {
        let norm: f64 = vector.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        RecordingEmbedding {
            recording_id: id.to_string(),
            vector,
            normalized: (norm - 1.0).abs() <= 1e-6,
        }
    }

    fn store_with(dim: usize, items: &[(&str, Vec<f32>)]) -> EmbeddingStore {
        let mut store = EmbeddingStore::new(dim);
        for (id, v) in items {
            store.insert(entry(id, v.clone())).unwrap();
        }
        store
    }

    #[test]
    fn three_entry_store_roundtrips() {
        let store = store_with(
            2,
            &[
                ("a", vec![1.0, 0.0]),
                ("b", vec![0.0, 1.0]),
                ("c", vec![0.6, 0.8]),
            ],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.embs");
        store_write(&path, &store).unwrap();
        let loaded = store_read(&path).unwrap();
        assert_eq!(loaded, store);
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.embs");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(matches!(store_read(&path), Err(StoreError::Magic { .. })));
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v9.embs");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"EMBS");
        bytes.extend_from_slice(&9u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&0u64.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            store_read(&path),
            Err(StoreError::Version { got: 9, .. })
        ));
    }

    #[test]
    fn truncated_payload_is_detected() {
        let store = store_with(3, &[("a", vec![1.0, 2.0, 3.0])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.embs");
        store_write(&path, &store).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            store_read(&path),
            Err(StoreError::Truncated { .. })
        ));
    }

    #[test]
    fn trailing_bytes_are_detected() {
        let store = store_with(1, &[("a", vec![1.0])]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.embs");
        store_write(&path, &store).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0u8; 3]);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            store_read(&path),
            Err(StoreError::TrailingBytes { extra: 3, .. })
        ));
    }

    #[test]
    fn header_records_declared_dimension() {
        // A store shaped like Perch 2.0 output (dim 1536).
        let store = store_with(
            1536,
            &[("p1", vec![0.5; 1536]), ("p2", vec![-0.25; 1536])],
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("perch2.embs");
        store_write(&path, &store).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        assert_eq!(dim, 1536);
        let loaded = store_read(&path).unwrap();
        assert_eq!(loaded.dim(), 1536);
        assert_eq!(loaded.len(), 2);
    }

    #[test]
    fn dim_mismatch_and_duplicates_are_rejected_on_insert() {
        let mut store = EmbeddingStore::new(2);
        store.insert(entry("a", vec![1.0, 0.0])).unwrap();
        assert!(matches!(
            store.insert(entry("a", vec![0.0, 1.0])),
            Err(StoreError::DuplicateId(_))
        ));
        assert!(matches!(
            store.insert(entry("b", vec![1.0])),
            Err(StoreError::DimMismatch { .. })
        ));
    }

    #[test]
    fn window_file_roundtrips() {
        let mut entries = BTreeMap::new();
        entries.insert(("r1".to_string(), 0u32), vec![1.0f32, -1.0]);
        entries.insert(("r1".to_string(), 1u32), vec![0.5f32, 0.25]);
        entries.insert(("r2".to_string(), 0u32), vec![f32::MIN_POSITIVE, 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("windows.embs");
        write_window_file(&path, 2, &entries).unwrap();
        let (dim, loaded) = read_window_file(&path).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(loaded, entries);
    }

    #[test]
    fn self_match_ranks_first_with_unit_similarity() {
        let (unit, _) = l2_normalize(&[0.2, -0.4, 0.9]);
        let store = store_with(
            3,
            &[
                ("target", unit.clone()),
                ("other", l2_normalize(&[1.0, 0.0, 0.0]).0),
            ],
        );
        let hits = nn_search(&store, &unit, 1).unwrap();
        assert_eq!(hits[0].0, "target");
        assert!((hits[0].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn top_k_is_clamped_to_store_size() {
        let store = store_with(2, &[("a", vec![1.0, 0.0]), ("b", vec![0.0, 1.0])]);
        let hits = nn_search(&store, &[1.0, 0.0], 10).unwrap();
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn empty_store_search_errors() {
        let store = EmbeddingStore::new(2);
        assert!(matches!(
            nn_search(&store, &[1.0, 0.0], 1),
            Err(StoreError::EmptyStore)
        ));
    }

    #[test]
    fn nn_search_matches_brute_force_on_random_store() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let dim = 6;
        let items: Vec<(String, Vec<f32>)> = (0..50)
            .map(|i| {
                let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
                (format!("id{i:02}"), l2_normalize(&v).0)
            })
            .collect();
        let refs: Vec<(&str, Vec<f32>)> =
            items.iter().map(|(id, v)| (id.as_str(), v.clone())).collect();
        let store = store_with(dim, &refs);
        let query: Vec<f32> =
            l2_normalize(&(0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect::<Vec<_>>()).0;

        // Brute-force oracle: full similarity list, full sort, same ordering rule.
        let mut oracle: Vec<(String, f64)> = items
            .iter()
            .map(|(id, v)| {
                let mut dot = 0.0f64;
                let mut qq = 0.0f64;
                let mut vv = 0.0f64;
                for (&a, &b) in query.iter().zip(v) {
                    dot += a as f64 * b as f64;
                    qq += a as f64 * a as f64;
                    vv += b as f64 * b as f64;
                }
                (id.clone(), dot / (qq.sqrt() * vv.sqrt()))
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

        for top_k in [1, 5, 50] {
            let hits = nn_search(&store, &query, top_k).unwrap();
            assert_eq!(hits.len(), top_k.min(items.len()));
            for (hit, expected) in hits.iter().zip(&oracle) {
                assert_eq!(hit.0, expected.0);
                assert!((hit.1 - expected.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ranking_is_stable_under_appending_weaker_entries() {
        let (q, _) = l2_normalize(&[1.0, 1.0]);
        let mut store = store_with(
            2,
            &[
                ("close", l2_normalize(&[1.0, 0.9]).0),
                ("closer", l2_normalize(&[1.0, 1.01]).0),
            ],
        );
        let before = nn_search(&store, &q, 2).unwrap();
        store
            .insert(entry("far", l2_normalize(&[-1.0, 0.1]).0))
            .unwrap();
        let after = nn_search(&store, &q, 2).unwrap();
        assert_eq!(before, after);
    }

    proptest! {
        // Bit-exact round-trip for arbitrary finite vectors, subnormals included.
        #[test]
        fn store_roundtrip_is_bit_exact(
            vectors in proptest::collection::vec(
                proptest::collection::vec(
                    proptest::num::f32::NORMAL | proptest::num::f32::SUBNORMAL | proptest::num::f32::ZERO,
                    4,
                ),
                1..12,
            )
        ) {
            let mut store = EmbeddingStore::new(4);
            for (i, v) in vectors.iter().enumerate() {
                store.insert(entry(&format!("id{i}"), v.clone())).unwrap();
            }
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("prop.embs");
            store_write(&path, &store).unwrap();
            let loaded = store_read(&path).unwrap();
            for (a, b) in loaded.iter().zip(store.iter()) {
                prop_assert_eq!(a.recording_id.as_str(), b.recording_id.as_str());
                for (x, y) in a.vector.iter().zip(&b.vector) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
