//! Append-only on-disk embedding cache.
//!
//! File layout: magic bytes `EMB1`, then repeated records of
//! `[8-byte LE content hash][4-byte LE dimension][dimension x 8-byte LE f64]`.
//! The full file is indexed in memory at open; writes append and flush one
//! record at a time so an interrupted run resumes from the last complete
//! record.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};

use super::{EmbeddingError, EmbeddingVector};

const MAGIC: &[u8; 4] = b"EMB1";

/// Cache key: first eight bytes (little-endian) of
/// `SHA-256(provider_id || 0x00 || text)`.
pub fn content_hash(provider_id: &str, text: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(provider_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

/// Embedding store keyed by content hash. The index loaded at open is read
/// without locking; entries added afterwards live in a synchronized delta
/// map, and file appends are serialized through a single writer.
pub struct EmbeddingCache {
    base: HashMap<u64, EmbeddingVector>,
    delta: RwLock<HashMap<u64, EmbeddingVector>>,
    writer: Option<Mutex<BufWriter<File>>>,
}

impl EmbeddingCache {
    /// In-memory cache with no backing file.
    pub fn ephemeral() -> EmbeddingCache {
        EmbeddingCache {
            base: HashMap::new(),
            delta: RwLock::new(HashMap::new()),
            writer: None,
        }
    }

    /// Opens (or creates) a cache file and loads its index. A trailing
    /// partial record from an interrupted write is truncated away.
    pub fn open(path: impl AsRef<Path>) -> Result<EmbeddingCache, EmbeddingError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)?;

        let len = file.metadata()?.len();
        let mut base = HashMap::new();
        let mut valid_len;
        if len == 0 {
            file.write_all(MAGIC)?;
            file.flush()?;
            valid_len = MAGIC.len() as u64;
        } else {
            let mut reader = BufReader::new(&mut file);
            let mut magic = [0u8; 4];
            reader.read_exact(&mut magic)?;
            if &magic != MAGIC {
                return Err(EmbeddingError::BadMagic);
            }
            valid_len = MAGIC.len() as u64;
            loop {
                match read_record(&mut reader) {
                    Ok(Some((hash, vector, record_len))) => {
                        base.insert(hash, vector);
                        valid_len += record_len;
                    }
                    Ok(None) => break,
                    // Partial trailing record: keep what we have.
                    Err(_) => break,
                }
            }
        }
        if valid_len < len {
            file.set_len(valid_len)?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(EmbeddingCache {
            base,
            delta: RwLock::new(HashMap::new()),
            writer: Some(Mutex::new(BufWriter::new(file))),
        })
    }

    pub fn len(&self) -> usize {
        self.base.len() + self.delta.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, hash: u64) -> Option<EmbeddingVector> {
        if let Some(v) = self.base.get(&hash) {
            return Some(v.clone());
        }
        self.delta.read().expect("cache lock").get(&hash).cloned()
    }

    pub fn contains(&self, hash: u64) -> bool {
        self.base.contains_key(&hash) || self.delta.read().expect("cache lock").contains_key(&hash)
    }

    /// Inserts a vector, appending it to the backing file when one exists.
    /// Re-inserting an existing hash is a no-op.
    pub fn put(&self, hash: u64, vector: &EmbeddingVector) -> Result<(), EmbeddingError> {
        if self.contains(hash) {
            return Ok(());
        }
        if let Some(writer) = &self.writer {
            let mut writer = writer.lock().expect("cache writer lock");
            writer.write_all(&hash.to_le_bytes())?;
            writer.write_all(&(vector.dimension() as u32).to_le_bytes())?;
            for value in vector.values() {
                writer.write_all(&value.to_le_bytes())?;
            }
            writer.flush()?;
        }
        self.delta
            .write()
            .expect("cache lock")
            .insert(hash, vector.clone());
        Ok(())
    }
}

type RecordRead = Result<Option<(u64, EmbeddingVector, u64)>, std::io::Error>;

fn read_record(reader: &mut impl Read) -> RecordRead {
    let mut hash_buf = [0u8; 8];
    match reader.read_exact(&mut hash_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let mut dim_buf = [0u8; 4];
    reader.read_exact(&mut dim_buf)?;
    let dimension = u32::from_le_bytes(dim_buf) as usize;
    let mut values = vec![0.0f64; dimension];
    let mut value_buf = [0u8; 8];
    for value in &mut values {
        reader.read_exact(&mut value_buf)?;
        *value = f64::from_le_bytes(value_buf);
    }
    let record_len = 8 + 4 + 8 * dimension as u64;
    Ok(Some((
        u64::from_le_bytes(hash_buf),
        EmbeddingVector { values },
        record_len,
    )))
}
