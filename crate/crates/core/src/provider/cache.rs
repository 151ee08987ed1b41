//! Append-only distribution cache.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! header  : b"NDDCACH1"
//! record  : key [32 bytes] | n: u32 | n x f32 | crc32(key | n | payload): u32
//! ```
//!
//! `key` is SHA-256 over `backend_id | 0x00 | len(tokens): u32 | tokens: u32... |
//! masked_index: u32`. A record cut short at the end of the file (interrupted
//! append) is dropped and the file truncated back to the last whole record;
//! a checksum mismatch anywhere is reported as corruption.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use sha2::{Digest, Sha256};

use super::{MaskQuery, ProviderError, TokenDistribution};

pub const CACHE_MAGIC: &[u8; 8] = b"NDDCACH1";

pub(crate) fn cache_key(backend_id: &str, query: &MaskQuery) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(backend_id.as_bytes());
    hasher.update([0u8]);
    hasher.update((query.tokens.len() as u32).to_le_bytes());
    for t in &query.tokens {
        hasher.update(t.to_le_bytes());
    }
    hasher.update((query.masked_index as u32).to_le_bytes());
    hasher.finalize().into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

pub struct DistributionCache {
    entries: RwLock<HashMap<[u8; 32], TokenDistribution>>,
    file: Option<Mutex<File>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl DistributionCache {
    pub fn in_memory() -> Self {
        DistributionCache {
            entries: RwLock::new(HashMap::new()),
            file: None,
            path: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Opens (or creates) a cache file and indexes every record in it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let corrupt = |offset: usize, reason: &str| ProviderError::CorruptCache {
            path: path.display().to_string(),
            offset: offset as u64,
            reason: reason.to_string(),
        };

        if bytes.is_empty() {
            file.write_all(CACHE_MAGIC)?;
            file.flush()?;
        } else if bytes.len() < CACHE_MAGIC.len() || &bytes[..CACHE_MAGIC.len()] != CACHE_MAGIC {
            return Err(corrupt(0, "bad magic"));
        }

        let mut entries = HashMap::new();
        let mut offset = CACHE_MAGIC.len().min(bytes.len());
        let mut good_end = offset;
        while offset < bytes.len() {
            let rest = &bytes[offset..];
            if rest.len() < 36 {
                break;
            }
            let n = u32::from_le_bytes(rest[32..36].try_into().unwrap()) as usize;
            let payload_end = 36 + 4 * n;
            if rest.len() < payload_end + 4 {
                break;
            }
            let stored = u32::from_le_bytes(rest[payload_end..payload_end + 4].try_into().unwrap());
            if crc32fast::hash(&rest[..payload_end]) != stored {
                return Err(corrupt(offset, "checksum mismatch"));
            }
            let key: [u8; 32] = rest[..32].try_into().unwrap();
            let probs: Vec<f32> = rest[36..payload_end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            let dist = TokenDistribution::new(probs)
                .map_err(|e| corrupt(offset, &e.to_string()))?;
            entries.entry(key).or_insert(dist);
            offset += payload_end + 4;
            good_end = offset;
        }
        if good_end < bytes.len() {
            log::warn!(
                "cache {}: dropping {} trailing bytes of an incomplete record",
                path.display(),
                bytes.len() - good_end
            );
            file.set_len(good_end as u64)?;
            file.seek(SeekFrom::End(0))?;
        }

        Ok(DistributionCache {
            entries: RwLock::new(entries),
            file: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.len(),
        }
    }

    /// Looks up a query under the given backend identifier.
    pub fn get(&self, backend_id: &str, query: &MaskQuery) -> Option<TokenDistribution> {
        self.lookup(&cache_key(backend_id, query))
    }

    pub(crate) fn lookup(&self, key: &[u8; 32]) -> Option<TokenDistribution> {
        let found = self.entries.read().unwrap().get(key).cloned();
        if found.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
        found
    }

    /// Stores a distribution for a query. Existing entries are left alone.
    pub fn insert(
        &self,
        backend_id: &str,
        query: &MaskQuery,
        dist: TokenDistribution,
    ) -> Result<(), ProviderError> {
        self.insert_many(vec![(cache_key(backend_id, query), dist)])
    }

    pub(crate) fn insert_many(
        &self,
        batch: Vec<([u8; 32], TokenDistribution)>,
    ) -> Result<(), ProviderError> {
        let mut entries = self.entries.write().unwrap();
        let mut fresh = Vec::new();
        for (key, dist) in batch {
            if !entries.contains_key(&key) && !fresh.iter().any(|(k, _)| *k == key) {
                fresh.push((key, dist));
            }
        }
        if fresh.is_empty() {
            return Ok(());
        }
        if let Some(file) = &self.file {
            let mut file = file.lock().unwrap();
            let mut out = BufWriter::new(&mut *file);
            for (key, dist) in &fresh {
                out.write_all(&encode_record(key, dist))?;
            }
            out.flush()?;
        }
        entries.extend(fresh);
        Ok(())
    }
}

fn encode_record(key: &[u8; 32], dist: &TokenDistribution) -> Vec<u8> {
    let probs = dist.probs();
    let mut buf = Vec::with_capacity(40 + 4 * probs.len());
    buf.extend_from_slice(key);
    buf.extend_from_slice(&(probs.len() as u32).to_le_bytes());
    for p in probs {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

impl std::fmt::Debug for DistributionCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistributionCache")
            .field("path", &self.path)
            .field("stats", &self.stats())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f32]) -> TokenDistribution {
        TokenDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empty_file_gets_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let cache = DistributionCache::open(&path).unwrap();
        assert!(cache.is_empty());
        assert_eq!(std::fs::read(&path).unwrap(), CACHE_MAGIC);
    }

    #[test]
    fn reopen_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let q = MaskQuery::new(vec![7, 8, 9], 2).unwrap();
        let d = dist(&[0.1, 0.2, 0.3, 0.4]);
        {
            let cache = DistributionCache::open(&path).unwrap();
            cache.insert("bert", &q, d.clone()).unwrap();
            // second insert of the same key is a no-op
            cache.insert("bert", &q, dist(&[0.25; 4])).unwrap();
        }
        let cache = DistributionCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        let back = cache.get("bert", &q).unwrap();
        let bits: Vec<u32> = back.probs().iter().map(|p| p.to_bits()).collect();
        let orig: Vec<u32> = d.probs().iter().map(|p| p.to_bits()).collect();
        assert_eq!(bits, orig);
        assert!(cache.get("roberta", &q).is_none());
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        let q1 = MaskQuery::new(vec![1], 0).unwrap();
        let q2 = MaskQuery::new(vec![2], 0).unwrap();
        {
            let cache = DistributionCache::open(&path).unwrap();
            cache.insert("m", &q1, dist(&[0.5, 0.5])).unwrap();
            cache.insert("m", &q2, dist(&[0.5, 0.5])).unwrap();
        }
        let len = std::fs::metadata(&path).unwrap().len();
        let f = OpenOptions::new().write(true).open(&path).unwrap();
        f.set_len(len - 3).unwrap();
        drop(f);
        let cache = DistributionCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        cache.insert("m", &q2, dist(&[0.5, 0.5])).unwrap();
        drop(cache);
        assert_eq!(DistributionCache::open(&path).unwrap().len(), 2);
    }

    #[test]
    fn flipped_byte_is_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        {
            let cache = DistributionCache::open(&path).unwrap();
            cache
                .insert("m", &MaskQuery::new(vec![1], 0).unwrap(), dist(&[0.5, 0.5]))
                .unwrap();
        }
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[CACHE_MAGIC.len() + 40] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            DistributionCache::open(&path),
            Err(ProviderError::CorruptCache { offset: 8, .. })
        ));
    }

    #[test]
    fn bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        std::fs::write(&path, b"not a cache").unwrap();
        assert!(DistributionCache::open(&path).is_err());
    }
}
