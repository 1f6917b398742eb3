//! Content-addressed embedding cache.
//!
//! Keys are SHA-256 over the length-prefixed model name and text, so the same
//! text embedded by two models never collides. Entries live in memory and,
//! optionally, as one vector file per key under a directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use sha2::{Digest, Sha256};

use super::vecfile::{decode, encode, write_atomic};
use crate::error::{Error, Result};
use crate::vector::Embedding;

pub type CacheKey = [u8; 32];

pub fn cache_key(model: &str, text: &str) -> CacheKey {
    let mut h = Sha256::new();
    h.update((model.len() as u64).to_le_bytes());
    h.update(model.as_bytes());
    h.update((text.len() as u64).to_le_bytes());
    h.update(text.as_bytes());
    h.finalize().into()
}

#[derive(Debug, Default)]
pub struct EmbeddingCache {
    memory: RwLock<HashMap<CacheKey, Embedding>>,
    dir: Option<PathBuf>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Memory cache backed by `dir`, created if missing.
    pub fn persistent(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(EmbeddingCache {
            memory: RwLock::default(),
            dir: Some(dir),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.memory.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn path_for(dir: &Path, key: &CacheKey) -> PathBuf {
        let hex = hex::encode(key);
        dir.join(&hex[..2]).join(format!("{hex}.txve"))
    }

    /// Looks up a key, falling back to disk. A corrupt file is treated as a
    /// miss and overwritten on the next insert.
    pub fn get(&self, key: &CacheKey) -> Option<Embedding> {
        if let Some(e) = self.memory.read().expect("cache lock").get(key) {
            return Some(e.clone());
        }
        let dir = self.dir.as_ref()?;
        let bytes = fs::read(Self::path_for(dir, key)).ok()?;
        match decode(&bytes) {
            Ok(mut file) if file.records.len() == 1 => {
                let (_, e) = file.records.pop().expect("one record");
                self.memory.write().expect("cache lock").insert(*key, e.clone());
                Some(e)
            }
            _ => {
                tracing::warn!(key = %hex::encode(key), "ignoring unreadable cache entry");
                None
            }
        }
    }

    pub fn insert(&self, key: CacheKey, value: Embedding) -> Result<()> {
        if let Some(dir) = &self.dir {
            let path = Self::path_for(dir, &key);
            let parent = path.parent().expect("nested path");
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            let bytes = encode(value.dim(), [(hex::encode(key), value.as_slice())])?;
            write_atomic(&path, &bytes)?;
        }
        self.memory.write().expect("cache lock").insert(key, value);
        Ok(())
    }
}
