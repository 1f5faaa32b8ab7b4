//! Byte-bounded LRU cache of fitted embeddings shared between cells and plans.

use std::sync::{Arc, Mutex};

use crate::embed::FittedEmbedding;

pub struct EmbeddingCache {
    budget_bytes: usize,
    entries: Mutex<Vec<(String, Arc<FittedEmbedding>, usize)>>,
}

impl EmbeddingCache {
    pub fn new(budget_bytes: usize) -> Self {
        EmbeddingCache {
            budget_bytes,
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn disabled() -> Self {
        EmbeddingCache::new(0)
    }

    pub fn get(&self, key: &str) -> Option<Arc<FittedEmbedding>> {
        let mut entries = self.entries.lock().expect("cache lock");
        let pos = entries.iter().position(|(k, _, _)| k == key)?;
        let entry = entries.remove(pos);
        let hit = Arc::clone(&entry.1);
        entries.push(entry);
        Some(hit)
    }

    pub fn insert(&self, key: String, value: Arc<FittedEmbedding>) {
        let bytes = value.model.approx_bytes();
        if bytes > self.budget_bytes {
            return;
        }
        let mut entries = self.entries.lock().expect("cache lock");
        entries.retain(|(k, _, _)| *k != key);
        entries.push((key, value, bytes));
        let mut total: usize = entries.iter().map(|e| e.2).sum();
        while total > self.budget_bytes {
            total -= entries.remove(0).2;
        }
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for EmbeddingCache {
    fn default() -> Self {
        EmbeddingCache::new(1 << 30)
    }
}
