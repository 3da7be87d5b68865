use std::sync::{Arc, RwLock};

use emoheal_core::IvfIndex;

/// Read-mostly handle to the live index. Swaps replace the whole index at once.
#[derive(Debug, Clone, Default)]
pub struct SharedIndex {
    inner: Arc<RwLock<Option<Arc<IvfIndex>>>>,
}

impl SharedIndex {
    pub fn new(index: IvfIndex) -> Self {
        let shared = Self::default();
        shared.swap(index);
        shared
    }

    /// The current index, if one is loaded. Callers keep using the returned
    /// snapshot even if a swap happens meanwhile.
    pub fn load(&self) -> Option<Arc<IvfIndex>> {
        self.inner.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Installs `index` and returns the previous one.
    pub fn swap(&self, index: IvfIndex) -> Option<Arc<IvfIndex>> {
        let mut guard = self.inner.write().unwrap_or_else(|e| e.into_inner());
        guard.replace(Arc::new(index))
    }

    pub fn clear(&self) -> Option<Arc<IvfIndex>> {
        self.inner.write().unwrap_or_else(|e| e.into_inner()).take()
    }

    pub fn corpus_size(&self) -> usize {
        self.load().map_or(0, |i| i.len())
    }
}
