use std::collections::BTreeMap;

/// Holds out-of-order results until their index is next.
#[derive(Debug)]
pub struct ReorderBuffer<T> {
    pending: BTreeMap<u64, T>,
    next: u64,
}

impl<T> Default for ReorderBuffer<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> ReorderBuffer<T> {
    pub fn new() -> Self {
        Self {
            pending: BTreeMap::new(),
            next: 0,
        }
    }

    /// Index that will be released next.
    pub fn next_index(&self) -> u64 {
        self.next
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Panics on duplicate or already-released indices.
    pub fn insert(&mut self, index: u64, item: T) {
        assert!(index >= self.next, "index {index} already released");
        let prev = self.pending.insert(index, item);
        assert!(prev.is_none(), "duplicate index {index}");
    }

    pub fn pop_ready(&mut self) -> Option<T> {
        let item = self.pending.remove(&self.next)?;
        self.next += 1;
        Some(item)
    }
}
