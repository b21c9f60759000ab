//! Request queues for new mesh entities.
//!
//! New vertices and cells are not inserted into the global foreground
//! arrays one by one; they are collected in a queue and flushed in one
//! append. The queue hands out the final index of an entity at request
//! time (existing count + position in the queue), and a key map ensures
//! a given entity is only requested once.

use std::collections::HashMap;
use std::hash::Hash;

#[derive(Debug)]
pub struct RequestQueue<K, V> {
    base: usize,
    items: Vec<V>,
    by_key: HashMap<K, usize>,
}

impl<K: Eq + Hash + Clone, V> RequestQueue<K, V> {
    /// `base` is the number of entities that already exist.
    pub fn new(base: usize) -> Self {
        RequestQueue {
            base,
            items: Vec::new(),
            by_key: HashMap::new(),
        }
    }

    /// Index of an already-requested entity, if any.
    pub fn get(&self, key: &K) -> Option<usize> {
        self.by_key.get(key).map(|&pos| self.base + pos)
    }

    /// Queue a new entity and return its final index. Panics if the key
    /// was already requested (check with `get` first).
    pub fn queue(&mut self, key: K, value: V) -> usize {
        let pos = self.items.len();
        let prev = self.by_key.insert(key, pos);
        assert!(prev.is_none(), "duplicate queue request");
        self.items.push(value);
        self.base + pos
    }

    pub fn get_or_queue(&mut self, key: K, make: impl FnOnce() -> V) -> usize {
        match self.get(&key) {
            Some(idx) => idx,
            None => self.queue(key, make()),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Peek at a queued entity by its final index.
    pub fn peek(&self, index: usize) -> Option<&V> {
        index.checked_sub(self.base).and_then(|p| self.items.get(p))
    }

    /// Drain the requests in insertion order.
    pub fn into_items(self) -> Vec<V> {
        self.items
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_continue_from_base_and_dedupe() {
        let mut q: RequestQueue<(usize, usize), f64> = RequestQueue::new(10);
        assert_eq!(q.queue((1, 2), 0.5), 10);
        assert_eq!(q.queue((3, 4), 1.5), 11);
        assert_eq!(q.get(&(1, 2)), Some(10));
        assert_eq!(q.get_or_queue((1, 2), || unreachable!()), 10);
        assert_eq!(q.peek(11), Some(&1.5));
        let items = q.into_items();
        assert_eq!(items, vec![0.5, 1.5]);
    }
}
