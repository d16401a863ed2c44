//! Fixed-capacity experience replay with uniform mini-batch sampling.

use rand::seq::index;
use rand::Rng;

use super::Experience;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    items: Vec<Experience>,
    /// Slot the next insert overwrites once full.
    head: usize,
    inserted: u64,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, items: Vec::new(), head: 0, inserted: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total inserts since creation.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.head] = e;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
    }

    /// `size` distinct items drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        if size > self.items.len() {
            return Err(Error::InvalidArgument(format!(
                "batch of {size} from a memory of {}",
                self.items.len()
            )));
        }
        Ok(index::sample(rng, self.items.len(), size).into_iter().map(|i| &self.items[i]).collect())
    }

    /// Items oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Removes and returns every item, oldest first.
    pub fn drain(&mut self) -> Vec<Experience> {
        let mut items = std::mem::take(&mut self.items);
        items.rotate_left(self.head);
        self.head = 0;
        items
    }
}
