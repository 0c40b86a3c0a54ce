use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::stream::LabeledSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferSlot {
    pub sample: LabeledSample,
    /// Model logit recorded when the sample was stored (DER++ targets).
    pub stored_logit: f64,
    pub insertion_index: u64,
}

/// Fixed-capacity replay memory maintained by reservoir sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBuffer {
    capacity: usize,
    slots: Vec<BufferSlot>,
    seen_count: u64,
}

impl MemoryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            slots: Vec::with_capacity(capacity.min(1 << 16)),
            seen_count: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn seen_count(&self) -> u64 {
        self.seen_count
    }

    pub fn slots(&self) -> &[BufferSlot] {
        &self.slots
    }

    /// Offers one sample to the reservoir.
    pub fn insert<R: Rng + ?Sized>(&mut self, sample: LabeledSample, logit: f64, rng: &mut R) {
        if self.capacity == 0 {
            self.seen_count += 1;
            return;
        }
        let slot = BufferSlot {
            sample,
            stored_logit: logit,
            insertion_index: self.seen_count,
        };
        if self.slots.len() < self.capacity {
            self.slots.push(slot);
        } else {
            let u = rng.random_range(0..=self.seen_count);
            if (u as usize) < self.capacity {
                self.slots[u as usize] = slot;
            }
        }
        self.seen_count += 1;
    }

    /// Up to `n` distinct slots chosen uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&BufferSlot> {
        let amount = n.min(self.slots.len());
        if amount == 0 {
            return Vec::new();
        }
        index::sample(rng, self.slots.len(), amount)
            .into_iter()
            .map(|i| &self.slots[i])
            .collect()
    }
}
