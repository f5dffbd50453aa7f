//! Max-priority queue over directed message slots with FIFO tie-breaking
//! and lazy deletion.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(PartialEq)]
struct Entry {
    priority: f64,
    seq: u64,
    slot: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub(super) struct Schedule {
    heap: BinaryHeap<Entry>,
    /// Live `(priority, seq)` per slot; heap entries that disagree are stale.
    live: Vec<Option<(f64, u64)>>,
    seq: u64,
    pending: usize,
}

impl Schedule {
    pub fn new(slots: usize) -> Self {
        Schedule { heap: BinaryHeap::new(), live: vec![None; slots], seq: 0, pending: 0 }
    }

    /// Queues `slot`; an already queued slot keeps the larger priority.
    pub fn push(&mut self, slot: usize, priority: f64) {
        match self.live[slot] {
            Some((p, _)) if p >= priority => return,
            Some(_) => {}
            None => self.pending += 1,
        }
        self.seq += 1;
        self.live[slot] = Some((priority, self.seq));
        self.heap.push(Entry { priority, seq: self.seq, slot });
    }

    pub fn pop(&mut self) -> Option<usize> {
        while let Some(e) = self.heap.pop() {
            if self.live[e.slot] == Some((e.priority, e.seq)) {
                self.live[e.slot] = None;
                self.pending -= 1;
                return Some(e.slot);
            }
        }
        None
    }

    pub fn is_empty(&self) -> bool {
        self.pending == 0
    }

    pub fn max_priority(&mut self) -> Option<f64> {
        while let Some(e) = self.heap.peek() {
            if self.live[e.slot] == Some((e.priority, e.seq)) {
                return Some(e.priority);
            }
            self.heap.pop();
        }
        None
    }
}
