//! Windowed containers over a monotonically growing index space.
//!
//! All three structures hand out indices from a counter that only grows:
//! `add` returns the current `next` and bumps it, and storage is kept only for
//! the live window `[first, next)`.
//!
//! * [`SlidingArray`] stores a contiguous window; only the oldest element can
//!   be removed. Storage is a short directory of fixed-size chunks, and a
//!   chunk is released as soon as `first` moves past it.
//! * [`SlidingMap`] combines a sliding bit-window (presence per index) with a
//!   key to index hash map, so elements can be removed by key. A set bit is
//!   always kept at `next` as a sentinel, so the forward scan that advances
//!   `first` never needs a bound check.
//! * [`IdxSlidingMap`] keeps optional elements instead of bits, so positions
//!   are readable by index and `index(e)` is a map lookup.
//!
//! Every structure counts elementary steps (chunk allocations, word scans,
//! map probes) so that amortized cost can be checked by instrumentation.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use thiserror::Error;

/// Number of elements per storage chunk.
pub const CHUNK_CAPACITY: usize = 256;

const CHUNK: u64 = CHUNK_CAPACITY as u64;
const WORD_BITS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SlidingError {
    #[error("operation on an empty window")]
    Empty,
    #[error("index {index} outside window [{first}, {next})")]
    OutOfWindow { index: u64, first: u64, next: u64 },
    #[error("key already present at index {index}")]
    DuplicateKey { index: u64 },
}

/// A growable array that only keeps the window `[first, next)`.
#[derive(Debug, Clone)]
pub struct SlidingArray<E> {
    first: u64,
    next: u64,
    chunks: VecDeque<Vec<Option<E>>>,
    steps: u64,
}

impl<E> Default for SlidingArray<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> SlidingArray<E> {
    pub fn new() -> Self {
        Self {
            first: 0,
            next: 0,
            chunks: VecDeque::new(),
            steps: 0,
        }
    }

    /// Appends `e` and returns the index it will occupy until removed.
    pub fn add(&mut self, e: E) -> u64 {
        self.steps += 1;
        if self.next.is_multiple_of(CHUNK) {
            self.steps += 1;
            self.chunks.push_back(Vec::with_capacity(CHUNK_CAPACITY));
        }
        let chunk = self
            .chunks
            .back_mut()
            .expect("a chunk always exists for the slot at next");
        debug_assert_eq!(chunk.len() as u64, self.next % CHUNK);
        chunk.push(Some(e));
        let index = self.next;
        self.next += 1;
        index
    }

    /// Removes and returns the element at `first`.
    pub fn remove(&mut self) -> Result<E, SlidingError> {
        if self.first == self.next {
            return Err(SlidingError::Empty);
        }
        self.steps += 1;
        let offset = (self.first % CHUNK) as usize;
        let e = self.chunks[0][offset]
            .take()
            .expect("slots in the window are occupied");
        self.first += 1;
        if self.first.is_multiple_of(CHUNK) {
            self.chunks.pop_front();
        }
        Ok(e)
    }

    pub fn peek(&self) -> Option<&E> {
        self.get(self.first)
    }

    pub fn peek_mut(&mut self) -> Option<&mut E> {
        self.get_mut(self.first)
    }

    pub fn first(&self) -> u64 {
        self.first
    }

    pub fn next(&self) -> u64 {
        self.next
    }

    pub fn size(&self) -> u64 {
        self.next - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.first == self.next
    }

    fn locate(&self, index: u64) -> Option<(usize, usize)> {
        if index < self.first || index >= self.next {
            return None;
        }
        let chunk = (index / CHUNK - self.first / CHUNK) as usize;
        Some((chunk, (index % CHUNK) as usize))
    }

    pub fn get(&self, index: u64) -> Option<&E> {
        let (c, o) = self.locate(index)?;
        self.chunks[c][o].as_ref()
    }

    pub fn get_mut(&mut self, index: u64) -> Option<&mut E> {
        let (c, o) = self.locate(index)?;
        self.chunks[c][o].as_mut()
    }

    /// Like [`get`](Self::get) but reports why the read failed.
    pub fn try_get(&self, index: u64) -> Result<&E, SlidingError> {
        self.get(index).ok_or(SlidingError::OutOfWindow {
            index,
            first: self.first,
            next: self.next,
        })
    }

    /// Iterates the window in index order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &E)> + '_ {
        let first = self.first;
        self.chunks
            .iter()
            .flat_map(|c| c.iter())
            .skip((first % CHUNK) as usize)
            .enumerate()
            .map(move |(i, e)| (first + i as u64, e.as_ref().expect("window slot")))
    }

    /// Number of chunks currently allocated.
    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// Sliding window of presence bits, with a sentinel bit kept at `next`.
#[derive(Debug, Clone)]
struct SlidingBits {
    /// Index of bit 0 of `words[0]`; always a multiple of 64.
    base: u64,
    words: VecDeque<u64>,
}

impl SlidingBits {
    fn new() -> Self {
        let mut words = VecDeque::new();
        // sentinel at index 0
        words.push_back(1);
        Self { base: 0, words }
    }

    fn slot(&mut self, index: u64) -> &mut u64 {
        let w = ((index - self.base) / WORD_BITS) as usize;
        while self.words.len() <= w {
            self.words.push_back(0);
        }
        &mut self.words[w]
    }

    fn set(&mut self, index: u64) {
        *self.slot(index) |= 1 << (index % WORD_BITS);
    }

    fn clear(&mut self, index: u64) {
        *self.slot(index) &= !(1 << (index % WORD_BITS));
    }

    /// Smallest set index `>= from`. Relies on the sentinel for termination.
    /// Returns the index found and the number of words examined.
    fn scan_from(&self, from: u64) -> (u64, u64) {
        let mut w = ((from - self.base) / WORD_BITS) as usize;
        let mut word = self.words[w] & (!0u64 << (from % WORD_BITS));
        let mut probes = 1;
        while word == 0 {
            w += 1;
            probes += 1;
            word = self.words[w];
        }
        (
            self.base + w as u64 * WORD_BITS + word.trailing_zeros() as u64,
            probes,
        )
    }

    /// Drops whole words strictly below `first`.
    fn release_below(&mut self, first: u64) -> u64 {
        let mut released = 0;
        while self.base + WORD_BITS <= first {
            self.words.pop_front();
            self.base += WORD_BITS;
            released += 1;
        }
        released
    }
}

/// A sliding window of keys, removable by key, with `first` skipping vacated
/// positions.
#[derive(Debug, Clone)]
pub struct SlidingMap<K> {
    first: u64,
    next: u64,
    bits: SlidingBits,
    lookup: HashMap<K, u64>,
    steps: u64,
}

impl<K: Hash + Eq + Clone> Default for SlidingMap<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Hash + Eq + Clone> SlidingMap<K> {
    pub fn new() -> Self {
        Self {
            first: 0,
            next: 0,
            bits: SlidingBits::new(),
            lookup: HashMap::new(),
            steps: 0,
        }
    }

    /// Registers `key` at index `next`.
    pub fn add(&mut self, key: K) -> Result<u64, SlidingError> {
        self.steps += 1;
        if let Some(&index) = self.lookup.get(&key) {
            return Err(SlidingError::DuplicateKey { index });
        }
        let index = self.next;
        self.lookup.insert(key, index);
        // the bit at `index` is already the sentinel; move the sentinel on
        self.next += 1;
        self.bits.set(self.next);
        Ok(index)
    }

    /// Removes `key` if present. Absent keys are a silent no-op.
    /// Returns the index the key occupied.
    pub fn remove(&mut self, key: &K) -> Option<u64> {
        self.steps += 1;
        let index = self.lookup.remove(key)?;
        self.bits.clear(index);
        if index == self.first {
            let (first, probes) = self.bits.scan_from(index);
            self.first = first;
            self.steps += probes;
            self.steps += self.bits.release_below(first);
        }
        Some(index)
    }

    pub fn contains(&self, key: &K) -> bool {
        self.lookup.contains_key(key)
    }

    pub fn index(&self, key: &K) -> Option<u64> {
        self.lookup.get(key).copied()
    }

    pub fn first(&self) -> u64 {
        self.first
    }

    pub fn next(&self) -> u64 {
        self.next
    }

    /// Number of live keys.
    pub fn len(&self) -> usize {
        self.lookup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lookup.is_empty()
    }

    /// Live keys in index order.
    pub fn iter_ordered(&self) -> Vec<(u64, K)> {
        let mut v: Vec<(u64, K)> = self.lookup.iter().map(|(k, &i)| (i, k.clone())).collect();
        v.sort_unstable_by_key(|(i, _)| *i);
        v
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
}

/// A sliding map whose positions can also be read by index.
#[derive(Debug, Clone)]
pub struct IdxSlidingMap<K> {
    slots: SlidingArray<Option<K>>,
    lookup: HashMap<K, u64>,
    steps: u64,
}

impl<K: Hash + Eq + Clone> Default for IdxSlidingMap<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Hash + Eq + Clone> IdxSlidingMap<K> {
    pub fn new() -> Self {
        Self {
            slots: SlidingArray::new(),
            lookup: HashMap::new(),
            steps: 0,
        }
    }

    pub fn add(&mut self, key: K) -> Result<u64, SlidingError> {
        self.steps += 1;
        if let Some(&index) = self.lookup.get(&key) {
            return Err(SlidingError::DuplicateKey { index });
        }
        let index = self.slots.add(Some(key.clone()));
        self.lookup.insert(key, index);
        Ok(index)
    }

    /// Removes `key` if present; absent keys are a no-op.
    pub fn remove(&mut self, key: &K) -> Option<u64> {
        self.steps += 1;
        let index = self.lookup.remove(key)?;
        if let Some(slot) = self.slots.get_mut(index) {
            *slot = None;
        }
        if index == self.slots.first() {
            while matches!(self.slots.peek(), Some(None)) {
                self.steps += 1;
                let _ = self.slots.remove();
            }
        }
        Some(index)
    }

    pub fn index(&self, key: &K) -> Option<u64> {
        self.lookup.get(key).copied()
    }

    /// Element added at `index`, or `None` if removed or out of window.
    pub fn get(&self, index: u64) -> Option<&K> {
        self.slots.get(index).and_then(|s| s.as_ref())
    }

    pub fn peek(&self) -> Option<&K> {
        self.get(self.first())
    }

    pub fn first(&self) -> u64 {
        self.slots.first()
    }

    pub fn next(&self) -> u64 {
        self.slots.next()
    }

    pub fn len(&self) -> usize {
        self.lookup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lookup.is_empty()
    }

    /// Live keys in index order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &K)> + '_ {
        self.slots
            .iter()
            .filter_map(|(i, s)| s.as_ref().map(|k| (i, k)))
    }

    pub fn steps(&self) -> u64 {
        self.steps + self.slots.steps()
    }
}
