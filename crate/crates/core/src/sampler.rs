//! Deterministic mini-batch sampling over retain/forget splits.
//!
//! Each side of the split draws from its own counter-based generator
//! stream, so a method that never touches the forget set consumes the
//! retain stream exactly as one that does. Sampling is without
//! replacement within an epoch: indices are shuffled, served in
//! batches (the final batch of an epoch may be short), and reshuffled
//! once exhausted, giving full data coverage per pass.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, UnlearnSplit};
use crate::error::Result;
use crate::problem::LabeledBatch;

/// Mixes a seed with a tag into an independent sub-seed (SplitMix64
/// finalizer). Used wherever one user-facing seed must fan out into
/// decorrelated component seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Without-replacement index stream over `0..n`.
#[derive(Debug, Clone)]
struct IndexStream {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl IndexStream {
    fn new(n: usize, batch: usize, seed: u64) -> Self {
        let mut s = Self {
            order: (0..n).collect(),
            pos: 0,
            batch: batch.min(n).max(1),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        s.reshuffle();
        s
    }

    fn reshuffle(&mut self) {
        let n = self.order.len();
        for i in 0..n.saturating_sub(1) {
            let j = i + self.rng.random_range(0..(n - i));
            self.order.swap(i, j);
        }
        self.pos = 0;
    }

    fn next_indices(&mut self) -> Vec<usize> {
        let n = self.order.len();
        if n <= self.batch {
            // Whole dataset, source order; no replacement padding.
            return (0..n).collect();
        }
        if self.pos >= n {
            self.reshuffle();
        }
        let end = (self.pos + self.batch).min(n);
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        out
    }
}

/// Epoch-shuffled batch source over a single dataset.
#[derive(Debug, Clone)]
pub struct DatasetSampler<'a> {
    data: &'a Dataset,
    stream: IndexStream,
}

impl<'a> DatasetSampler<'a> {
    pub fn new(data: &'a Dataset, batch_size: usize, seed: u64) -> Self {
        Self {
            data,
            stream: IndexStream::new(data.len(), batch_size, seed),
        }
    }

    pub fn next_batch(&mut self) -> Result<LabeledBatch> {
        self.data.batch(&self.stream.next_indices())
    }
}

/// Paired batch source over the two sides of an [`UnlearnSplit`].
///
/// Identical seeds produce identical batch sequences. The forget and
/// retain streams are independent: skipping all draws on one side does
/// not change the other side's sequence.
#[derive(Debug, Clone)]
pub struct MinibatchSampler<'a> {
    split: &'a UnlearnSplit,
    forget_stream: IndexStream,
    retain_stream: IndexStream,
}

const FORGET_STREAM_TAG: u64 = 0x0F;
const RETAIN_STREAM_TAG: u64 = 0x0E;

impl<'a> MinibatchSampler<'a> {
    pub fn new(split: &'a UnlearnSplit, batch_size: usize, seed: u64) -> Self {
        Self {
            split,
            forget_stream: IndexStream::new(
                split.forget.len(),
                batch_size,
                derive_seed(seed, FORGET_STREAM_TAG),
            ),
            retain_stream: IndexStream::new(
                split.retain.len(),
                batch_size,
                derive_seed(seed, RETAIN_STREAM_TAG),
            ),
        }
    }

    pub fn split(&self) -> &'a UnlearnSplit {
        self.split
    }

    pub fn next_forget(&mut self) -> Result<LabeledBatch> {
        let idx = self.forget_stream.next_indices();
        self.split.forget.batch(&idx)
    }

    pub fn next_retain(&mut self) -> Result<LabeledBatch> {
        let idx = self.retain_stream.next_indices();
        self.split.retain.batch(&idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, split_classwise};

    #[test]
    fn identical_seeds_give_identical_sequences() {
        let data = gen_blobs(0, 4, 10, 2, 5.0).unwrap();
        let split = split_classwise(&data, &[0]).unwrap();
        let mut a = MinibatchSampler::new(&split, 8, 42);
        let mut b = MinibatchSampler::new(&split, 8, 42);
        for _ in 0..10 {
            assert_eq!(a.next_retain().unwrap(), b.next_retain().unwrap());
            assert_eq!(a.next_forget().unwrap(), b.next_forget().unwrap());
        }
    }

    #[test]
    fn retain_stream_is_independent_of_forget_draws() {
        let data = gen_blobs(0, 4, 10, 2, 5.0).unwrap();
        let split = split_classwise(&data, &[0]).unwrap();
        let mut with_forget = MinibatchSampler::new(&split, 8, 7);
        let mut without = MinibatchSampler::new(&split, 8, 7);
        for _ in 0..10 {
            let _ = with_forget.next_forget().unwrap();
            assert_eq!(
                with_forget.next_retain().unwrap(),
                without.next_retain().unwrap()
            );
        }
    }

    #[test]
    fn small_dataset_serves_whole_set_in_source_order() {
        let data = gen_blobs(0, 2, 3, 2, 5.0).unwrap();
        let split = split_classwise(&data, &[0]).unwrap();
        let mut s = MinibatchSampler::new(&split, 16, 0);
        let batch = s.next_forget().unwrap();
        assert_eq!(batch.size(), 3);
        assert_eq!(batch, split.forget.full_batch().unwrap());
    }

    #[test]
    fn epoch_covers_every_index_once() {
        let data = gen_blobs(0, 2, 25, 2, 5.0).unwrap();
        let split = split_classwise(&data, &[0]).unwrap();
        // forget side has 25 samples; batch 10 → batches of 10/10/5.
        let mut s = MinibatchSampler::new(&split, 10, 3);
        let mut seen = [0usize; 25];
        let mut sizes = Vec::new();
        for _ in 0..3 {
            let idx = s.forget_stream.next_indices();
            sizes.push(idx.len());
            for i in idx {
                seen[i] += 1;
            }
        }
        assert_eq!(sizes, vec![10, 10, 5]);
        assert!(seen.iter().all(|&c| c == 1), "epoch coverage: {seen:?}");
    }

    #[test]
    fn derive_seed_separates_tags() {
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
        assert_ne!(derive_seed(1, 2), derive_seed(2, 2));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }
}
