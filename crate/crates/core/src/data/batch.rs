use rand::seq::SliceRandom;
use rand::Rng;

/// Yields the mini-batches of one epoch as index lists.
///
/// With shuffling on, the whole index range is permuted once (Fisher-Yates
/// driven by the caller's RNG) and cut into consecutive batches; the last
/// batch may be short.
#[derive(Debug, Clone)]
pub struct BatchIter {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl BatchIter {
    pub fn new<R: Rng + ?Sized>(len: usize, batch_size: usize, shuffle: bool, rng: &mut R) -> Self {
        assert!(batch_size > 0, "batch size must be positive");
        let mut order: Vec<usize> = (0..len).collect();
        if shuffle {
            order.shuffle(rng);
        }
        Self {
            order,
            batch_size,
            pos: 0,
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl Iterator for BatchIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(batch)
    }
}
