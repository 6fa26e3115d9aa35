use std::collections::VecDeque;

use crate::gesture::{GestureClass, NUM_GESTURES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PostprocessError {
    #[error("fifo size must be a positive odd number, got {0}")]
    EvenCapacity(usize),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("need more than {warmup} frames to measure past warm-up, got {trials}")]
    TooFewTrials { trials: u64, warmup: usize },
}

/// The last `n` predicted classes, most recent last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FifoMemory {
    capacity: usize,
    entries: VecDeque<GestureClass>,
}

impl FifoMemory {
    pub fn new(capacity: usize) -> Result<Self, PostprocessError> {
        if capacity.is_multiple_of(2) {
            return Err(PostprocessError::EvenCapacity(capacity));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = GestureClass> + '_ {
        self.entries.iter().copied()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Class held by strictly more than half of the present entries.
    pub fn majority(&self) -> Option<GestureClass> {
        let mut counts = [0usize; NUM_GESTURES];
        for c in &self.entries {
            counts[c.index()] += 1;
        }
        counts
            .iter()
            .position(|&k| 2 * k > self.entries.len())
            .map(|i| GestureClass::new(i).expect("index below class count"))
    }

    /// Appends `predicted` (evicting the oldest entry when full) and returns
    /// the aggregated decision: the majority class if one exists, otherwise
    /// the most recent prediction.
    pub fn push_and_aggregate(&mut self, predicted: GestureClass) -> GestureClass {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(predicted);
        self.majority().unwrap_or(predicted)
    }
}

impl Default for FifoMemory {
    fn default() -> Self {
        Self::new(5).expect("5 is odd")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(i: usize) -> GestureClass {
        GestureClass::new(i).unwrap()
    }

    fn filled(items: &[usize]) -> (FifoMemory, GestureClass) {
        let mut f = FifoMemory::new(items.len()).unwrap();
        let mut out = g(0);
        for &i in items {
            out = f.push_and_aggregate(g(i));
        }
        (f, out)
    }

    #[test]
    fn flowchart_examples() {
        assert_eq!(filled(&[3, 3, 3, 7, 7]).1, g(3));
        let mut f = filled(&[0, 1, 2, 3, 4]).0;
        assert_eq!(f.push_and_aggregate(g(5)), g(5));
        assert_eq!(
            f.entries().map(|c| c.index()).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5]
        );
        let mut empty = FifoMemory::new(5).unwrap();
        assert_eq!(empty.push_and_aggregate(g(8)), g(8));
    }

    #[test]
    fn capacity_rules() {
        assert_eq!(FifoMemory::new(4), Err(PostprocessError::EvenCapacity(4)));
        assert_eq!(FifoMemory::new(0), Err(PostprocessError::EvenCapacity(0)));
        let mut f = FifoMemory::new(3).unwrap();
        for i in 0..10 {
            f.push_and_aggregate(g(i % 15));
            assert!(f.len() <= 3);
        }
        assert_eq!(FifoMemory::default().capacity(), 5);
    }

    #[test]
    fn warm_up_uses_present_entries() {
        let mut f = FifoMemory::new(5).unwrap();
        assert_eq!(f.push_and_aggregate(g(2)), g(2));
        // one of each: no majority of two, latest wins
        assert_eq!(f.push_and_aggregate(g(4)), g(4));
        // 2 of 3 present
        assert_eq!(f.push_and_aggregate(g(2)), g(2));
        assert_eq!(f.push_and_aggregate(g(4)), g(4));
    }

    #[test]
    fn constant_stream_constant_output() {
        let mut f = FifoMemory::new(7).unwrap();
        for _ in 0..20 {
            assert_eq!(f.push_and_aggregate(g(6)), g(6));
        }
    }

    proptest! {
        #[test]
        fn majority_ignores_order(items in proptest::collection::vec(0usize..4, 5), seed in any::<u64>()) {
            let (base, out) = filled(&items);
            let mut shuffled = items.clone();
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = crate::exec::mix64(s);
                shuffled.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let (_, out2) = filled(&shuffled);
            match base.majority() {
                Some(m) => {
                    prop_assert_eq!(out, m);
                    prop_assert_eq!(out2, m);
                }
                None => {
                    prop_assert_eq!(out, g(*items.last().unwrap()));
                    prop_assert_eq!(out2, g(*shuffled.last().unwrap()));
                }
            }
        }
    }
}
