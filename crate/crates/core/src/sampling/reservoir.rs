use rand::Rng;

/// Fixed-capacity uniform sample of a stream (Algorithm R).
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirBuffer<T> {
    capacity: usize,
    entries: Vec<T>,
    seen: u64,
}

impl<T> ReservoirBuffer<T> {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "reservoir capacity must be positive");
        ReservoirBuffer { capacity, entries: Vec::new(), seen: 0 }
    }

    /// Rebuilds a buffer from saved state. `None` if the parts are inconsistent.
    pub fn from_parts(capacity: usize, entries: Vec<T>, seen: u64) -> Option<Self> {
        let ok = capacity > 0 && entries.len() as u64 == seen.min(capacity as u64);
        ok.then_some(ReservoirBuffer { capacity, entries, seen })
    }

    /// Offers `item`; returns the slot it landed in, or `None` if discarded.
    pub fn insert<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) -> Option<usize> {
        let slot = if self.entries.len() < self.capacity {
            self.entries.push(item);
            Some(self.entries.len() - 1)
        } else {
            let j = rng.gen_range(0..=self.seen);
            if j < self.capacity as u64 {
                self.entries[j as usize] = item;
                Some(j as usize)
            } else {
                None
            }
        };
        self.seen += 1;
        slot
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total insertion attempts so far.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn fill_phase_keeps_everything() {
        let mut rng = stream(1, Purpose::Test, 0, 0);
        let mut b = ReservoirBuffer::new(100);
        for i in 0..100 {
            assert_eq!(b.insert(i, &mut rng), Some(i));
        }
        assert_eq!(b.entries(), (0..100).collect::<Vec<_>>().as_slice());
        b.insert(100, &mut rng);
        assert_eq!((b.len(), b.seen()), (100, 101));
    }

    #[test]
    fn third_insert_into_two_slots_kept_two_thirds_of_the_time() {
        let trials = 30_000;
        let mut kept = 0;
        for k in 0..trials {
            let mut rng = stream(2, Purpose::Test, 0, k);
            let mut b = ReservoirBuffer::new(2);
            b.insert(0, &mut rng);
            b.insert(1, &mut rng);
            if b.insert(2, &mut rng).is_some() {
                kept += 1;
            }
        }
        let p = kept as f64 / trials as f64;
        let sd = (2.0 / 3.0 * (1.0 / 3.0) / trials as f64).sqrt();
        assert!((p - 2.0 / 3.0).abs() < 4.0 * sd, "{p}");
    }

    #[test]
    fn from_parts_checks_consistency() {
        assert!(ReservoirBuffer::from_parts(3, vec![1, 2, 3], 10).is_some());
        assert!(ReservoirBuffer::from_parts(3, vec![1, 2], 10).is_none());
        assert!(ReservoirBuffer::<u8>::from_parts(0, vec![], 0).is_none());
    }
}
