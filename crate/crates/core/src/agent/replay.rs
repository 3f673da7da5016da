//! Fixed-capacity experience replay with uniform sampling.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Experience>,
    capacity: usize,
    /// Slot overwritten next once the buffer is full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() < self.capacity {
            self.items.push(e);
        } else {
            self.items[self.head] = e;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    pub fn get(&self, index: usize) -> Option<&Experience> {
        self.items.get(index)
    }

    /// Indices of `batch` experiences drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.len() < batch || batch == 0 {
            return Err(Error::InsufficientBuffer {
                have: self.items.len(),
                need: batch.max(1),
            });
        }
        Ok((0..batch)
            .map(|_| rng.random_range(0..self.items.len()))
            .collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Experience>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(r: f64) -> Experience {
        Experience {
            state: vec![r],
            action: vec![0.0],
            reward: r,
            next_state: vec![r],
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for k in 0..5 {
            b.push(exp(k as f64));
            assert!(b.len() <= 3);
        }
        let mut rewards: Vec<f64> = (0..3).map(|i| b.get(i).unwrap().reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_needs_a_full_batch() {
        let mut b = ReplayBuffer::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.push(exp(0.0));
        assert!(matches!(
            b.sample(2, &mut rng),
            Err(Error::InsufficientBuffer { have: 1, need: 2 })
        ));
        b.push(exp(1.0));
        assert_eq!(b.sample(2, &mut rng).unwrap().len(), 2);
    }

    #[test]
    fn uniform_sampling_chi_square() {
        let n = 20;
        let mut b = ReplayBuffer::new(n);
        for k in 0..n {
            b.push(exp(k as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 100_000;
        let mut counts = vec![0usize; n];
        for _ in 0..draws / 10 {
            for i in b.sample_indices(10, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        let expected = draws as f64 / n as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 19 degrees of freedom, 0.999 quantile ≈ 43.8.
        assert!(chi2 < 43.8, "chi2 = {chi2}");
        assert!(counts.iter().all(|&c| c > 0));
    }
}
