//! Seed splitting: every random consumer gets its own ChaCha stream derived
//! from the single configured seed, so parallel and sequential runs draw
//! identical numbers.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream offsets for the distinct consumers of a seed.
pub mod streams {
    pub const AMSAL_SEED: u64 = 0;
    pub const KMEANS_SEED: u64 = 1 << 32;
    pub const SPLIT: u64 = 2 << 32;
    pub const SYNTHETIC: u64 = 3 << 32;
}

/// Independent stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Random `(train, test)` split of `0..n`, each side in ascending order.
/// `test_fraction = 0` uses every row for both; otherwise each side keeps at
/// least one row when `n ≥ 2`.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..n).collect();
    if test_fraction <= 0.0 || n < 2 {
        return (all.clone(), all);
    }
    let test_len = (libm::round(n as f64 * test_fraction) as usize).clamp(1, n - 1);
    let mut order = all;
    order.shuffle(&mut stream(seed, streams::SPLIT));
    let mut test = order.split_off(n - test_len);
    order.sort_unstable();
    test.sort_unstable();
    (order, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_partitions_rows() {
        let (train, test) = split_indices(10, 0.3, 4);
        assert_eq!((train.len(), test.len()), (7, 3));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.3, 4), (train, test));
        assert_eq!(split_indices(3, 0.0, 1).1, [0, 1, 2]);
        assert_eq!(split_indices(2, 0.99, 1).0.len(), 1);
    }
}
