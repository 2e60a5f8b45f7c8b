//! Seeded train/validation/test partitioning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GcsError, Result};

/// Split percentages; validation and test sizes are floored and the
/// remainder goes to training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    /// (train, val, test) in percent, summing to 100.
    pub percents: (u32, u32, u32),
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            seed,
            percents: (80, 10, 10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.percents;
        if a + b + c != 100 || a == 0 {
            return Err(GcsError::InvalidInput(format!(
                "split percentages {a}/{b}/{c} must sum to 100 with a non-empty train share"
            )));
        }
        Ok(())
    }

    /// (train, val, test) sizes for `n` rows.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let val = n * self.percents.1 as usize / 100;
        let test = n * self.percents.2 as usize / 100;
        (n - val - test, val, test)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Shuffles `0..n` with the spec's seed and cuts it into contiguous
/// train, validation and test blocks.
pub fn split(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if n == 0 {
        return Err(GcsError::Empty("dataset"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    shuffle(&mut order, &mut rng);
    let (train, val, _) = spec.sizes(n);
    let test = order.split_off(train + val);
    let val = order.split_off(train);
    Ok(SplitIndices {
        train: order,
        val,
        test,
    })
}
