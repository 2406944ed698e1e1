use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::task::DifficultyBucket;

/// Relative weights of the one/two/three/four-plus goal buckets.
pub const BUCKET_WEIGHTS: [u64; 4] = [1, 3, 2, 1];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCounts {
    pub one: usize,
    pub two: usize,
    pub three: usize,
    pub four_plus: usize,
}

impl BucketCounts {
    pub fn from_array(a: [usize; 4]) -> Self {
        Self { one: a[0], two: a[1], three: a[2], four_plus: a[3] }
    }

    pub fn to_array(self) -> [usize; 4] {
        [self.one, self.two, self.three, self.four_plus]
    }

    pub fn get(&self, bucket: DifficultyBucket) -> usize {
        self.to_array()[bucket.index()]
    }

    pub fn total(&self) -> usize {
        self.to_array().iter().sum()
    }
}

/// Splits `total` across buckets in the 1:3:2:1 ratio by largest-remainder
/// rounding. Equal remainders go to the earlier bucket.
pub fn allocate_ratio(total: usize) -> Result<BucketCounts, DatasetError> {
    let weight_sum: u64 = BUCKET_WEIGHTS.iter().sum();
    if (total as u64) < weight_sum {
        return Err(DatasetError::TotalTooSmall(total));
    }
    let mut counts = [0usize; 4];
    let mut remainders = [(0u64, 0usize); 4];
    for (i, &w) in BUCKET_WEIGHTS.iter().enumerate() {
        let scaled = total as u64 * w;
        counts[i] = (scaled / weight_sum) as usize;
        remainders[i] = (scaled % weight_sum, i);
    }
    let leftover = total - counts.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(leftover) {
        counts[i] += 1;
    }
    Ok(BucketCounts::from_array(counts))
}
