use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::corpus::VideoId;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// A seeded partition of video ids. Both id lists are sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_ids: Vec<VideoId>,
    pub valid_ids: Vec<VideoId>,
}

impl SplitSpec {
    pub fn is_disjoint(&self) -> bool {
        let mut a = self.train_ids.iter().peekable();
        let mut b = self.valid_ids.iter().peekable();
        while let (Some(x), Some(y)) = (a.peek(), b.peek()) {
            match x.cmp(y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }
}

/// Shuffles the sorted, de-duplicated ids with a generator seeded from
/// `seed` and puts the first `floor(train_fraction * n)` in the training
/// part.
pub fn split<'a, I>(ids: I, seed: u64, train_fraction: f64) -> Result<SplitSpec, HarnessError>
where
    I: IntoIterator<Item = &'a VideoId>,
{
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(HarnessError::Split(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut ids: Vec<VideoId> = ids.into_iter().cloned().collect();
    ids.sort();
    ids.dedup();
    let n = ids.len();
    let n_train = (train_fraction * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(HarnessError::Split(format!(
            "{n} ids cannot be split {train_fraction}/{} with both parts non-empty",
            1.0 - train_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut valid_ids = ids.split_off(n_train);
    let mut train_ids = ids;
    train_ids.sort();
    valid_ids.sort();
    Ok(SplitSpec {
        seed,
        train_ids,
        valid_ids,
    })
}
