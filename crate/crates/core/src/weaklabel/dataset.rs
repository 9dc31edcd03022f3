use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Disjoint train/val/test id lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub ratios: [f64; 3],
    pub seed: u64,
}

/// Floor allocation; leftovers go to train first, then val.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::Argument(format!("split ratios must be non-negative, got {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("split ratios sum to {sum}, expected 1")));
    }
    // The epsilon keeps 10 × 0.8 from flooring to 7.
    let mut sizes = ratios.map(|r| (n as f64 * r + 1e-9).floor() as usize);
    let mut rest = n - sizes.iter().sum::<usize>().min(n);
    let mut i = 0;
    while rest > 0 {
        sizes[i % 2] += 1;
        rest -= 1;
        i += 1;
    }
    Ok(sizes)
}

pub fn assemble_dataset(ids: &[String], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    if ids.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 pairs to split, got {}", ids.len())));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(Error::Argument(format!("duplicate pair id {dup:?}")));
    }
    let [a, b, _] = split_sizes(ids.len(), ratios)?;
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = shuffled.split_off(a + b);
    let val = shuffled.split_off(a);
    Ok(DatasetSplit { train: shuffled, val, test, ratios, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("pair_{i:04}")).collect()
    }

    #[test]
    fn pool_of_284_splits_228_28_28() {
        assert_eq!(split_sizes(284, [0.8, 0.1, 0.1]).unwrap(), [228, 28, 28]);
        assert_eq!(split_sizes(10, [0.8, 0.1, 0.1]).unwrap(), [8, 1, 1]);
        let s = assemble_dataset(&ids(284), [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (228, 28, 28));
    }

    #[test]
    fn remainders_go_train_then_val() {
        // 0.8·7 = 5.6, 0.1·7 = 0.7 twice → 5/0/0 plus 2 leftovers.
        assert_eq!(split_sizes(7, [0.8, 0.1, 0.1]).unwrap(), [6, 1, 0]);
    }

    #[test]
    fn same_seed_same_split() {
        let a = assemble_dataset(&ids(50), [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!(a, assemble_dataset(&ids(50), [0.8, 0.1, 0.1], 7).unwrap());
        assert_ne!(a.train, assemble_dataset(&ids(50), [0.8, 0.1, 0.1], 8).unwrap().train);
    }

    #[test]
    fn argument_errors() {
        assert!(assemble_dataset(&ids(2), [0.8, 0.1, 0.1], 0).is_err());
        assert!(assemble_dataset(&ids(10), [0.8, 0.1, 0.2], 0).is_err());
        let mut dup = ids(5);
        dup.push("pair_0001".into());
        assert!(assemble_dataset(&dup, [0.8, 0.1, 0.1], 0).is_err());
    }

    proptest! {
        #[test]
        fn disjoint_and_complete(n in 3usize..400, seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (ra, rb) = (a, (1.0 - a) * b);
            let ratios = [ra, rb, (1.0 - ra - rb).max(0.0)];
            let s = assemble_dataset(&ids(n), ratios, seed).unwrap();
            let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).cloned().collect();
            prop_assert_eq!(all.len(), n);
            all.sort();
            all.dedup();
            prop_assert_eq!(all, ids(n));
        }
    }
}
