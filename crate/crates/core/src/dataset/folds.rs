use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledPair;
use crate::error::{Error, Result};

/// Fold index of every pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub seed: u64,
    pub fold_of: Vec<usize>,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }
}

/// Label-stratified assignment: positives and then negatives are shuffled
/// and dealt round-robin, the negatives continuing where the positives
/// stopped, so every fold size and positive count is within one of the
/// others.
pub fn make_folds(pairs: &[LabeledPair], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut positives: Vec<usize> = (0..pairs.len()).filter(|&i| pairs[i].label).collect();
    let mut negatives: Vec<usize> = (0..pairs.len()).filter(|&i| !pairs[i].label).collect();
    if positives.len() < k {
        return Err(Error::TooFewPositives {
            needed: k,
            found: positives.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives.shuffle(&mut rng);
    negatives.shuffle(&mut rng);
    let mut fold_of = vec![0; pairs.len()];
    for (slot, &i) in positives.iter().chain(&negatives).enumerate() {
        fold_of[i] = slot % k;
    }
    Ok(FoldSplit { k, seed, fold_of })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Source;
    use proptest::prelude::*;

    fn pairs(n_pos: usize, n_neg: usize) -> Vec<LabeledPair> {
        (0..n_pos + n_neg)
            .map(|i| LabeledPair::new(i as u64, 100_000 + i as u64, i < n_pos, Source::Given))
            .collect()
    }

    #[test]
    fn ten_folds_of_ten() {
        let split = make_folds(&pairs(20, 80), 10, 1).unwrap();
        for f in 0..10 {
            let test = split.test_indices(f);
            assert_eq!(test.len(), 10);
            assert_eq!(test.iter().filter(|&&i| i < 20).count(), 2);
            assert_eq!(split.train_indices(f).len(), 90);
        }
    }

    #[test]
    fn too_few_positives() {
        assert!(matches!(
            make_folds(&pairs(9, 100), 10, 0),
            Err(Error::TooFewPositives {
                needed: 10,
                found: 9
            })
        ));
    }

    proptest! {
        #[test]
        fn stratified_partition(n_pos in 10usize..60, n_neg in 0usize..200, k in 2usize..11, seed: u64) {
            let ps = pairs(n_pos, n_neg);
            let split = make_folds(&ps, k, seed).unwrap();
            prop_assert_eq!(split.clone(), make_folds(&ps, k, seed).unwrap());
            let mut seen = vec![0; ps.len()];
            let mut pos_counts = Vec::new();
            let mut sizes = Vec::new();
            for f in 0..k {
                let test = split.test_indices(f);
                for &i in &test {
                    seen[i] += 1;
                }
                pos_counts.push(test.iter().filter(|&&i| ps[i].label).count());
                sizes.push(test.len());
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            prop_assert!(pos_counts.iter().max().unwrap() - pos_counts.iter().min().unwrap() <= 1);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
