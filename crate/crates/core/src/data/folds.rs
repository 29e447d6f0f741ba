use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schema::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

fn shuffled_by_class(labels: &[usize], n_classes: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = (0..n_classes).map(|_| Vec::new()).collect();
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for members in by_class.iter_mut() {
        members.shuffle(rng);
    }
    by_class
}

/// Stratified k-fold split. Each class is shuffled and dealt round-robin
/// over the folds, continuing where the previous class stopped so fold
/// sizes stay balanced too.
pub fn stratified_kfold(d: &Dataset, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    let rows = d.rows();
    if k < 2 || k > rows {
        return Err(Error::InvalidFolds { k, rows });
    }
    for (c, &n) in d.class_counts().iter().enumerate() {
        if n == 0 {
            return Err(Error::EmptyClass(d.schema.classes[c].clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = shuffled_by_class(&d.labels, d.schema.n_classes(), &mut rng);
    let mut test: Vec<Vec<usize>> = (0..k).map(|_| Vec::new()).collect();
    let mut offset = 0;
    for members in &by_class {
        for (i, &r) in members.iter().enumerate() {
            test[(offset + i) % k].push(r);
        }
        offset = (offset + members.len()) % k;
    }
    Ok(test
        .into_iter()
        .map(|mut t| {
            t.sort_unstable();
            let mut in_test = alloc::vec![false; rows];
            for &r in &t {
                in_test[r] = true;
            }
            FoldSplit { train_idx: (0..rows).filter(|&r| !in_test[r]).collect(), test_idx: t }
        })
        .collect())
}

/// Stratified holdout of roughly `fraction` of every class. Returns
/// `(fit, holdout)` index lists, both ascending; classes with a single
/// member stay entirely in the fit part.
pub fn stratified_holdout(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = shuffled_by_class(labels, n_classes, &mut rng);
    let mut fit = Vec::new();
    let mut hold = Vec::new();
    for members in &by_class {
        let take = libm::floor(members.len() as f64 * fraction + 0.5) as usize;
        let take = take.min(members.len().saturating_sub(1));
        hold.extend_from_slice(&members[..take]);
        fit.extend_from_slice(&members[take..]);
    }
    fit.sort_unstable();
    hold.sort_unstable();
    (fit, hold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{Column, FeatureSchema, Role, Value};
    use alloc::collections::BTreeMap;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn labelled(labels: Vec<usize>, n_classes: usize) -> Dataset {
        let schema = FeatureSchema::new(
            vec![
                Column { name: "x".into(), role: Role::Continuous },
                Column { name: "y".into(), role: Role::Target },
            ],
            BTreeMap::new(),
            (0..n_classes).map(|c| c.to_string()).collect(),
        )
        .unwrap();
        Dataset { schema, values: labels.iter().map(|_| Value::Num(0.0)).collect(), labels }
    }

    #[test]
    fn exact_divisibility() {
        let d = labelled(vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1], 2);
        let folds = stratified_kfold(&d, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        for f in &folds {
            let counts: Vec<usize> = (0..2).map(|c| f.test_idx.iter().filter(|&&i| d.labels[i] == c).count()).collect();
            assert_eq!(counts, vec![1, 1]);
        }
    }

    #[test]
    fn diabetes_proportions() {
        let mut labels = vec![0; 500];
        labels.extend(vec![1; 268]);
        let d = labelled(labels, 2);
        for f in stratified_kfold(&d, 5, 0).unwrap() {
            let pos = f.test_idx.iter().filter(|&&i| d.labels[i] == 1).count();
            let neg = f.test_idx.len() - pos;
            assert_eq!(neg, 100);
            assert!(pos == 53 || pos == 54, "{pos}");
        }
    }

    #[test]
    fn deterministic_and_errors() {
        let d = labelled(vec![0, 1, 0, 1, 0, 1, 1], 2);
        assert_eq!(stratified_kfold(&d, 3, 11).unwrap(), stratified_kfold(&d, 3, 11).unwrap());
        assert_eq!(stratified_kfold(&d, 8, 0), Err(Error::InvalidFolds { k: 8, rows: 7 }));
        assert_eq!(stratified_kfold(&d, 1, 0), Err(Error::InvalidFolds { k: 1, rows: 7 }));
        let d = labelled(vec![0, 0, 0], 2);
        assert_eq!(stratified_kfold(&d, 2, 0), Err(Error::EmptyClass("1".into())));
    }

    #[test]
    fn holdout_is_stratified_partition() {
        let mut labels = vec![0; 50];
        labels.extend(vec![1; 10]);
        labels.push(2);
        let (fit, hold) = stratified_holdout(&labels, 3, 0.2, 3);
        assert_eq!(fit.len() + hold.len(), labels.len());
        assert_eq!(hold.iter().filter(|&&i| labels[i] == 0).count(), 10);
        assert_eq!(hold.iter().filter(|&&i| labels[i] == 1).count(), 2);
        assert_eq!(hold.iter().filter(|&&i| labels[i] == 2).count(), 0);
    }

    proptest! {
        #[test]
        fn folds_partition_rows(labels in proptest::collection::vec(0usize..3, 12..80), k in 2usize..6, seed in any::<u64>()) {
            let mut labels = labels;
            labels.extend([0, 1, 2]);
            let d = labelled(labels, 3);
            let folds = stratified_kfold(&d, k, seed).unwrap();
            let mut seen = vec![0usize; d.rows()];
            for f in &folds {
                for &i in &f.test_idx { seen[i] += 1; }
                prop_assert_eq!(f.train_idx.len() + f.test_idx.len(), d.rows());
                prop_assert!(f.train_idx.iter().all(|i| f.test_idx.binary_search(i).is_err()));
            }
            prop_assert!(seen.iter().all(|&s| s == 1));
            for c in 0..3 {
                let per: Vec<usize> = folds.iter().map(|f| f.test_idx.iter().filter(|&&i| d.labels[i] == c).count()).collect();
                let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }
    }
}
