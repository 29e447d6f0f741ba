use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Count matrix with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    /// Row-major `n_classes × n_classes`.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> ConfusionMatrix {
        ConfusionMatrix { n_classes, counts: vec![0; n_classes * n_classes] }
    }

    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<ConfusionMatrix> {
        if counts.len() != n_classes * n_classes {
            return Err(Error::DimensionMismatch {
                what: "confusion matrix cells",
                expected: n_classes * n_classes,
                got: counts.len(),
            });
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }

    pub fn from_predictions(n_classes: usize, truth: &[usize], predicted: &[usize]) -> Result<ConfusionMatrix> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch { what: "predictions", expected: truth.len(), got: predicted.len() });
        }
        let mut cm = ConfusionMatrix::new(n_classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::OutOfRange { index: t.max(p), len: n_classes });
            }
            cm.add(t, p);
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.n_classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.counts[truth * self.n_classes..(truth + 1) * self.n_classes].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Per-class recall; an empty class row is an error.
    pub fn recalls(&self) -> Result<Vec<f64>> {
        (0..self.n_classes)
            .map(|k| match self.row_total(k) {
                0 => Err(Error::EmptyClassRow(k)),
                n => Ok(self.get(k, k) as f64 / n as f64),
            })
            .collect()
    }

    pub fn gmean(&self) -> Result<f64> {
        gmean(self)
    }
}

/// Geometric mean of per-class recalls, `(Π recall_k)^(1/c)`.
pub fn gmean(cm: &ConfusionMatrix) -> Result<f64> {
    let recalls = cm.recalls()?;
    if recalls.is_empty() {
        return Err(Error::InvalidConfig("confusion matrix has no classes".into()));
    }
    let product: f64 = recalls.iter().product();
    Ok(math::powf(product, 1.0 / recalls.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_diagonal() {
        let cm = ConfusionMatrix::from_counts(3, vec![5, 0, 0, 0, 7, 0, 0, 0, 2]).unwrap();
        assert_eq!(cm.gmean().unwrap(), 1.0);
    }

    #[test]
    fn binary_closed_form() {
        // sensitivity 0.8 on class 1, specificity 0.5 on class 0
        let cm = ConfusionMatrix::from_counts(2, vec![5, 5, 2, 8]).unwrap();
        assert!((cm.gmean().unwrap() - 0.4f64.sqrt()).abs() < 1e-15);
        assert!((cm.gmean().unwrap() - 0.6325).abs() < 1e-4);
    }

    #[test]
    fn zero_recall_and_trivial_classifier() {
        let cm = ConfusionMatrix::from_predictions(2, &[0, 0, 0, 0, 1], &[0, 0, 0, 0, 0]).unwrap();
        assert_eq!(cm.gmean().unwrap(), 0.0);
    }

    #[test]
    fn empty_row_names_class() {
        let cm = ConfusionMatrix::from_counts(2, vec![3, 1, 0, 0]).unwrap();
        assert_eq!(cm.gmean(), Err(Error::EmptyClassRow(1)));
    }

    proptest! {
        #[test]
        fn permutation_invariant(c in 2usize..5, cells in proptest::collection::vec(0u64..20, 16), rot in 0usize..4) {
            let mut counts: Vec<u64> = cells[..c * c].to_vec();
            for k in 0..c {
                counts[k * c + k] += 1;
            }
            let cm = ConfusionMatrix::from_counts(c, counts.clone()).unwrap();
            let perm: Vec<usize> = (0..c).map(|i| (i + rot) % c).collect();
            let mut permuted = ConfusionMatrix::new(c);
            for t in 0..c {
                for p in 0..c {
                    permuted.counts[perm[t] * c + perm[p]] = counts[t * c + p];
                }
            }
            prop_assert!((cm.gmean().unwrap() - permuted.gmean().unwrap()).abs() < 1e-12);
        }
    }
}
