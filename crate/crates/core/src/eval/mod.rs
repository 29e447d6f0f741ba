//! g-mean evaluation, stratified cross-validation and random hyperparameter
//! search.

mod metrics;
mod search;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use metrics::{gmean, ConfusionMatrix};
pub use search::{apply_sample, hpo_random_search, Domain, HpoResult, Param, SearchSpace, TrialRecord};

use crate::data::{apply_imputation, fit_imputation, stratified_kfold, Dataset, FoldSplit};
use crate::error::{Error, Result};
use crate::network::Model;
use crate::training::{train, TrainConfig};

/// Predicted class of every row; missing cells are filled with the model's
/// stored imputation values.
pub fn predict(model: &Model, d: &Dataset) -> Result<Vec<usize>> {
    let d = if d.has_missing() { apply_imputation(d, &model.schema.impute)? } else { d.clone() };
    (0..d.rows()).map(|r| model.predict(d.row(r))).collect()
}

pub fn confusion(model: &Model, d: &Dataset) -> Result<ConfusionMatrix> {
    if d.schema.feature_names() != model.schema.feature_names() || d.schema.classes != model.schema.classes {
        return Err(Error::InvalidSchema("dataset columns or classes differ from the model's".into()));
    }
    ConfusionMatrix::from_predictions(model.n_classes(), &d.labels, &predict(model, d)?)
}

/// Train and test parts of one fold, imputed with statistics of the train
/// rows only.
#[derive(Debug, Clone)]
pub struct FoldData {
    pub train: Dataset,
    pub test: Dataset,
}

impl FoldData {
    pub fn new(d: &Dataset, split: &FoldSplit) -> Result<FoldData> {
        let impute = fit_imputation(d, &split.train_idx)?;
        let train = apply_imputation(&d.subset(&split.train_idx), &impute)?;
        let test = apply_imputation(&d.subset(&split.test_idx), &impute)?;
        Ok(FoldData { train, test })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_scores: Vec<f64>,
    /// Arithmetic mean of the fold scores.
    pub mean: f64,
    pub confusion: Vec<ConfusionMatrix>,
}

/// Stratified `k`-fold estimate of the g-mean of a full training run.
pub fn cross_validate(d: &Dataset, cfg: &TrainConfig, k: usize, seed: u64) -> Result<CvReport> {
    cfg.validate()?;
    let folds = stratified_kfold(d, k, seed)?;
    let mut fold_scores = Vec::with_capacity(k);
    let mut matrices = Vec::with_capacity(k);
    for split in &folds {
        let fold = FoldData::new(d, split)?;
        let outcome = train(&fold.train, cfg)?;
        let cm = confusion(&outcome.model, &fold.test)?;
        fold_scores.push(cm.gmean()?);
        matrices.push(cm);
    }
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    Ok(CvReport { fold_scores, mean, confusion: matrices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{impute_missing, Column, FeatureSchema, Role, Value};
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noisy(rows: usize, seed: u64) -> Dataset {
        let schema = FeatureSchema::new(
            vec![
                Column { name: "x".into(), role: Role::Continuous },
                Column { name: "z".into(), role: Role::Continuous },
                Column { name: "y".into(), role: Role::Target },
            ],
            BTreeMap::new(),
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for r in 0..rows {
            let y = r % 2;
            let x = y as f64 * 2.0 + rng.random_range(-1.0..1.0);
            values.push(if r % 7 == 3 { Value::Missing } else { Value::Num(x) });
            values.push(Value::Num(rng.random_range(0.0..1.0)));
            labels.push(y);
        }
        Dataset { schema, values, labels }
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs_stage1: 8,
            epochs_stage2: 4,
            epochs_stage3: 4,
            n_prototypes: 4,
            parts: 2,
            hidden_dim: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fold_preprocessing_ignores_test_rows() {
        let d = noisy(60, 1);
        let split = &stratified_kfold(&d, 3, 4).unwrap()[0];
        let mut poisoned = d.clone();
        for &r in &split.test_idx {
            if let Value::Num(x) = poisoned.values[r * 2] {
                poisoned.values[r * 2] = Value::Num(x * 1e6);
            }
        }
        let clean = FoldData::new(&d, split).unwrap();
        let dirty = FoldData::new(&poisoned, split).unwrap();
        assert_eq!(clean.train, dirty.train);

        let a = train(&clean.train, &quick()).unwrap().model;
        let b = train(&dirty.train, &quick()).unwrap().model;
        assert_eq!(a, b);

        // missing test cells are filled with the train-fold statistic
        let fill = fit_imputation(&d, &split.train_idx).unwrap()["x"];
        for (i, &r) in split.test_idx.iter().enumerate() {
            if d.values[r * 2].is_missing() {
                assert_eq!(clean.test.values[i * 2], fill);
            }
        }
    }

    #[test]
    fn predict_fills_missing_cells() {
        let d = noisy(40, 2);
        let m = train(&impute_missing(&d).unwrap(), &quick()).unwrap().model;
        assert_eq!(predict(&m, &d).unwrap().len(), 40);
    }

    #[test]
    fn cross_validation_is_deterministic() {
        let d = noisy(40, 3);
        let a = cross_validate(&d, &quick(), 2, 9).unwrap();
        let b = cross_validate(&d, &quick(), 2, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fold_scores.len(), 2);
        assert_eq!(a.confusion.iter().map(|c| c.total()).sum::<u64>(), 40);
    }

    #[test]
    fn hpo_is_reproducible_and_returns_the_best_trial() {
        let d = noisy(40, 4);
        let run = || {
            let mut t = 0.0;
            hpo_random_search(&SearchSpace::medic(), 3, &d, &quick(), 2, 17, || { t += 1.0; t }, |_| {}).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.trials.iter().map(|t| &t.params).collect::<Vec<_>>(), b.trials.iter().map(|t| &t.params).collect::<Vec<_>>());
        assert_eq!(a.best, b.best);
        assert_eq!(a.trials.len(), 3);
        let top = a.trials.iter().map(|t| t.mean_gmean).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best_score, top);
        assert_eq!(a.trials[a.best_trial].mean_gmean, a.best_score);
    }
}
