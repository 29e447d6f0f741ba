//! Typed tabular data: schema resolution, record parsing, imputation and
//! stratified cross-validation splits.

mod folds;
mod impute;
mod schema;

pub use folds::{stratified_kfold, stratified_holdout, FoldSplit};
pub use impute::{fit_imputation, impute_missing, apply_imputation};
pub use schema::{Column, Dataset, FeatureInfo, FeatureKind, FeatureSchema, Role, SchemaSpec, Value};

/// Cell strings that denote a missing value.
pub fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t == "NA"
}
