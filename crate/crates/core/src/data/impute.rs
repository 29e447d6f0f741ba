use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::schema::{Dataset, FeatureKind, Value};
use crate::error::{Error, Result};

/// Imputation values fitted on `rows` of `d`: lower-middle median for
/// continuous columns, most frequent category (first seen wins ties) for
/// categorical ones.
pub fn fit_imputation(d: &Dataset, rows: &[usize]) -> Result<BTreeMap<String, Value>> {
    let feats = d.schema.features();
    let mut out = BTreeMap::new();
    for (f, info) in feats.iter().enumerate() {
        let value = match info.kind {
            FeatureKind::Continuous(_) => {
                let mut xs: Vec<f64> = rows
                    .iter()
                    .filter_map(|&r| match d.row(r)[f] {
                        Value::Num(x) => Some(x),
                        _ => None,
                    })
                    .collect();
                if xs.is_empty() {
                    return Err(Error::AllMissing(info.name.into()));
                }
                xs.sort_by(f64::total_cmp);
                Value::Num(xs[(xs.len() - 1) / 2])
            }
            FeatureKind::Categorical(n) => {
                let mut counts = alloc::vec![0usize; n];
                let mut first_seen = alloc::vec![usize::MAX; n];
                for (pos, &r) in rows.iter().enumerate() {
                    if let Value::Cat(c) = d.row(r)[f] {
                        counts[c] += 1;
                        first_seen[c] = first_seen[c].min(pos);
                    }
                }
                let best = (0..n)
                    .filter(|&c| counts[c] > 0)
                    .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(first_seen[b].cmp(&first_seen[a])))
                    .ok_or_else(|| Error::AllMissing(info.name.into()))?;
                Value::Cat(best)
            }
        };
        out.insert(String::from(info.name), value);
    }
    Ok(out)
}

/// Replaces missing cells with stored imputation values and records them in
/// the schema.
pub fn apply_imputation(d: &Dataset, impute: &BTreeMap<String, Value>) -> Result<Dataset> {
    let names = d.schema.feature_names();
    let nf = names.len();
    let mut out = d.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        if v.is_missing() {
            let name = names[i % nf];
            *v = *impute.get(name).ok_or_else(|| Error::MissingValue { feature: name.into(), row: i / nf })?;
        }
    }
    out.schema.impute = impute.clone();
    Ok(out)
}

/// Fits imputation on every row of `d` and fills its gaps.
pub fn impute_missing(d: &Dataset) -> Result<Dataset> {
    let rows: Vec<usize> = (0..d.rows()).collect();
    let impute = fit_imputation(d, &rows)?;
    apply_imputation(d, &impute)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SchemaSpec;
    use alloc::string::ToString;
    use alloc::vec;

    fn table(cells: &[[&str; 3]]) -> Dataset {
        let spec = SchemaSpec {
            target: "y".into(),
            continuous: vec!["a".into()],
            categorical: vec!["b".into()],
            classes: None,
        };
        let header: Vec<String> = ["a", "b", "y"].iter().map(|s| s.to_string()).collect();
        let rows: Vec<Vec<String>> = cells.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        Dataset::from_records(&spec, &header, &rows).unwrap()
    }

    #[test]
    fn lower_middle_median_and_mode() {
        let d = table(&[["1.0", "A", "p"], ["", "A", "p"], ["3.0", "", "n"], ["NA", "B", "n"]]);
        let filled = impute_missing(&d).unwrap();
        let col_a: Vec<Value> = (0..4).map(|r| filled.row(r)[0]).collect();
        assert_eq!(col_a, vec![Value::Num(1.0), Value::Num(1.0), Value::Num(3.0), Value::Num(1.0)]);
        let col_b: Vec<Value> = (0..4).map(|r| filled.row(r)[1]).collect();
        assert_eq!(col_b, vec![Value::Cat(0), Value::Cat(0), Value::Cat(0), Value::Cat(1)]);
        assert_eq!(filled.schema.impute["a"], Value::Num(1.0));
    }

    #[test]
    fn mode_tie_goes_to_first_seen() {
        let d = table(&[["1", "B", "p"], ["1", "A", "p"], ["1", "", "p"], ["1", "A", "p"], ["1", "B", "n"]]);
        let filled = impute_missing(&d).unwrap();
        assert_eq!(filled.row(2)[1], Value::Cat(0));
    }

    #[test]
    fn identity_and_idempotence() {
        let d = table(&[["1", "A", "p"], ["2", "B", "n"]]);
        let once = impute_missing(&d).unwrap();
        assert_eq!(once.values, d.values);
        let d = table(&[["1", "A", "p"], ["", "", "n"], ["5", "B", "n"]]);
        let once = impute_missing(&d).unwrap();
        assert_eq!(impute_missing(&once).unwrap(), once);
    }

    #[test]
    fn all_missing_column_is_named() {
        let d = table(&[["", "A", "p"], ["NA", "B", "n"]]);
        assert_eq!(impute_missing(&d), Err(Error::AllMissing("a".into())));
    }
}
