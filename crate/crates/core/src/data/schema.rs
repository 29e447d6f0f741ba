use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::is_missing_token;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Continuous,
    Categorical,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub role: Role,
}

/// User-facing schema description, deserialized from
/// `{"target": .., "continuous": [..], "categorical": [..]}`.
///
/// `classes` optionally fixes the label order; otherwise classes are indexed
/// by first appearance in the file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub target: String,
    #[serde(default)]
    pub continuous: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

/// A raw cell after parsing. Categorical cells hold an index into the
/// feature's vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Missing,
    Num(f64),
    Cat(usize),
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    /// Columns in file order; exactly one has role `Target`.
    pub columns: Vec<Column>,
    pub category_vocab: BTreeMap<String, Vec<String>>,
    /// Class labels; index = class id.
    pub classes: Vec<String>,
    /// Imputation values per non-target column, filled by imputation.
    #[serde(default)]
    pub impute: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Position among continuous features.
    Continuous(usize),
    /// Vocabulary size.
    Categorical(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureInfo<'a> {
    pub name: &'a str,
    pub kind: FeatureKind,
}

impl FeatureSchema {
    /// Builds a schema and checks its invariants.
    pub fn new(
        columns: Vec<Column>,
        category_vocab: BTreeMap<String, Vec<String>>,
        classes: Vec<String>,
    ) -> Result<Self> {
        let schema = Self { columns, category_vocab, classes, impute: BTreeMap::new() };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let targets = self.columns.iter().filter(|c| c.role == Role::Target).count();
        if targets != 1 {
            return Err(Error::InvalidSchema(alloc::format!(
                "expected exactly one target column, found {targets}"
            )));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::DuplicateRole(c.name.clone()));
            }
            if c.role == Role::Categorical {
                let vocab = self
                    .category_vocab
                    .get(&c.name)
                    .ok_or_else(|| Error::InvalidSchema(alloc::format!("no vocabulary for `{}`", c.name)))?;
                if vocab.is_empty() {
                    return Err(Error::InvalidSchema(alloc::format!("empty vocabulary for `{}`", c.name)));
                }
                for (j, v) in vocab.iter().enumerate() {
                    if vocab[..j].contains(v) {
                        return Err(Error::InvalidSchema(alloc::format!(
                            "duplicate category `{v}` in `{}`",
                            c.name
                        )));
                    }
                }
            }
        }
        if self.classes.is_empty() {
            return Err(Error::InvalidSchema("no classes".to_string()));
        }
        Ok(())
    }

    pub fn target(&self) -> &Column {
        self.columns.iter().find(|c| c.role == Role::Target).expect("validated schema has a target")
    }

    /// Non-target columns in schema order.
    pub fn features(&self) -> Vec<FeatureInfo<'_>> {
        let mut cont = 0;
        self.columns
            .iter()
            .filter(|c| c.role != Role::Target)
            .map(|c| {
                let kind = match c.role {
                    Role::Continuous => {
                        cont += 1;
                        FeatureKind::Continuous(cont - 1)
                    }
                    _ => FeatureKind::Categorical(self.category_vocab[&c.name].len()),
                };
                FeatureInfo { name: &c.name, kind }
            })
            .collect()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len() - 1
    }

    pub fn n_continuous(&self) -> usize {
        self.columns.iter().filter(|c| c.role == Role::Continuous).count()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.columns.iter().filter(|c| c.role != Role::Target).map(|c| c.name.as_str()).collect()
    }

    /// Names of continuous features, in order.
    pub fn continuous_names(&self) -> Vec<&str> {
        self.columns.iter().filter(|c| c.role == Role::Continuous).map(|c| c.name.as_str()).collect()
    }

    /// Renders a cell of feature `f` back to text.
    pub fn render_value(&self, f: usize, v: Value) -> String {
        let col = self.columns.iter().filter(|c| c.role != Role::Target).nth(f).expect("feature index");
        match v {
            Value::Missing => "NA".to_string(),
            Value::Num(x) => alloc::format!("{x}"),
            Value::Cat(i) => self.category_vocab[&col.name][i].clone(),
        }
    }
}

/// Instances with a resolved schema. `values` is row-major, one cell per
/// non-target column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub values: Vec<Value>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn row(&self, i: usize) -> &[Value] {
        let f = self.n_features();
        &self.values[i * f..(i + 1) * f]
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Value::is_missing)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0; self.schema.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// New dataset holding `idx` rows in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let f = self.n_features();
        let mut values = Vec::with_capacity(idx.len() * f);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            schema: self.schema.clone(),
            values,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Parses a table against a schema description. Vocabularies are built
    /// in first-appearance order; missing cells stay `Value::Missing`.
    pub fn from_records<S: AsRef<str>>(spec: &SchemaSpec, header: &[S], records: &[Vec<S>]) -> Result<Dataset> {
        let header: Vec<&str> = header.iter().map(|h| h.as_ref().trim()).collect();
        let mut role_of: BTreeMap<&str, Role> = BTreeMap::new();
        let named = core::iter::once((spec.target.as_str(), Role::Target))
            .chain(spec.continuous.iter().map(|n| (n.as_str(), Role::Continuous)))
            .chain(spec.categorical.iter().map(|n| (n.as_str(), Role::Categorical)));
        for (name, role) in named {
            if role_of.insert(name, role).is_some() {
                return Err(Error::DuplicateRole(name.to_string()));
            }
            if !header.contains(&name) {
                return Err(Error::UnknownColumn(name.to_string()));
            }
        }
        if records.is_empty() {
            return Err(Error::NoRows);
        }

        let mut columns = Vec::new();
        let mut positions = Vec::new();
        for (pos, h) in header.iter().enumerate() {
            if let Some(&role) = role_of.get(h) {
                columns.push(Column { name: h.to_string(), role });
                positions.push(pos);
            }
        }

        let mut vocab: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for c in columns.iter().filter(|c| c.role == Role::Categorical) {
            vocab.insert(c.name.clone(), Vec::new());
        }
        let (mut classes, fixed_classes) = match &spec.classes {
            Some(cs) => (cs.clone(), true),
            None => (Vec::new(), false),
        };

        let n_feat = columns.len() - 1;
        let mut values = Vec::with_capacity(records.len() * n_feat);
        let mut labels = Vec::with_capacity(records.len());
        for (r, rec) in records.iter().enumerate() {
            for (c, &pos) in columns.iter().zip(&positions) {
                let raw = rec.get(pos).map(|s| s.as_ref()).unwrap_or("");
                let cell = raw.trim();
                match c.role {
                    Role::Target => {
                        if is_missing_token(cell) {
                            return Err(Error::MissingLabel(r));
                        }
                        let idx = match classes.iter().position(|k| k == cell) {
                            Some(i) => i,
                            None if fixed_classes => {
                                return Err(Error::UnknownLabel { row: r, value: cell.to_string() })
                            }
                            None => {
                                classes.push(cell.to_string());
                                classes.len() - 1
                            }
                        };
                        labels.push(idx);
                    }
                    Role::Continuous => values.push(parse_number(&c.name, r, cell)?),
                    Role::Categorical => {
                        if is_missing_token(cell) {
                            values.push(Value::Missing);
                        } else {
                            let v = vocab.get_mut(&c.name).expect("vocab entry");
                            let idx = match v.iter().position(|k| k == cell) {
                                Some(i) => i,
                                None => {
                                    v.push(cell.to_string());
                                    v.len() - 1
                                }
                            };
                            values.push(Value::Cat(idx));
                        }
                    }
                }
            }
        }
        for (name, v) in vocab.iter_mut() {
            if v.is_empty() {
                return Err(Error::AllMissing(name.clone()));
            }
        }
        let schema = FeatureSchema::new(columns, vocab, classes)?;
        Ok(Dataset { schema, values, labels })
    }

    /// Parses a table against an already fitted schema (fixed vocabularies
    /// and classes). Columns are matched by name; extra columns are ignored.
    pub fn from_records_with_schema<S: AsRef<str>>(
        schema: &FeatureSchema,
        header: &[S],
        records: &[Vec<S>],
    ) -> Result<Dataset> {
        let header: Vec<&str> = header.iter().map(|h| h.as_ref().trim()).collect();
        let mut positions = Vec::with_capacity(schema.columns.len());
        for c in &schema.columns {
            let pos = header.iter().position(|h| *h == c.name).ok_or_else(|| Error::UnknownColumn(c.name.clone()))?;
            positions.push(pos);
        }
        if records.is_empty() {
            return Err(Error::NoRows);
        }
        let mut values = Vec::with_capacity(records.len() * schema.n_features());
        let mut labels = Vec::with_capacity(records.len());
        for (r, rec) in records.iter().enumerate() {
            for (c, &pos) in schema.columns.iter().zip(&positions) {
                let cell = rec.get(pos).map(|s| s.as_ref()).unwrap_or("").trim();
                match c.role {
                    Role::Target => {
                        if is_missing_token(cell) {
                            return Err(Error::MissingLabel(r));
                        }
                        let idx = schema
                            .classes
                            .iter()
                            .position(|k| k == cell)
                            .ok_or_else(|| Error::UnknownLabel { row: r, value: cell.to_string() })?;
                        labels.push(idx);
                    }
                    Role::Continuous => values.push(parse_number(&c.name, r, cell)?),
                    Role::Categorical => {
                        if is_missing_token(cell) {
                            values.push(Value::Missing);
                        } else {
                            let idx = schema.category_vocab[&c.name].iter().position(|k| k == cell).ok_or_else(
                                || Error::UnknownCategory { feature: c.name.clone(), value: cell.to_string() },
                            )?;
                            values.push(Value::Cat(idx));
                        }
                    }
                }
            }
        }
        Ok(Dataset { schema: schema.clone(), values, labels })
    }

    /// Inverse of [`Dataset::from_records`]: header plus one string record
    /// per row, in schema column order.
    pub fn to_records(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let header = self.schema.columns.iter().map(|c| c.name.clone()).collect();
        let mut out = Vec::with_capacity(self.rows());
        for r in 0..self.rows() {
            let mut f = 0;
            let row = self.row(r);
            let rec = self
                .schema
                .columns
                .iter()
                .map(|c| {
                    if c.role == Role::Target {
                        self.schema.classes[self.labels[r]].clone()
                    } else {
                        f += 1;
                        self.schema.render_value(f - 1, row[f - 1])
                    }
                })
                .collect();
            out.push(rec);
        }
        (header, out)
    }
}

fn parse_number(column: &str, row: usize, cell: &str) -> Result<Value> {
    if is_missing_token(cell) {
        return Ok(Value::Missing);
    }
    match cell.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Value::Num(x)),
        _ => Err(Error::NonNumeric { column: column.to_string(), row, value: cell.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(cells: &[&str]) -> Vec<String> {
        cells.iter().map(|s| s.to_string()).collect()
    }

    fn spec() -> SchemaSpec {
        SchemaSpec {
            target: "y".into(),
            continuous: vec!["a".into()],
            categorical: vec!["b".into()],
            classes: None,
        }
    }

    #[test]
    fn parses_roles_and_missing() {
        let header = rec(&["id", "a", "b", "y"]);
        let rows = vec![rec(&["1", "1.5", "x", "pos"]), rec(&["2", "NA", "", "neg"]), rec(&["3", "2", "z", "pos"])];
        let d = Dataset::from_records(&spec(), &header, &rows).unwrap();
        assert_eq!(d.rows(), 3);
        assert_eq!(d.schema.classes, vec!["pos", "neg"]);
        assert_eq!(d.labels, vec![0, 1, 0]);
        assert_eq!(d.row(1), &[Value::Missing, Value::Missing]);
        assert_eq!(d.schema.category_vocab["b"], vec!["x", "z"]);
        assert_eq!(d.schema.columns.len(), 3);
    }

    #[test]
    fn errors() {
        let header = rec(&["a", "b", "y"]);
        let empty: Vec<Vec<String>> = vec![];
        assert_eq!(Dataset::from_records(&spec(), &header, &empty), Err(Error::NoRows));

        let bad = vec![rec(&["abc", "x", "pos"])];
        assert!(matches!(Dataset::from_records(&spec(), &header, &bad), Err(Error::NonNumeric { .. })));

        let mut s = spec();
        s.continuous.push("missing_col".into());
        assert_eq!(
            Dataset::from_records(&s, &header, &[rec(&["1", "x", "pos"])]),
            Err(Error::UnknownColumn("missing_col".into()))
        );

        let mut s = spec();
        s.classes = Some(vec!["pos".into(), "neg".into()]);
        assert!(matches!(
            Dataset::from_records(&s, &header, &[rec(&["1", "x", "maybe"])]),
            Err(Error::UnknownLabel { .. })
        ));
    }

    #[test]
    fn declared_classes_fix_order() {
        let header = rec(&["a", "b", "y"]);
        let mut s = spec();
        s.classes = Some(vec!["neg".into(), "pos".into()]);
        let d = Dataset::from_records(&s, &header, &[rec(&["1", "x", "pos"]), rec(&["2", "x", "neg"])]).unwrap();
        assert_eq!(d.labels, vec![1, 0]);
    }

    #[test]
    fn fixed_schema_rejects_unknown_category() {
        let header = rec(&["a", "b", "y"]);
        let d = Dataset::from_records(&spec(), &header, &[rec(&["1", "x", "pos"])]).unwrap();
        let err = Dataset::from_records_with_schema(&d.schema, &header, &[rec(&["1", "q", "pos"])]);
        assert_eq!(err, Err(Error::UnknownCategory { feature: "b".into(), value: "q".into() }));
        let renamed = rec(&["a2", "b", "y"]);
        assert_eq!(
            Dataset::from_records_with_schema(&d.schema, &renamed, &[rec(&["1", "x", "pos"])]),
            Err(Error::UnknownColumn("a".into()))
        );
    }
}
