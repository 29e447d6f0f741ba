use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use medic_core::{Dataset, FeatureSchema, SchemaSpec};

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = File::open(path).with_context(|| format!("cannot read `{}`", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader
        .headers()
        .with_context(|| format!("cannot parse header of `{}`", path.display()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let records = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()
        .with_context(|| format!("cannot parse `{}`", path.display()))?;
    if records.is_empty() {
        return Err(anyhow::Error::new(medic_core::Error::NoRows).context(format!("`{}` is empty", path.display())));
    }
    Ok((header, records))
}

pub fn load_schema_spec(path: &Path) -> Result<SchemaSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read schema `{}`", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid schema `{}`", path.display()))
}

/// Parses a CSV file against a schema description. Missing cells
/// (empty or `NA`) are kept as missing.
pub fn load_dataset(path: &Path, spec: &SchemaSpec) -> Result<Dataset> {
    let (header, records) = read_table(path)?;
    Dataset::from_records(spec, &header, &records).with_context(|| format!("cannot load `{}`", path.display()))
}

/// Parses a CSV file against the fixed schema of a trained model.
pub fn load_dataset_with_schema(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
    let (header, records) = read_table(path)?;
    Dataset::from_records_with_schema(schema, &header, &records)
        .with_context(|| format!("`{}` does not match the model schema", path.display()))
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    let (header, records) = d.to_records();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write `{}`", path.display()))?;
    w.write_record(&header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use medic_core::data::impute_missing;

    #[test]
    fn load_impute_write_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("in.csv");
        std::fs::write(&src, "id,a,b,y\n1,1.5,x,p\n2,NA,y,q\n3,3.25,,p\n").unwrap();
        let spec: SchemaSpec =
            serde_json::from_str(r#"{"target":"y","continuous":["a"],"categorical":["b"]}"#).unwrap();
        let d = impute_missing(&load_dataset(&src, &spec).unwrap()).unwrap();
        let out = dir.path().join("out.csv");
        write_dataset(&out, &d).unwrap();
        let back = load_dataset(&out, &spec).unwrap();
        assert_eq!(back.values, d.values);
        assert_eq!(back.labels, d.labels);
        assert_eq!(back.schema.category_vocab, d.schema.category_vocab);
    }

    #[test]
    fn empty_file_has_no_rows() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("empty.csv");
        std::fs::write(&src, "").unwrap();
        let spec = SchemaSpec { target: "y".into(), ..SchemaSpec::default() };
        let err = load_dataset(&src, &spec).unwrap_err();
        assert!(format!("{err:#}").ends_with("no rows"), "{err:#}");
    }
}
