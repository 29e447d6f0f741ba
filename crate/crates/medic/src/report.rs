use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use medic_core::explain::{
    decode_all, interval_table, render_instance, render_interval_table, render_prototypes, ClinicalBounds,
    InstanceExplanation, IntervalRow,
};
use medic_core::Model;

/// Reads clinical display bounds from TOML, one `feature = [low, high]`
/// entry per line.
pub fn load_bounds(path: &Path) -> Result<ClinicalBounds> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read bounds `{}`", path.display()))?;
    let raw: BTreeMap<String, [f64; 2]> =
        toml::from_str(&text).with_context(|| format!("invalid bounds `{}`", path.display()))?;
    Ok(raw.into_iter().map(|(k, [lo, hi])| (k, (lo, hi))).collect())
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    std::fs::write(&path, contents).with_context(|| format!("cannot write `{}`", path.display()))
}

pub fn interval_csv(rows: &[IntervalRow]) -> Result<String> {
    let k = rows.iter().map(|r| r.intervals.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["feature".to_string()];
    header.extend((1..=k).map(|i| format!("interval_{i}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.feature.clone()];
        rec.extend(r.intervals.iter().map(|i| i.to_ascii()));
        rec.resize(k + 1, String::new());
        w.write_record(&rec)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json(value: &impl serde::Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes the interval table and decoded prototypes, plus one instance
/// explanation when given, as text and machine-readable files under `dir`.
/// Returns the paths written.
pub fn export_report(
    model: &Model,
    dir: &Path,
    bounds: &ClinicalBounds,
    instance: Option<&InstanceExplanation>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    let rows = interval_table(model);
    let prototypes = decode_all(model)?;
    let mut files = vec![
        (dir.join("intervals.csv"), interval_csv(&rows)?),
        (dir.join("intervals.txt"), render_interval_table(&rows, bounds)),
        (dir.join("prototypes.json"), json(&prototypes)?),
        (dir.join("prototypes.txt"), render_prototypes(&prototypes, &model.schema.classes, bounds)),
    ];
    if let Some(e) = instance {
        let stem = e.instance_id.map_or_else(|| "instance".to_string(), |i| format!("instance_{i}"));
        files.push((dir.join(format!("{stem}.json")), json(e)?));
        files.push((dir.join(format!("{stem}.txt")), render_instance(e, bounds)));
    }
    let mut written = Vec::new();
    for (path, contents) in files {
        write(path.clone(), &contents)?;
        written.push(path);
    }
    Ok(written)
}
