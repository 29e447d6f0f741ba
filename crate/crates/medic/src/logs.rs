use std::path::Path;

use anyhow::{Context, Result};
use medic_core::eval::{CvReport, TrialRecord};
use medic_core::training::EpochRecord;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot write `{}`", path.display()))
}

pub fn write_epoch_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "stage", "ce", "sparsity", "diversity", "total", "val_gmean"])?;
    for r in log {
        w.write_record([
            r.epoch.to_string(),
            r.stage.to_string(),
            r.ce.to_string(),
            r.sparsity.to_string(),
            r.diversity.to_string(),
            r.total.to_string(),
            r.val_gmean.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per trial: sampled settings, `k` fold scores, mean g-mean, wall
/// time in seconds and the error of a failed trial.
pub fn write_trial_log(path: &Path, trials: &[TrialRecord], k: usize) -> Result<()> {
    let mut w = writer(path)?;
    let names: Vec<String> = trials.first().map(|t| t.params.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default();
    let mut header = vec!["trial".to_string()];
    header.extend(names.iter().cloned());
    header.extend((1..=k).map(|i| format!("fold_{i}")));
    header.extend(["mean_gmean".to_string(), "wall_seconds".to_string(), "error".to_string()]);
    w.write_record(&header)?;
    for t in trials {
        let mut row = vec![t.trial.to_string()];
        row.extend(t.params.iter().map(|(_, v)| v.to_string()));
        row.extend((0..k).map(|i| t.fold_scores.get(i).map_or_else(String::new, f64::to_string)));
        row.push(t.mean_gmean.to_string());
        row.push(format!("{:.3}", t.wall_seconds));
        row.push(t.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_fold_log(path: &Path, report: &CvReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["fold", "gmean"])?;
    for (i, s) in report.fold_scores.iter().enumerate() {
        w.write_record([(i + 1).to_string(), s.to_string()])?;
    }
    w.write_record(["mean".to_string(), report.mean.to_string()])?;
    w.flush()?;
    Ok(())
}
