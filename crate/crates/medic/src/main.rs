use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use medic::logs::{write_epoch_log, write_fold_log, write_trial_log};
use medic::report::{export_report, load_bounds};
use medic::{
    load_dataset, load_dataset_with_schema, load_schema_spec, ConfigOverrides, Failure, InputContext, ModelFile,
    RuntimeContext,
};
use medic_core::data::impute_missing;
use medic_core::eval::{confusion, cross_validate, hpo_random_search, SearchSpace};
use medic_core::explain::{explain_instance, render_instance, ClinicalBounds};
use medic_core::training::{count_unique_prototypes, train};
use medic_core::{Dataset, Stage};

#[derive(Parser)]
#[command(name = "medic", version, about = "Interpretable prototype-parts classifier for tabular medical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct DataArgs {
    /// CSV file with a header row
    #[arg(long)]
    data: PathBuf,
    /// JSON schema: {"target", "continuous", "categorical"}
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the three training stages and write a model file
    Train {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        cfg: ConfigOverrides,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch metrics CSV (default: next to the model file)
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Report g-mean and the confusion matrix of a model on a dataset
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also write per-class recalls and g-mean as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Explain a prediction and/or export the interval and prototype reports
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Zero-based row of --data to explain
        #[arg(long, requires = "data")]
        row: Option<usize>,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        /// Directory for interval, prototype and instance reports
        #[arg(long)]
        report_dir: Option<PathBuf>,
        /// TOML map `feature = [low, high]` used to clamp displayed intervals
        #[arg(long)]
        bounds: Option<PathBuf>,
    },
    /// Stratified k-fold cross-validation of one configuration
    Cv {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        cfg: ConfigOverrides,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Directory for the fold scores CSV
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Random hyperparameter search scored by cross-validation
    Hpo {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        cfg: ConfigOverrides,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// Directory for the trial log, best config and summary
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}

fn load_input(input: &DataArgs) -> Result<Dataset, Failure> {
    let spec = load_schema_spec(&input.schema).input()?;
    load_dataset(&input.data, &spec).input()
}

fn resolve(cfg: &ConfigOverrides) -> Result<medic_core::TrainConfig, Failure> {
    cfg.resolve().input()
}

fn load_model(path: &Path) -> Result<ModelFile, Failure> {
    ModelFile::load(path).input()
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(anyhow!("cannot create `{}`: {e}", dir.display())))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train { input, cfg, out, log } => {
            let cfg = resolve(&cfg)?;
            let data = impute_missing(&load_input(&input)?).input()?;
            let outcome = train(&data, &cfg).runtime()?;
            for w in &outcome.warnings {
                eprintln!("warning: {w:?}");
            }
            ModelFile::new(outcome.model.clone(), cfg).save(&out).runtime()?;
            let log_path = log.unwrap_or_else(|| out.with_extension("epochs.csv"));
            write_epoch_log(&log_path, &outcome.log).runtime()?;
            let unique = count_unique_prototypes(&outcome.model).runtime()?;
            println!(
                "trained {} rows, {} epochs; {} of {} prototypes unique; model written to {}",
                data.rows(),
                outcome.log.len(),
                unique,
                outcome.model.n_prototypes(),
                out.display()
            );
        }
        Command::Eval { model, data, csv } => {
            let file = load_model(&model)?;
            let d = load_dataset_with_schema(&data, &file.model.schema).input()?;
            let cm = confusion(&file.model, &d).input()?;
            let recalls = cm.recalls().runtime()?;
            let gmean = cm.gmean().runtime()?;
            let classes = &file.model.schema.classes;
            println!("confusion matrix (rows = true, columns = predicted)");
            println!("{:>10} {}", "", classes.iter().map(|c| format!("{c:>8}")).collect::<String>());
            for (t, name) in classes.iter().enumerate() {
                let cells: String = (0..classes.len()).map(|p| format!("{:>8}", cm.get(t, p))).collect();
                println!("{name:>10} {cells}");
            }
            for (name, r) in classes.iter().zip(&recalls) {
                println!("recall {name}: {r:.4}");
            }
            println!("g-mean: {gmean:.4}");
            if let Some(path) = csv {
                let mut w = csv::Writer::from_path(&path).runtime()?;
                w.write_record(["metric", "value"]).runtime()?;
                for (name, r) in classes.iter().zip(&recalls) {
                    w.write_record([format!("recall_{name}"), r.to_string()]).runtime()?;
                }
                w.write_record(["gmean".to_string(), gmean.to_string()]).runtime()?;
                w.flush().runtime()?;
            }
        }
        Command::Explain { model, data, row, top_k, report_dir, bounds } => {
            let file = load_model(&model)?;
            if file.model.stage != Stage::Projected {
                return Err(Failure::Input(anyhow!("stage 3 required; `{}` is at stage {}", model.display(), file.model.stage as u8)));
            }
            let bounds = match bounds {
                Some(p) => load_bounds(&p).input()?,
                None => ClinicalBounds::new(),
            };
            let instance = match (data, row) {
                (Some(path), Some(r)) => {
                    let d = load_dataset_with_schema(&path, &file.model.schema).input()?;
                    if r >= d.rows() {
                        return Err(Failure::Input(anyhow!("row {r} out of range ({} rows)", d.rows())));
                    }
                    let mut e = explain_instance(&file.model, d.row(r), top_k).runtime()?;
                    e.instance_id = Some(r);
                    print!("{}", render_instance(&e, &bounds));
                    Some(e)
                }
                _ => None,
            };
            if let Some(dir) = report_dir {
                for p in export_report(&file.model, &dir, &bounds, instance.as_ref()).runtime()? {
                    eprintln!("wrote {}", p.display());
                }
            } else if instance.is_none() {
                return Err(Failure::Input(anyhow!("nothing to do: pass --row with --data, or --report-dir")));
            }
        }
        Command::Cv { input, cfg, folds, out_dir } => {
            let cfg = resolve(&cfg)?;
            let d = load_input(&input)?;
            if folds < 2 || folds > d.rows() {
                return Err(Failure::Input(anyhow!("--folds must be between 2 and the row count")));
            }
            let report = cross_validate(&d, &cfg, folds, cfg.seed).runtime()?;
            for (i, s) in report.fold_scores.iter().enumerate() {
                println!("fold {}: {s:.4}", i + 1);
            }
            println!("mean g-mean: {:.4}", report.mean);
            if let Some(dir) = out_dir {
                ensure_dir(&dir)?;
                write_fold_log(&dir.join("folds.csv"), &report).runtime()?;
            }
        }
        Command::Hpo { input, cfg, folds, trials, out_dir } => {
            if trials == 0 {
                return Err(Failure::Input(anyhow!("--trials must be at least 1")));
            }
            let base = resolve(&cfg)?;
            let d = load_input(&input)?;
            if folds < 2 || folds > d.rows() {
                return Err(Failure::Input(anyhow!("--folds must be between 2 and the row count")));
            }
            let start = Instant::now();
            let result = hpo_random_search(
                &SearchSpace::medic(),
                trials,
                &d,
                &base,
                folds,
                base.seed,
                || start.elapsed().as_secs_f64(),
                |t| {
                    let params: Vec<String> = t.params.iter().map(|(n, v)| format!("{n}={v}")).collect();
                    match &t.error {
                        None => eprintln!("trial {}: {} -> {:.4} ({:.1}s)", t.trial, params.join(" "), t.mean_gmean, t.wall_seconds),
                        Some(e) => eprintln!("trial {}: {} failed: {e}", t.trial, params.join(" ")),
                    }
                },
            )
            .runtime()?;
            println!("best trial {}: mean g-mean {:.4}", result.best_trial, result.best_score);
            if let Some(dir) = out_dir {
                ensure_dir(&dir)?;
                write_trial_log(&dir.join("trials.csv"), &result.trials, folds).runtime()?;
                let best = toml::to_string(&result.best).map_err(|e| Failure::Runtime(e.into()))?;
                std::fs::write(dir.join("best_config.toml"), best).runtime()?;
            }
        }
    }
    Ok(())
}
