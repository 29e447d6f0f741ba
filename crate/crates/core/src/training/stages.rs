use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::loss::{class_weights, loss_and_grads, Inputs};
use super::optim::Adam;
use super::{EpochLog, EpochRecord, TrainConfig};
use crate::binning::{init_binning, BinMode, Layout, PreparedRow, SegmentKind};
use crate::data::{stratified_holdout, Dataset};
use crate::error::{Error, Result, Warning};
use crate::eval::ConfusionMatrix;
use crate::linalg::{sq_dist, Matrix};
use crate::math;
use crate::network::{
    Cache, ClassifierHead, Extractor, Grads, Group, Model, PatchMasks, PrototypeSet, Provenance, Stage, TrainMask,
};

/// Result of a full three-stage run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: EpochLog,
    pub warnings: Vec<Warning>,
}

fn stage_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform_fill(rng: &mut ChaCha8Rng, out: &mut [f64], limit: f64) {
    for v in out.iter_mut() {
        *v = rng.random_range(-limit..limit);
    }
}

/// Fresh stage-1 model for `d`: binning fitted on every row, masks uniform
/// on `[0, 1)`, prototypes `N(0, 0.1²)`, extractor and head weights
/// Glorot-uniform, biases zero.
pub fn init_model(d: &Dataset, cfg: &TrainConfig) -> Result<(Model, Vec<Warning>)> {
    cfg.validate()?;
    if d.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let (bins, warnings) = init_binning(d, cfg.bins)?;
    let layout = Layout::new(&d.schema, cfg.bins);
    let width = layout.width;
    let (p, h, n, c) = (cfg.parts, cfg.hidden_dim, cfg.n_prototypes, d.schema.n_classes());
    let mut rng = stage_rng(cfg.seed, 0);

    let mut masks = Matrix::zeros(p, width);
    for v in masks.data.iter_mut() {
        *v = rng.random::<f64>();
    }
    let mut extractor = Extractor::zeros(width, 2 * h, h);
    uniform_fill(&mut rng, &mut extractor.w1, math::sqrt(6.0 / (width + 2 * h) as f64));
    uniform_fill(&mut rng, &mut extractor.w2, math::sqrt(6.0 / (3 * h) as f64));
    let normal = Normal::new(0.0, 0.1).expect("valid normal");
    let mut z = Matrix::zeros(n, h);
    for v in z.data.iter_mut() {
        *v = normal.sample(&mut rng);
    }
    let mut head_w = Matrix::zeros(c, n);
    uniform_fill(&mut rng, &mut head_w.data, math::sqrt(6.0 / (c + n) as f64));

    let model = Model {
        schema: d.schema.clone(),
        layout,
        bins,
        masks: PatchMasks { values: masks, binarized: false },
        extractor,
        prototypes: PrototypeSet { z, provenance: vec![None; n], frozen: false },
        head: ClassifierHead { w: head_w, b: vec![0.0; c] },
        stage: Stage::Fuzzy,
    };
    Ok((model, warnings))
}

/// Training rows prepared for the encoder, with the early-stopping split
/// and class weights fitted on the fit part.
struct StageData {
    rows: Vec<PreparedRow>,
    labels: Vec<usize>,
    fit: Vec<usize>,
    val: Vec<usize>,
    weights: Vec<f64>,
}

impl StageData {
    fn new(model: &Model, d: &Dataset, cfg: &TrainConfig) -> Result<StageData> {
        if d.rows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        let rows = (0..d.rows())
            .map(|r| {
                PreparedRow::new(d.row(r), &model.schema, &model.layout, &model.bins).map_err(|e| match e {
                    Error::MissingValue { feature, .. } => Error::MissingValue { feature, row: r },
                    e => e,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let c = model.n_classes();
        let (fit, val) = stratified_holdout(&d.labels, c, cfg.validation_fraction, cfg.seed);
        let fit_labels: Vec<usize> = fit.iter().map(|&i| d.labels[i]).collect();
        let weights = class_weights(&fit_labels, c, cfg.class_weighting);
        Ok(StageData { rows, labels: d.labels.clone(), fit, val, weights })
    }

    fn encodings(&self, model: &Model) -> Result<Vec<Vec<f64>>> {
        let mut cache = Cache::new(model);
        self.rows
            .iter()
            .map(|r| {
                model.encode_into(r, &mut cache)?;
                Ok(cache.e.clone())
            })
            .collect()
    }
}

/// Validation loss and g-mean of the model on `idx`.
fn evaluate(
    model: &Model,
    inputs: Inputs<'_>,
    data: &StageData,
    idx: &[usize],
    cfg: &TrainConfig,
) -> Result<(f64, f64)> {
    let loss = super::loss_total(model, inputs, idx, &data.labels, &data.weights, cfg)?;
    let mut cache = Cache::new(model);
    let mut cm = ConfusionMatrix::new(model.n_classes());
    for &i in idx {
        inputs.run(model, i, &mut cache)?;
        cm.add(data.labels[i], math::argmax(&cache.probs));
    }
    Ok((loss.total, cm.gmean().unwrap_or(f64::NAN)))
}

fn snapshot(model: &Model, mask: TrainMask) -> Vec<Option<Vec<f64>>> {
    Group::ALL.iter().map(|&g| mask.trains(g).then(|| model.group(g).to_vec())).collect()
}

fn restore(model: &mut Model, snap: &[Option<Vec<f64>>]) {
    for (&g, saved) in Group::ALL.iter().zip(snap) {
        if let Some(v) = saved {
            model.group_mut(g).copy_from_slice(v);
        }
    }
}

/// Minibatch descent with early stopping on the holdout loss; the best
/// parameters seen are restored at the end.
fn run_stage(
    model: &mut Model,
    stage: Stage,
    inputs: Inputs<'_>,
    data: &StageData,
    cfg: &TrainConfig,
    epochs: usize,
    mask: TrainMask,
) -> Result<(EpochLog, Vec<Warning>)> {
    let mut warnings = Vec::new();
    if data.fit.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let batch = cfg.batch_size.min(data.fit.len());
    if batch < cfg.batch_size {
        warnings.push(Warning::BatchClamped { requested: cfg.batch_size, used: batch });
    }
    if model.n_prototypes() < 2 && cfg.lambda_diversity > 0.0 {
        warnings.push(Warning::DiversityUndefined);
    }
    let mut rng = stage_rng(cfg.seed, stage as u64);
    let mut adam = Adam::new(model, cfg.learning_rate);
    let mut cache = Cache::new(model);
    let mut grads = Grads::zeros_like(model);
    let mut order = data.fit.clone();
    let mut log = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_params = snapshot(model, mask);
    let mut stale = 0;

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        for chunk in order.chunks(batch) {
            grads.clear();
            let lb =
                loss_and_grads(model, inputs, chunk, &data.labels, &data.weights, cfg, mask, &mut cache, &mut grads)?;
            if let Some(term) = lb.non_finite_term() {
                return Err(Error::NonFiniteLoss { term, stage: stage as u8, epoch });
            }
            let share = chunk.len() as f64 / order.len() as f64;
            for (s, v) in sums.iter_mut().zip([lb.ce, lb.sparsity, lb.diversity, lb.total]) {
                *s += share * v;
            }
            adam.step(model, &grads, mask);
        }
        let (monitor, val_gmean) = if data.val.is_empty() {
            (sums[3], f64::NAN)
        } else {
            evaluate(model, inputs, data, &data.val, cfg)?
        };
        if !monitor.is_finite() {
            return Err(Error::NonFiniteLoss { term: "validation", stage: stage as u8, epoch });
        }
        log.push(EpochRecord {
            epoch,
            stage: stage as u8,
            ce: sums[0],
            sparsity: sums[1],
            diversity: sums[2],
            total: sums[3],
            val_gmean,
        });
        if monitor < best {
            best = monitor;
            best_params = snapshot(model, mask);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    restore(model, &best_params);
    Ok((log, warnings))
}

/// Stage 1: every parameter, including bin centers and bandwidths, trained
/// end to end under fuzzy binning.
pub fn train_stage1(model: &mut Model, d: &Dataset, cfg: &TrainConfig) -> Result<(EpochLog, Vec<Warning>)> {
    if model.stage != Stage::Fuzzy || model.bins.mode != BinMode::Fuzzy {
        return Err(Error::InvalidConfig("stage 1 needs a fuzzy-mode model".into()));
    }
    let data = StageData::new(model, d, cfg)?;
    run_stage(model, Stage::Fuzzy, Inputs::Prepared(&data.rows), &data, cfg, cfg.epochs_stage1, TrainMask::ALL)
}

/// Thresholds every mask row at half its largest magnitude; a row with no
/// nonzero entry keeps only its first slot.
pub fn binarize_masks(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.rows, m.cols);
    for i in 0..m.rows {
        let row = m.row(i);
        let max = row.iter().fold(0.0f64, |a, &v| a.max(math::abs(v)));
        let dst = out.row_mut(i);
        if max == 0.0 {
            if let Some(first) = dst.first_mut() {
                *first = 1.0;
            }
            continue;
        }
        let tau = 0.5 * max;
        for (o, &v) in dst.iter_mut().zip(row) {
            *o = if math::abs(v) >= tau { 1.0 } else { 0.0 };
        }
    }
    out
}

/// Moves a stage-1 model to hard mode: centers sorted (mask and first-layer
/// columns permuted along, which leaves the fuzzy model unchanged), masks
/// binarized, binning frozen.
pub fn discretize(model: &mut Model) -> Result<Vec<Warning>> {
    if model.stage != Stage::Fuzzy {
        return Err(Error::InvalidConfig("only a stage-1 model can be discretized".into()));
    }
    let perms = model.bins.sort_centers();
    let width = model.layout.width;
    let mut columns: Vec<usize> = (0..width).collect();
    for seg in &model.layout.segments {
        if let SegmentKind::Continuous(f) = seg.kind {
            for (new, &old) in perms[f].iter().enumerate() {
                columns[seg.start + new] = seg.start + old;
            }
        }
    }
    let permute = |data: &mut [f64]| {
        for row in data.chunks_mut(width) {
            let old = row.to_vec();
            for (dst, &src) in row.iter_mut().zip(&columns) {
                *dst = old[src];
            }
        }
    };
    permute(&mut model.masks.values.data);
    permute(&mut model.extractor.w1);

    model.masks.values = binarize_masks(&model.masks.values);
    model.masks.binarized = true;
    model.bins.mode = BinMode::Hard;
    model.stage = Stage::Hard;

    let names = model.schema.continuous_names();
    Ok((0..model.bins.n_features())
        .filter(|&f| model.bins.intervals(f).merged)
        .map(|f| Warning::MergedCenters(names[f].into()))
        .collect())
}

/// Stage 2: extractor, prototypes and head fine-tuned on the frozen hard
/// encodings; binning and masks stay untouched.
pub fn train_stage2(model: &mut Model, d: &Dataset, cfg: &TrainConfig) -> Result<(EpochLog, Vec<Warning>)> {
    if model.stage != Stage::Hard || !model.masks.binarized {
        return Err(Error::InvalidConfig("stage 2 needs a discretized model".into()));
    }
    let data = StageData::new(model, d, cfg)?;
    let encoded = data.encodings(model)?;
    let mask = TrainMask { bins: false, masks: false, extractor: true, prototypes: true, head: true };
    run_stage(model, Stage::Hard, Inputs::Encoded(&encoded), &data, cfg, cfg.epochs_stage2, mask)
}

/// Replaces every prototype with the nearest part embedding over all rows
/// of `d` (ties go to the lowest row, then part) and records where it came
/// from. Prototypes are frozen afterwards.
pub fn project_prototypes(model: &mut Model, d: &Dataset) -> Result<()> {
    if model.stage < Stage::Hard {
        return Err(Error::InvalidConfig("prototypes are projected after stage 2".into()));
    }
    if d.rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let n = model.n_prototypes();
    let h = model.extractor.output;
    let mut cache = Cache::new(model);
    let mut best = vec![(f64::INFINITY, 0usize, 0usize); n];
    let mut best_emb = vec![0.0; n * h];
    for r in 0..d.rows() {
        let row = PreparedRow::new(d.row(r), &model.schema, &model.layout, &model.bins)?;
        model.encode_into(&row, &mut cache)?;
        model.forward_cached(&mut cache);
        for i in 0..model.n_parts() {
            let emb = &cache.emb[i * h..(i + 1) * h];
            for j in 0..n {
                let dist = sq_dist(emb, model.prototypes.z.row(j));
                if dist < best[j].0 {
                    best[j] = (dist, r, i);
                    best_emb[j * h..(j + 1) * h].copy_from_slice(emb);
                }
            }
        }
    }
    for (j, &(_, row, part)) in best.iter().enumerate() {
        model.prototypes.z.row_mut(j).copy_from_slice(&best_emb[j * h..(j + 1) * h]);
        model.prototypes.provenance[j] = Some(Provenance { row, part, source: d.row(row).to_vec() });
    }
    model.prototypes.frozen = true;
    model.stage = Stage::Projected;
    Ok(())
}

/// Stage 3: only the head is fine-tuned, on pooled distances computed once.
pub fn train_stage3(model: &mut Model, d: &Dataset, cfg: &TrainConfig) -> Result<(EpochLog, Vec<Warning>)> {
    if model.stage != Stage::Projected {
        return Err(Error::StageRequired);
    }
    let data = StageData::new(model, d, cfg)?;
    let mut cache = Cache::new(model);
    let pooled = data
        .rows
        .iter()
        .map(|r| {
            model.encode_into(r, &mut cache)?;
            model.forward_cached(&mut cache);
            Ok(cache.pooled.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let mask = TrainMask { bins: false, masks: false, extractor: false, prototypes: false, head: true };
    run_stage(model, Stage::Projected, Inputs::Pooled(&pooled), &data, cfg, cfg.epochs_stage3, mask)
}

/// Distinct `(row, part)` sources among the projected prototypes.
pub fn count_unique_prototypes(model: &Model) -> Result<usize> {
    if model.stage != Stage::Projected {
        return Err(Error::StageRequired);
    }
    let mut seen = BTreeSet::new();
    for p in &model.prototypes.provenance {
        let p = p.as_ref().ok_or(Error::StageRequired)?;
        seen.insert((p.row, p.part));
    }
    Ok(seen.len())
}

/// Full three-stage run on an imputed dataset.
pub fn train(d: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let (mut model, mut warnings) = init_model(d, cfg)?;
    let mut log = Vec::new();
    let absorb = |(l, w): (EpochLog, Vec<Warning>), log: &mut EpochLog, warnings: &mut Vec<Warning>| {
        log.extend(l);
        for w in w {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    };
    absorb(train_stage1(&mut model, d, cfg)?, &mut log, &mut warnings);
    let merged = discretize(&mut model)?;
    absorb((Vec::new(), merged), &mut log, &mut warnings);
    absorb(train_stage2(&mut model, d, cfg)?, &mut log, &mut warnings);
    project_prototypes(&mut model, d)?;
    absorb(train_stage3(&mut model, d, cfg)?, &mut log, &mut warnings);
    Ok(TrainOutcome { model, log, warnings })
}
