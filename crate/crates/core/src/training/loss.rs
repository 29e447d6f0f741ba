use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::binning::PreparedRow;
use crate::error::{Error, Result};
use crate::linalg::affine;
use crate::math;
use crate::network::{Cache, Grads, Group, Model, TrainMask};

/// Training inputs at the depth a stage needs them.
#[derive(Debug, Clone, Copy)]
pub enum Inputs<'a> {
    /// Rows encoded on the fly under the model's current binning.
    Prepared(&'a [PreparedRow]),
    /// Fixed encodings (binning frozen).
    Encoded(&'a [Vec<f64>]),
    /// Fixed pooled distances (everything below the head frozen).
    Pooled(&'a [Vec<f64>]),
}

impl Inputs<'_> {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Prepared(r) => r.len(),
            Inputs::Encoded(r) | Inputs::Pooled(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Runs the model on instance `i`, leaving logits and probabilities in
    /// `cache`.
    pub(crate) fn run(&self, model: &Model, i: usize, cache: &mut Cache) -> Result<()> {
        match self {
            Inputs::Prepared(rows) => {
                model.encode_into(&rows[i], cache)?;
                model.forward_cached(cache);
            }
            Inputs::Encoded(rows) => {
                cache.e.copy_from_slice(&rows[i]);
                model.forward_cached(cache);
            }
            Inputs::Pooled(rows) => {
                cache.pooled.copy_from_slice(&rows[i]);
                affine(&model.head.w.data, &model.head.b, &cache.pooled, &mut cache.logits);
                math::softmax_into(&cache.logits, &mut cache.probs);
            }
        }
        Ok(())
    }

    fn prepared(&self, i: usize) -> Option<&PreparedRow> {
        match self {
            Inputs::Prepared(rows) => Some(&rows[i]),
            _ => None,
        }
    }
}

/// Objective value split into its terms; `total = ce + sparsity + diversity`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub sparsity: f64,
    /// Non-positive: the term rewards spread-out prototypes.
    pub diversity: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn new(ce: f64, sparsity: f64, diversity: f64) -> Self {
        LossBreakdown { ce, sparsity, diversity, total: ce + sparsity + diversity }
    }

    /// Name of the first non-finite term.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [("ce", self.ce), ("sparsity", self.sparsity), ("diversity", self.diversity)]
            .into_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(n, _)| n)
    }
}

/// Per-class cross-entropy weights: `rows / (c · count_k)` when weighting is
/// on (0 for absent classes), otherwise all ones.
pub fn class_weights(labels: &[usize], n_classes: usize, weighting: bool) -> Vec<f64> {
    if !weighting {
        return vec![1.0; n_classes];
    }
    let mut counts = vec![0usize; n_classes];
    for &y in labels {
        counts[y] += 1;
    }
    counts
        .iter()
        .map(|&n| if n == 0 { 0.0 } else { labels.len() as f64 / (n_classes * n) as f64 })
        .collect()
}

/// `λs / (p·d') · Σ|M|`
fn sparsity(model: &Model, lambda: f64) -> f64 {
    let m = &model.masks.values;
    if lambda == 0.0 || m.data.is_empty() {
        return 0.0;
    }
    lambda / m.data.len() as f64 * m.data.iter().map(|v| math::abs(*v)).sum::<f64>()
}

fn sparsity_grad(model: &Model, lambda: f64, out: &mut [f64]) {
    let m = &model.masks.values.data;
    let scale = lambda / m.len() as f64;
    for (g, &v) in out.iter_mut().zip(m) {
        if v > 0.0 {
            *g += scale;
        } else if v < 0.0 {
            *g -= scale;
        }
    }
}

/// `−λd / (n(n−1)) · Σ_{i≠j} ‖z_i − z_j‖`; zero for fewer than two prototypes.
fn diversity(model: &Model, lambda: f64) -> f64 {
    let z = &model.prototypes.z;
    let n = z.rows;
    if lambda == 0.0 || n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += 2.0 * math::sqrt(crate::linalg::sq_dist(z.row(i), z.row(j)));
        }
    }
    -lambda / (n * (n - 1)) as f64 * sum
}

/// Coincident prototypes contribute a zero subgradient.
fn diversity_grad(model: &Model, lambda: f64, out: &mut [f64]) {
    let z = &model.prototypes.z;
    let (n, h) = (z.rows, z.cols);
    if lambda == 0.0 || n < 2 {
        return;
    }
    let scale = -2.0 * lambda / (n * (n - 1)) as f64;
    for i in 0..n {
        for j in i + 1..n {
            let dist = math::sqrt(crate::linalg::sq_dist(z.row(i), z.row(j)));
            if dist == 0.0 {
                continue;
            }
            for m in 0..h {
                let g = scale * (z.get(i, m) - z.get(j, m)) / dist;
                out[i * h + m] += g;
                out[j * h + m] -= g;
            }
        }
    }
}

fn check_batch(inputs: Inputs<'_>, idx: &[usize], labels: &[usize], weights: &[f64]) -> Result<f64> {
    if idx.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if labels.len() != inputs.len() {
        return Err(Error::DimensionMismatch { what: "labels", expected: inputs.len(), got: labels.len() });
    }
    let wsum: f64 = idx.iter().map(|&i| weights[labels[i]]).sum();
    if wsum > 0.0 {
        Ok(wsum)
    } else {
        Err(Error::InvalidConfig("batch carries no class weight".into()))
    }
}

/// Cross-entropy of one cached forward pass, from the logits.
fn cross_entropy(cache: &Cache, y: usize) -> f64 {
    let max = cache.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + math::ln(cache.logits.iter().map(|&l| math::exp(l - max)).sum::<f64>());
    lse - cache.logits[y]
}

/// Objective on the instances `idx`: class-weighted mean cross-entropy plus
/// the mask sparsity and prototype diversity penalties.
pub fn loss_total(
    model: &Model,
    inputs: Inputs<'_>,
    idx: &[usize],
    labels: &[usize],
    weights: &[f64],
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let wsum = check_batch(inputs, idx, labels, weights)?;
    let mut cache = Cache::new(model);
    let mut ce = 0.0;
    for &i in idx {
        inputs.run(model, i, &mut cache)?;
        ce += weights[labels[i]] * cross_entropy(&cache, labels[i]);
    }
    Ok(LossBreakdown::new(ce / wsum, sparsity(model, cfg.lambda_sparsity), diversity(model, cfg.lambda_diversity)))
}

/// [`loss_total`] together with its gradient, accumulated into `grads` for
/// the groups enabled in `mask`.
pub fn loss_and_grads(
    model: &Model,
    inputs: Inputs<'_>,
    idx: &[usize],
    labels: &[usize],
    weights: &[f64],
    cfg: &TrainConfig,
    mask: TrainMask,
    cache: &mut Cache,
    grads: &mut Grads,
) -> Result<LossBreakdown> {
    let wsum = check_batch(inputs, idx, labels, weights)?;
    let mut ce = 0.0;
    let mut g_logits = vec![0.0; model.n_classes()];
    for &i in idx {
        let y = labels[i];
        inputs.run(model, i, cache)?;
        let w = weights[y];
        ce += w * cross_entropy(cache, y);
        for (k, g) in g_logits.iter_mut().enumerate() {
            *g = w / wsum * (cache.probs[k] - if k == y { 1.0 } else { 0.0 });
        }
        model.backward(cache, inputs.prepared(i), &g_logits, mask, grads);
    }
    if mask.masks {
        sparsity_grad(model, cfg.lambda_sparsity, grads.get_mut(Group::Masks));
    }
    if mask.prototypes {
        diversity_grad(model, cfg.lambda_diversity, grads.get_mut(Group::Prototypes));
    }
    Ok(LossBreakdown::new(ce / wsum, sparsity(model, cfg.lambda_sparsity), diversity(model, cfg.lambda_diversity)))
}
