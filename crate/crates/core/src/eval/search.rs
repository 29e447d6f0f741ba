use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cross_validate;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math;
use crate::training::TrainConfig;

/// Values a hyperparameter may take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// One of the listed values, uniformly.
    Choice { values: Vec<f64> },
    /// Integer in `[lo, hi]`, uniformly.
    Int { lo: i64, hi: i64 },
    /// Real in `[lo, hi]`, uniform or log-uniform.
    Real { lo: f64, hi: f64, log: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    /// A [`TrainConfig`] field name.
    pub name: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<Param>,
}

impl SearchSpace {
    /// Batch size in multiples of 16 up to 256, embedding width 2–16,
    /// log-uniform learning rate in `[1e-5, 0.1]`, prototype count in
    /// multiples of 4 up to 96.
    pub fn medic() -> SearchSpace {
        let steps = |step: usize, max: usize| (1..=max / step).map(|i| (i * step) as f64).collect();
        SearchSpace {
            params: alloc::vec![
                Param { name: "batch_size".into(), domain: Domain::Choice { values: steps(16, 256) } },
                Param { name: "hidden_dim".into(), domain: Domain::Int { lo: 2, hi: 16 } },
                Param { name: "learning_rate".into(), domain: Domain::Real { lo: 1e-5, hi: 0.1, log: true } },
                Param { name: "n_prototypes".into(), domain: Domain::Choice { values: steps(4, 96) } },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.params {
            let ok = match &p.domain {
                Domain::Choice { values } => !values.is_empty() && values.iter().all(|v| v.is_finite()),
                Domain::Int { lo, hi } => lo <= hi,
                Domain::Real { lo, hi, log } => lo <= hi && lo.is_finite() && hi.is_finite() && (!log || *lo > 0.0),
            };
            if !ok {
                return Err(Error::InvalidConfig(format!("empty or invalid range for `{}`", p.name)));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<(String, f64)> {
        self.params
            .iter()
            .map(|p| {
                let v = match &p.domain {
                    Domain::Choice { values } => values[rng.random_range(0..values.len())],
                    Domain::Int { lo, hi } => rng.random_range(*lo..=*hi) as f64,
                    Domain::Real { lo, hi, log: false } => lo + (hi - lo) * rng.random::<f64>(),
                    Domain::Real { lo, hi, log: true } => {
                        let (a, b) = (math::ln(*lo), math::ln(*hi));
                        math::exp(a + (b - a) * rng.random::<f64>())
                    }
                };
                (p.name.clone(), v)
            })
            .collect()
    }
}

/// Copy of `base` with the sampled values written into the named fields.
pub fn apply_sample(base: &TrainConfig, sample: &[(String, f64)]) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    for (name, v) in sample {
        let int = || {
            if *v >= 0.0 && *v == libm::floor(*v) {
                Ok(*v as usize)
            } else {
                Err(Error::InvalidConfig(format!("`{name}` needs a non-negative integer, got {v}")))
            }
        };
        match name.as_str() {
            "batch_size" => cfg.batch_size = int()?,
            "hidden_dim" => cfg.hidden_dim = int()?,
            "n_prototypes" => cfg.n_prototypes = int()?,
            "parts" => cfg.parts = int()?,
            "bins" => cfg.bins = int()?,
            "learning_rate" => cfg.learning_rate = *v,
            "lambda_sparsity" => cfg.lambda_sparsity = *v,
            "lambda_diversity" => cfg.lambda_diversity = *v,
            _ => return Err(Error::InvalidConfig(format!("`{name}` is not a tunable setting"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One evaluated configuration. Failed trials carry the error and a NaN
/// mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub params: Vec<(String, f64)>,
    pub fold_scores: Vec<f64>,
    pub mean_gmean: f64,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoResult {
    pub best: TrainConfig,
    pub best_trial: usize,
    pub best_score: f64,
    pub trials: Vec<TrialRecord>,
}

/// Random search: `budget` configurations drawn from `space` on top of
/// `base`, each scored by `k`-fold cross-validation. The earliest trial with
/// the highest mean g-mean wins. `clock` returns seconds from any fixed
/// origin; `observe` sees every trial as it finishes.
#[allow(clippy::too_many_arguments)]
pub fn hpo_random_search(
    space: &SearchSpace,
    budget: usize,
    d: &Dataset,
    base: &TrainConfig,
    k: usize,
    seed: u64,
    mut clock: impl FnMut() -> f64,
    mut observe: impl FnMut(&TrialRecord),
) -> Result<HpoResult> {
    if budget == 0 {
        return Err(Error::InvalidConfig("trial budget must be at least 1".into()));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(usize, f64, TrainConfig)> = None;
    for trial in 0..budget {
        let params = space.sample(&mut rng);
        let start = clock();
        let outcome = apply_sample(base, &params).and_then(|cfg| Ok((cross_validate(d, &cfg, k, seed)?, cfg)));
        let wall_seconds = clock() - start;
        let record = match outcome {
            Ok((report, cfg)) => {
                if best.as_ref().map_or(true, |(_, s, _)| report.mean > *s) {
                    best = Some((trial, report.mean, cfg));
                }
                TrialRecord {
                    trial,
                    params,
                    fold_scores: report.fold_scores,
                    mean_gmean: report.mean,
                    wall_seconds,
                    error: None,
                }
            }
            Err(e) => TrialRecord {
                trial,
                params,
                fold_scores: Vec::new(),
                mean_gmean: f64::NAN,
                wall_seconds,
                error: Some(e.to_string()),
            },
        };
        observe(&record);
        trials.push(record);
    }
    match best {
        Some((best_trial, best_score, best)) => Ok(HpoResult { best, best_trial, best_score, trials }),
        None => Err(Error::AllTrialsFailed(
            trials.iter().map(|t| format!("trial {}: {}", t.trial, t.error.as_deref().unwrap_or("?"))).collect(),
        )),
    }
}
