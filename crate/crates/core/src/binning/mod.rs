//! Learnable discretization of continuous features.
//!
//! Each continuous feature owns `K` trainable centers and one bandwidth.
//! While training, a value is softly assigned to every bin with normalized
//! Gaussian kernels; afterwards it goes to the nearest center, which is the
//! same as looking it up in the midpoint-bounded intervals of the sorted
//! centers.
//!
//! Centers live in standardized units (z-scores of the training split); the
//! mean/scale pair is stored per feature so intervals can be reported in the
//! original clinical units.

mod encode;
mod intervals;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use encode::{encode_instance, EncodedInstance, Layout, PreparedRow, Segment, SegmentKind};
pub use intervals::{intervals_from_centers, BinIntervals, Interval, Standardization};

use crate::data::{Dataset, FeatureKind, Value};
use crate::error::{Error, Result, Warning};
use crate::math;

/// Stability constant in the fuzzy normalizer.
pub const DEFAULT_EPS: f64 = 1e-8;

/// Centers closer than this are treated as one.
pub const MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinMode {
    Fuzzy,
    Hard,
}

/// Binning state for all continuous features, stored flat so the optimizer
/// can treat centers and bandwidths as plain parameter vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningParams {
    pub k: usize,
    pub eps: f64,
    pub mode: BinMode,
    /// `n_features × k`, standardized units.
    pub centers: Vec<f64>,
    /// Unconstrained bandwidth parameters; `σ = softplus(raw)`.
    pub raw_sigma: Vec<f64>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Side information from a fuzzy evaluation needed by the backward pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FuzzyAux {
    /// Bin with the smallest kernel distance (the shift of the normalizer).
    pub nearest: usize,
    /// Shifted normalizer `Σ exp(-(d_j - d_min)) + ε`.
    pub denom: f64,
}

impl BinningParams {
    pub fn n_features(&self) -> usize {
        self.raw_sigma.len()
    }

    pub fn centers_of(&self, f: usize) -> &[f64] {
        &self.centers[f * self.k..(f + 1) * self.k]
    }

    pub fn sigma(&self, f: usize) -> f64 {
        math::softplus(self.raw_sigma[f])
    }

    pub fn standardization(&self, f: usize) -> Standardization {
        Standardization { mean: self.mean[f], scale: self.scale[f] }
    }

    pub fn standardize(&self, f: usize, x: f64) -> f64 {
        (x - self.mean[f]) / self.scale[f]
    }

    pub fn intervals(&self, f: usize) -> BinIntervals {
        intervals_from_centers(self.centers_of(f), self.standardization(f))
    }

    /// Hard bin of a raw (original-unit) value, looked up in the reported
    /// intervals so encodings and reports agree exactly.
    pub fn hard_slot(&self, f: usize, raw: f64) -> Result<usize> {
        if !raw.is_finite() {
            return Err(Error::NonFinite(raw));
        }
        Ok(self.intervals(f).slot_of(raw))
    }

    /// Sorts every feature's centers ascending. Returns, per feature, the
    /// permutation `new slot -> old slot`.
    pub fn sort_centers(&mut self) -> Vec<Vec<usize>> {
        let k = self.k;
        (0..self.n_features())
            .map(|f| {
                let c = &mut self.centers[f * k..(f + 1) * k];
                let mut perm: Vec<usize> = (0..k).collect();
                perm.sort_by(|&a, &b| c[a].total_cmp(&c[b]));
                let sorted: Vec<f64> = perm.iter().map(|&i| c[i]).collect();
                c.copy_from_slice(&sorted);
                perm
            })
            .collect()
    }
}

/// Normalized Gaussian soft assignment of `x` to bins with the given centers
/// and bandwidth.
///
/// Evaluated in max-shifted form: `w_k = exp(-(d_k - d_min)) / (Σ_j
/// exp(-(d_j - d_min)) + ε)`, so weights stay normalized for values far from
/// every center.
pub fn fuzzy_bin(x: f64, centers: &[f64], sigma: f64, eps: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!("bandwidth must be positive, got {sigma}")));
    }
    let mut out = vec![0.0; centers.len()];
    fuzzy_weights_into(x, centers, sigma, eps, &mut out);
    Ok(out)
}

pub(crate) fn fuzzy_weights_into(x: f64, centers: &[f64], sigma: f64, eps: f64, out: &mut [f64]) -> FuzzyAux {
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut nearest = 0;
    let mut dmin = f64::INFINITY;
    for (j, (&c, o)) in centers.iter().zip(out.iter_mut()).enumerate() {
        let d = (x - c) * (x - c) * inv;
        *o = d;
        if d < dmin {
            dmin = d;
            nearest = j;
        }
    }
    let mut denom = eps;
    for o in out.iter_mut() {
        *o = math::exp(-(*o - dmin));
        denom += *o;
    }
    for o in out.iter_mut() {
        *o /= denom;
    }
    FuzzyAux { nearest, denom }
}

/// Accumulates gradients of the loss w.r.t. centers (into `g_centers`) and
/// returns the gradient w.r.t. `σ`, given the upstream gradient `g_w` of the
/// fuzzy weights `w` produced by [`fuzzy_weights_into`].
pub(crate) fn fuzzy_backward(
    x: f64,
    centers: &[f64],
    sigma: f64,
    eps: f64,
    w: &[f64],
    aux: FuzzyAux,
    g_w: &[f64],
    g_centers: &mut [f64],
) -> f64 {
    let weighted: f64 = g_w.iter().zip(w).map(|(g, w)| g * w).sum();
    let s2 = sigma * sigma;
    let mut g_sigma = 0.0;
    for j in 0..centers.len() {
        let mut g_d = w[j] * (weighted - g_w[j]);
        if j == aux.nearest {
            g_d += weighted * eps / aux.denom;
        }
        let diff = x - centers[j];
        g_centers[j] += g_d * (-diff / s2);
        g_sigma += g_d * (-(diff * diff) / (s2 * sigma));
    }
    g_sigma
}

/// One-hot nearest-center assignment. Ties at an exact midpoint go to the
/// upper bin.
pub fn hard_bin(x: f64, centers: &[f64]) -> Result<Vec<f64>> {
    let idx = hard_bin_index(x, centers)?;
    let mut out = vec![0.0; centers.len()];
    out[idx] = 1.0;
    Ok(out)
}

pub fn hard_bin_index(x: f64, centers: &[f64]) -> Result<usize> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    if centers.is_empty() {
        return Err(Error::InvalidConfig("no bin centers".into()));
    }
    Ok(intervals_from_centers(centers, Standardization::IDENTITY).slot_of(x))
}

/// Initial binning fitted on every row of `d`: z-score standardization, `K`
/// centers at the `(2i-1)/(2K)` quantiles, bandwidth at half the mean gap
/// between adjacent centers.
pub fn init_binning(d: &Dataset, k: usize) -> Result<(BinningParams, Vec<Warning>)> {
    if k == 0 {
        return Err(Error::InvalidConfig("bins per feature must be at least 1".into()));
    }
    let feats = d.schema.features();
    let mut params = BinningParams {
        k,
        eps: DEFAULT_EPS,
        mode: BinMode::Fuzzy,
        centers: Vec::new(),
        raw_sigma: Vec::new(),
        mean: Vec::new(),
        scale: Vec::new(),
    };
    let mut warnings = Vec::new();
    for (f, info) in feats.iter().enumerate() {
        if !matches!(info.kind, FeatureKind::Continuous(_)) {
            continue;
        }
        let mut xs = Vec::with_capacity(d.rows());
        for r in 0..d.rows() {
            match d.row(r)[f] {
                Value::Num(x) => xs.push(x),
                _ => return Err(Error::MissingValue { feature: info.name.into(), row: r }),
            }
        }
        if xs.is_empty() {
            return Err(Error::NoRows);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        let sd = math::sqrt(var);
        let scale = if sd > 1e-12 { sd } else { 1.0 };
        let mut zs: Vec<f64> = xs.iter().map(|x| (x - mean) / scale).collect();
        zs.sort_by(f64::total_cmp);

        let mut centers: Vec<f64> = (1..=k).map(|i| quantile(&zs, (2 * i - 1) as f64 / (2 * k) as f64)).collect();
        if centers.windows(2).any(|w| w[1] - w[0] < MERGE_TOL) {
            for (i, c) in centers.iter_mut().enumerate() {
                *c += 1e-3 * i as f64;
            }
            warnings.push(Warning::CollapsedCenters(info.name.into()));
        }
        let sigma = if k > 1 {
            let mean_gap = (centers[k - 1] - centers[0]) / (k - 1) as f64;
            (0.5 * mean_gap).max(1e-3)
        } else {
            1.0
        };
        params.centers.extend_from_slice(&centers);
        params.raw_sigma.push(math::softplus_inv(sigma));
        params.mean.push(mean);
        params.scale.push(scale);
    }
    Ok((params, warnings))
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, FeatureSchema, Role};
    use alloc::collections::BTreeMap;

    /// Eq. 1-2 evaluated literally, without the max shift.
    fn direct_weights(x: f64, centers: &[f64], sigma: f64, eps: f64) -> Vec<f64> {
        let kern: Vec<f64> = centers.iter().map(|c| libm::exp(-(x - c) * (x - c) / (2.0 * sigma * sigma))).collect();
        let s: f64 = kern.iter().sum::<f64>() + eps;
        kern.iter().map(|k| k / s).collect()
    }

    #[test]
    fn fuzzy_examples() {
        let w = fuzzy_bin(10.0, &[0.0, 10.0, 20.0], 1.0, DEFAULT_EPS).unwrap();
        let expect = direct_weights(10.0, &[0.0, 10.0, 20.0], 1.0, DEFAULT_EPS);
        for (a, b) in w.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(w[0] < 1e-10 && w[2] < 1e-10 && (w[1] - 1.0).abs() < 1e-7);

        let w = fuzzy_bin(1.0, &[0.0, 2.0], 1.0, DEFAULT_EPS).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-6 && (w[1] - 0.5).abs() < 1e-6);

        assert!(matches!(fuzzy_bin(f64::NAN, &[0.0], 1.0, DEFAULT_EPS), Err(Error::NonFinite(_))));
    }

    #[test]
    fn fuzzy_far_from_centers_stays_normalized() {
        let w = fuzzy_bin(50.0, &[-1.0, 0.0, 1.0], 0.1, DEFAULT_EPS).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(w.iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn hard_examples() {
        assert_eq!(hard_bin(12.0, &[0.0, 10.0, 20.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(hard_bin(5.0, &[0.0, 10.0]).unwrap(), vec![0.0, 1.0]);
        assert_eq!(hard_bin(-3.0, &[4.0]).unwrap(), vec![1.0]);
        assert_eq!(hard_bin(15.0, &[20.0, 0.0, 10.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(hard_bin(f64::INFINITY, &[0.0]).is_err());
    }

    fn one_feature(xs: &[f64]) -> Dataset {
        let schema = FeatureSchema::new(
            vec![Column { name: "x".into(), role: Role::Continuous }, Column { name: "y".into(), role: Role::Target }],
            BTreeMap::new(),
            vec!["a".into()],
        )
        .unwrap();
        Dataset { schema, values: xs.iter().map(|&x| Value::Num(x)).collect(), labels: vec![0; xs.len()] }
    }

    #[test]
    fn init_quantiles_on_uniform_grid() {
        let xs: Vec<f64> = (0..=600).map(|i| i as f64 / 600.0).collect();
        let d = one_feature(&xs);
        let (p, w) = init_binning(&d, 3).unwrap();
        assert!(w.is_empty());
        let st = p.standardization(0);
        let orig: Vec<f64> = p.centers_of(0).iter().map(|&c| st.to_original(c)).collect();
        for (o, q) in orig.iter().zip([1.0 / 6.0, 0.5, 5.0 / 6.0]) {
            assert!((o - q).abs() < 1e-9, "{o} vs {q}");
        }
        let gap = (p.centers_of(0)[2] - p.centers_of(0)[0]) / 2.0;
        assert!((p.sigma(0) - gap / 2.0).abs() < 1e-12);
    }

    #[test]
    fn init_single_bin_is_median() {
        let d = one_feature(&[5.0, 1.0, 3.0, 9.0, 7.0]);
        let (p, _) = init_binning(&d, 1).unwrap();
        assert!((p.standardization(0).to_original(p.centers_of(0)[0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn init_constant_feature_spreads_centers() {
        let d = one_feature(&[2.0; 10]);
        let (p, w) = init_binning(&d, 3).unwrap();
        let c = p.centers_of(0);
        assert!(c[0] < c[1] && c[1] < c[2]);
        assert_eq!(w, vec![Warning::CollapsedCenters("x".into())]);
        assert!(p.scale[0] > 0.0 && p.sigma(0) > 0.0);
    }

    fn sorted_distinct(mut c: Vec<f64>) -> Vec<f64> {
        c.sort_by(f64::total_cmp);
        c.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        c
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(1000))]

        #[test]
        fn intervals_tile_the_line(
            centers in proptest::collection::vec(-50.0f64..50.0, 1..8),
            mean in -10.0f64..10.0,
            scale in 0.1f64..20.0,
            x in -2000.0f64..2000.0,
        ) {
            let c = sorted_distinct(centers);
            let iv = intervals_from_centers(&c, Standardization { mean, scale });
            proptest::prop_assert_eq!(iv.intervals.len(), c.len());
            proptest::prop_assert!(iv.intervals[0].lower.is_none());
            proptest::prop_assert!(iv.intervals[c.len() - 1].upper.is_none());
            for pair in iv.intervals.windows(2) {
                proptest::prop_assert_eq!(pair[0].upper, pair[1].lower);
                proptest::prop_assert!(pair[1].lower.unwrap() < pair[1].upper.unwrap_or(f64::INFINITY));
            }
            proptest::prop_assert_eq!(iv.intervals.iter().filter(|i| i.contains(x)).count(), 1);
        }

        #[test]
        fn fuzzy_weights_normalized(
            centers in proptest::collection::vec(-5.0f64..5.0, 1..8),
            sigma in 1e-3f64..5.0,
            x in -100.0f64..100.0,
        ) {
            let w = fuzzy_bin(x, &centers, sigma, DEFAULT_EPS).unwrap();
            proptest::prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            proptest::prop_assert!(w.iter().all(|&v| v >= 0.0));
        }

        #[test]
        fn narrow_fuzzy_matches_hard(
            centers in proptest::collection::vec(-5.0f64..5.0, 2..8),
            t in 0.0f64..1.0,
        ) {
            let c = sorted_distinct(centers);
            proptest::prop_assume!(c.len() >= 2);
            let span = c[c.len() - 1] - c[0];
            let x = c[0] - 0.2 * span + 1.4 * span * t;
            let sigma = 1e-3 * span;
            // Neighbour weight ratio at distance δ from a midpoint of gap g is
            // exp(-gδ/σ²); skip x where that ratio exceeds 1e-4.
            proptest::prop_assume!(c.windows(2).all(|p| {
                let g = p[1] - p[0];
                ((p[0] + p[1]) / 2.0 - x).abs() * g / (sigma * sigma) > 4.0 * core::f64::consts::LN_10
            }));
            let w = fuzzy_bin(x, &c, sigma, DEFAULT_EPS).unwrap();
            let hard = hard_bin_index(x, &c).unwrap();
            proptest::prop_assert_eq!(math::argmax(&w), hard);
            proptest::prop_assert!(w[hard] >= 1.0 - 1e-3, "w {:?}", w);
        }

        #[test]
        fn hard_slot_lies_in_reported_interval(
            centers in proptest::collection::vec(-3.0f64..3.0, 1..8),
            mean in -100.0f64..100.0,
            scale in 0.01f64..50.0,
            raw in -400.0f64..400.0,
        ) {
            let c = sorted_distinct(centers);
            let st = Standardization { mean, scale };
            let iv = intervals_from_centers(&c, st);
            let slot = hard_bin_index((raw - mean) / scale, &c).unwrap();
            let found = iv.intervals.iter().position(|i| i.contains(raw)).unwrap();
            // one ulp of disagreement is possible only within rounding of a boundary
            let boundary = iv.intervals.iter().flat_map(|i| i.lower).any(|b| (b - raw).abs() <= 1e-9 * b.abs().max(1.0));
            proptest::prop_assert!(found == iv.slot_interval[slot] || boundary);
        }
    }
}
