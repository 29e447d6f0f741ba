//! Prototypes decoded into conjunctions of feature conditions, and
//! per-instance rankings of the prototypes by similarity.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::binning::{encode_instance, Interval, SegmentKind};
use crate::data::{apply_imputation, Dataset, Value};
use crate::error::{Error, Result};
use crate::network::{Model, Stage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConditionKind {
    /// Continuous feature in the interval of bin `bin`.
    Interval { bin: usize, interval: Interval },
    /// Categorical feature equal to vocabulary entry `index`.
    Category { index: usize, value: String },
}

/// One active slot of a prototype part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    /// Position of the feature among the schema's non-target columns.
    pub feature_index: usize,
    /// Slot in the encoded vector.
    pub slot: usize,
    #[serde(flatten)]
    pub kind: ConditionKind,
}

impl Condition {
    pub fn is_satisfied_by(&self, row: &[Value]) -> bool {
        match (&self.kind, row.get(self.feature_index)) {
            (ConditionKind::Interval { interval, .. }, Some(Value::Num(x))) => interval.contains(*x),
            (ConditionKind::Category { index, .. }, Some(Value::Cat(c))) => c == index,
            _ => false,
        }
    }

    /// Rendering with interval endpoints clamped to `bounds` when given.
    pub fn render(&self, bounds: Option<(f64, f64)>) -> String {
        match (&self.kind, bounds) {
            (ConditionKind::Interval { interval, .. }, Some((lo, hi))) => {
                format!("{} ∈ {}", self.feature, interval.clamped(lo, hi))
            }
            _ => self.to_string(),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ConditionKind::Interval { interval, .. } => write!(f, "{} ∈ {}", self.feature, interval),
            ConditionKind::Category { value, .. } => write!(f, "{} = {}", self.feature, value),
        }
    }
}

/// Conjunction text, `a ∧ b ∧ …`.
pub fn conjunction(conditions: &[Condition], bounds: &ClinicalBounds) -> String {
    conditions.iter().map(|c| c.render(bounds.get(&c.feature).copied())).collect::<Vec<_>>().join(" ∧ ")
}

/// Per-feature `(low, high)` display bounds in original units.
pub type ClinicalBounds = BTreeMap<String, (f64, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceRef {
    pub row: usize,
    pub part: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeExplanation {
    pub prototype_id: usize,
    pub provenance: ProvenanceRef,
    pub conditions: Vec<Condition>,
    /// Head weight of this prototype's pooled distance for every class.
    pub class_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeMatch {
    pub prototype_id: usize,
    pub similarity: f64,
    pub distance: f64,
    /// Part of the instance closest to the prototype.
    pub part: usize,
    pub conditions: Vec<Condition>,
    /// The prototype's conditions that the instance satisfies.
    pub shared: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceExplanation {
    pub instance_id: Option<usize>,
    pub prediction: usize,
    pub predicted_class: String,
    pub probabilities: Vec<f64>,
    /// Ordered by decreasing similarity.
    pub matches: Vec<PrototypeMatch>,
}

/// `1 / (1 + d)`.
pub fn similarity_from_distance(dist: f64) -> Result<f64> {
    if dist.is_nan() {
        return Err(Error::NonFinite(dist));
    }
    if dist < 0.0 {
        return Err(Error::NegativeDistance(dist));
    }
    Ok(1.0 / (1.0 + dist))
}

fn require_projected(model: &Model) -> Result<()> {
    if model.stage == Stage::Projected {
        Ok(())
    } else {
        Err(Error::StageRequired)
    }
}

/// Conditions read off the hard encoding of the prototype's source row,
/// restricted to the nonzero entries of its part's mask.
pub fn decode_prototype(model: &Model, j: usize) -> Result<PrototypeExplanation> {
    require_projected(model)?;
    let n = model.n_prototypes();
    let prov = model
        .prototypes
        .provenance
        .get(j)
        .ok_or(Error::OutOfRange { index: j, len: n })?
        .as_ref()
        .ok_or(Error::MissingProvenance(j))?;
    let encoded = encode_instance(&prov.source, &model.schema, &model.bins)?;
    let mask = model.masks.values.row(prov.part);
    let feats = model.schema.features();
    let mut conditions = Vec::new();
    for (slot, (&m, &e)) in mask.iter().zip(&encoded.vector).enumerate() {
        if m == 0.0 || e == 0.0 {
            continue;
        }
        let (seg, offset) = model.layout.locate(slot);
        let kind = match seg.kind {
            SegmentKind::Continuous(c) => {
                ConditionKind::Interval { bin: offset, interval: model.bins.intervals(c).interval_of_slot(offset) }
            }
            SegmentKind::Categorical => ConditionKind::Category {
                index: offset,
                value: model.schema.render_value(seg.feature, Value::Cat(offset)),
            },
        };
        conditions.push(Condition { feature: feats[seg.feature].name.to_string(), feature_index: seg.feature, slot, kind });
    }
    Ok(PrototypeExplanation {
        prototype_id: j,
        provenance: ProvenanceRef { row: prov.row, part: prov.part },
        conditions,
        class_weights: (0..model.n_classes()).map(|k| model.head.w.get(k, j)).collect(),
    })
}

pub fn decode_all(model: &Model) -> Result<Vec<PrototypeExplanation>> {
    (0..model.n_prototypes()).map(|j| decode_prototype(model, j)).collect()
}

/// Ranks every prototype by similarity of its pooled distance, which is the
/// same quantity the head consumes, and keeps the first `top_k` (clamped to
/// the prototype count). Missing cells take the model's imputation values.
pub fn explain_instance(model: &Model, row: &[Value], top_k: usize) -> Result<InstanceExplanation> {
    require_projected(model)?;
    let filled;
    let row = if row.iter().any(Value::is_missing) {
        let d = Dataset { schema: model.schema.clone(), values: row.to_vec(), labels: alloc::vec![0] };
        filled = apply_imputation(&d, &model.schema.impute)?.values;
        &filled[..]
    } else {
        row
    };
    let trace = model.forward(row)?;
    let mut order: Vec<usize> = (0..model.n_prototypes()).collect();
    order.sort_by(|&a, &b| trace.pooled[a].total_cmp(&trace.pooled[b]));
    let matches = order
        .into_iter()
        .take(top_k.min(model.n_prototypes()))
        .map(|j| {
            let decoded = decode_prototype(model, j)?;
            let shared = decoded.conditions.iter().filter(|c| c.is_satisfied_by(row)).cloned().collect();
            Ok(PrototypeMatch {
                prototype_id: j,
                similarity: similarity_from_distance(trace.pooled[j])?,
                distance: trace.pooled[j],
                part: trace.best_part[j],
                conditions: decoded.conditions,
                shared,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let prediction = trace.predicted();
    Ok(InstanceExplanation {
        instance_id: None,
        prediction,
        predicted_class: model.schema.classes[prediction].clone(),
        probabilities: trace.probs,
        matches,
    })
}

/// One row of the interval table: a continuous feature and its bins in
/// ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub feature: String,
    pub intervals: Vec<Interval>,
}

pub fn interval_table(model: &Model) -> Vec<IntervalRow> {
    model
        .schema
        .continuous_names()
        .iter()
        .enumerate()
        .map(|(c, name)| IntervalRow { feature: name.to_string(), intervals: model.bins.intervals(c).intervals })
        .collect()
}

pub fn render_interval_table(rows: &[IntervalRow], bounds: &ClinicalBounds) -> String {
    let width = rows.iter().map(|r| r.feature.chars().count()).max().unwrap_or(0);
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .intervals
            .iter()
            .map(|i| match bounds.get(&r.feature) {
                Some(&(lo, hi)) => i.clamped(lo, hi).to_string(),
                None => i.to_string(),
            })
            .collect();
        out.push_str(&format!("{:<width$}  {}\n", r.feature, cells.join("  ")));
    }
    out
}

pub fn render_prototypes(prototypes: &[PrototypeExplanation], classes: &[String], bounds: &ClinicalBounds) -> String {
    let mut out = String::new();
    for p in prototypes {
        let weights: Vec<String> =
            classes.iter().zip(&p.class_weights).map(|(c, w)| format!("{c}: {w:+.4}")).collect();
        out.push_str(&format!(
            "prototype {} (row {}, part {})\n  {}\n  weights {}\n",
            p.prototype_id,
            p.provenance.row,
            p.provenance.part,
            if p.conditions.is_empty() { "(no active conditions)".into() } else { conjunction(&p.conditions, bounds) },
            weights.join(", ")
        ));
    }
    out
}

/// Conditions the instance satisfies are marked with `*`.
pub fn render_instance(e: &InstanceExplanation, bounds: &ClinicalBounds) -> String {
    let mut out = String::new();
    if let Some(id) = e.instance_id {
        out.push_str(&format!("instance {id}\n"));
    }
    out.push_str(&format!("predicted class: {} (p = {:.3})\n", e.predicted_class, e.probabilities[e.prediction]));
    for (rank, m) in e.matches.iter().enumerate() {
        let conds: Vec<String> = m
            .conditions
            .iter()
            .map(|c| {
                let text = c.render(bounds.get(&c.feature).copied());
                if m.shared.contains(c) {
                    format!("*{text}*")
                } else {
                    text
                }
            })
            .collect();
        out.push_str(&format!(
            "{:>2}. prototype {} similarity {:.3} (part {})\n    {}\n",
            rank + 1,
            m.prototype_id,
            m.similarity,
            m.part,
            conds.join(" ∧ ")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_mapping() {
        assert_eq!(similarity_from_distance(0.0).unwrap(), 1.0);
        assert_eq!(similarity_from_distance(1.0).unwrap(), 0.5);
        assert!(similarity_from_distance(0.3).unwrap() > similarity_from_distance(0.4).unwrap());
        assert_eq!(similarity_from_distance(-1e-3), Err(Error::NegativeDistance(-1e-3)));
    }

    #[test]
    fn condition_text() {
        let c = Condition {
            feature: "Bilirubin".into(),
            feature_index: 0,
            slot: 1,
            kind: ConditionKind::Interval { bin: 1, interval: Interval { lower: Some(0.79), upper: Some(3.43) } },
        };
        let h = Condition {
            feature: "Hepatomegaly".into(),
            feature_index: 1,
            slot: 3,
            kind: ConditionKind::Category { index: 0, value: "0".into() },
        };
        let text = conjunction(&[c.clone(), h.clone()], &ClinicalBounds::new());
        assert_eq!(text, "Bilirubin ∈ [0.79, 3.43) ∧ Hepatomegaly = 0");
        assert!(c.is_satisfied_by(&[Value::Num(1.0), Value::Cat(0)]));
        assert!(!c.is_satisfied_by(&[Value::Num(3.43), Value::Cat(0)]));
        assert!(h.is_satisfied_by(&[Value::Num(9.0), Value::Cat(0)]));
    }

    fn trained() -> (Model, Dataset) {
        use crate::data::{Column, FeatureSchema, Role};
        use crate::training::{train, TrainConfig};
        use rand::{Rng, SeedableRng};
        let mut cats = BTreeMap::new();
        cats.insert("smoker".into(), alloc::vec!["no".into(), "yes".into()]);
        let schema = FeatureSchema::new(
            alloc::vec![
                Column { name: "glucose".into(), role: Role::Continuous },
                Column { name: "bmi".into(), role: Role::Continuous },
                Column { name: "smoker".into(), role: Role::Categorical },
                Column { name: "y".into(), role: Role::Target },
            ],
            cats,
            alloc::vec!["neg".into(), "pos".into()],
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..120 {
            let g: f64 = rng.random_range(70.0..200.0);
            let s = rng.random_range(0..2usize);
            values.extend([Value::Num(g), Value::Num(rng.random_range(18.0..40.0)), Value::Cat(s)]);
            labels.push(usize::from(g > 140.0));
        }
        let d = Dataset { schema, values, labels };
        let cfg = TrainConfig { epochs_stage1: 30, epochs_stage2: 10, epochs_stage3: 10, n_prototypes: 6, ..TrainConfig::default() };
        (train(&d, &cfg).unwrap().model, d)
    }

    #[test]
    fn explanations_follow_the_computation() {
        let (m, d) = trained();
        for r in [0, 17, 55] {
            let e = explain_instance(&m, d.row(r), 100).unwrap();
            let t = m.forward(d.row(r)).unwrap();
            assert_eq!(e.matches.len(), m.n_prototypes());
            assert_eq!(e.probabilities, t.probs);
            for w in e.matches.windows(2) {
                assert!(w[0].distance <= w[1].distance && w[0].similarity >= w[1].similarity);
            }
            for mt in &e.matches {
                assert_eq!(mt.distance, t.pooled[mt.prototype_id]);
                assert_eq!(mt.part, t.best_part[mt.prototype_id]);
                assert!(mt.similarity > 0.0 && mt.similarity <= 1.0);
            }
        }
        assert_eq!(explain_instance(&m, d.row(0), 2).unwrap().matches.len(), 2);
    }

    #[test]
    fn prototypes_decode_to_mask_backed_conditions_their_source_satisfies() {
        let (m, d) = trained();
        for p in decode_all(&m).unwrap() {
            let source = d.row(p.provenance.row);
            for c in &p.conditions {
                assert_ne!(m.masks.values.get(p.provenance.part, c.slot), 0.0);
                assert!(c.is_satisfied_by(source), "{c}");
            }
            let e = explain_instance(&m, source, m.n_prototypes()).unwrap();
            let own = e.matches.iter().find(|x| x.prototype_id == p.prototype_id).unwrap();
            assert_eq!(own.similarity, 1.0);
            assert_eq!(own.shared, p.conditions);
        }
    }

    #[test]
    fn interval_table_has_k_contiguous_bins_per_feature() {
        let (m, _) = trained();
        let rows = interval_table(&m);
        assert_eq!(rows.iter().map(|r| r.feature.as_str()).collect::<Vec<_>>(), ["glucose", "bmi"]);
        for r in &rows {
            assert!(r.intervals.len() <= m.bins.k);
            assert!(r.intervals[0].lower.is_none() && r.intervals.last().unwrap().upper.is_none());
            assert!(r.intervals.windows(2).all(|w| w[0].upper == w[1].lower));
        }
        let text = render_interval_table(&rows, &ClinicalBounds::new());
        assert!(text.contains("glucose") && text.contains("−∞"));
    }

    #[test]
    fn unprojected_models_cannot_be_explained() {
        let (mut m, d) = trained();
        m.stage = Stage::Hard;
        assert_eq!(explain_instance(&m, d.row(0), 3).unwrap_err(), Error::StageRequired);
        assert_eq!(decode_prototype(&m, 0).unwrap_err(), Error::StageRequired);
    }
}
