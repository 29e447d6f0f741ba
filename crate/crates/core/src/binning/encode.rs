use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{fuzzy_weights_into, BinMode, BinningParams, FuzzyAux};
use crate::data::{FeatureKind, FeatureSchema, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    /// Index among continuous features (and into the binning parameters).
    Continuous(usize),
    Categorical,
}

/// Span of encoded slots owned by one feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub feature: usize,
    pub start: usize,
    pub len: usize,
    pub kind: SegmentKind,
}

/// Slot layout of the encoded vector: `K` slots per continuous feature and
/// one slot per category, concatenated in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub segments: Vec<Segment>,
    pub width: usize,
}

impl Layout {
    pub fn new(schema: &FeatureSchema, k: usize) -> Layout {
        let mut segments = Vec::new();
        let mut start = 0;
        for (f, info) in schema.features().iter().enumerate() {
            let (len, kind) = match info.kind {
                FeatureKind::Continuous(c) => (k, SegmentKind::Continuous(c)),
                FeatureKind::Categorical(n) => (n, SegmentKind::Categorical),
            };
            segments.push(Segment { feature: f, start, len, kind });
            start += len;
        }
        Layout { segments, width: start }
    }

    /// Segment owning `slot` and the offset inside it.
    pub fn locate(&self, slot: usize) -> (&Segment, usize) {
        let seg = self
            .segments
            .iter()
            .find(|s| slot >= s.start && slot < s.start + s.len)
            .expect("slot inside layout");
        (seg, slot - seg.start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedInstance {
    pub vector: Vec<f64>,
    pub layout: Layout,
}

/// A row reduced to what the encoder needs: standardized and raw continuous
/// values, and the active slot of every categorical feature.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRow {
    pub z: Vec<f64>,
    pub raw: Vec<f64>,
    pub cat_slots: Vec<usize>,
}

impl PreparedRow {
    pub fn new(row: &[Value], schema: &FeatureSchema, layout: &Layout, bins: &BinningParams) -> Result<PreparedRow> {
        let feats = schema.features();
        if row.len() != feats.len() {
            return Err(Error::DimensionMismatch { what: "row features", expected: feats.len(), got: row.len() });
        }
        let mut out = PreparedRow { z: Vec::new(), raw: Vec::new(), cat_slots: Vec::new() };
        for (seg, (info, &v)) in layout.segments.iter().zip(feats.iter().zip(row)) {
            match (seg.kind, v) {
                (_, Value::Missing) => return Err(Error::MissingValue { feature: info.name.into(), row: 0 }),
                (SegmentKind::Continuous(c), Value::Num(x)) => {
                    if !x.is_finite() {
                        return Err(Error::NonFinite(x));
                    }
                    out.raw.push(x);
                    out.z.push(bins.standardize(c, x));
                }
                (SegmentKind::Categorical, Value::Cat(i)) => {
                    if i >= seg.len {
                        return Err(Error::UnknownCategory { feature: info.name.into(), value: i.to_string() });
                    }
                    out.cat_slots.push(seg.start + i);
                }
                _ => {
                    return Err(Error::InvalidSchema(alloc::format!(
                        "cell type does not match role of `{}`",
                        info.name
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Writes the encoding under the current binning mode into `out`
    /// (length `layout.width`). Fuzzy mode also fills `aux`, one entry per
    /// continuous feature.
    pub fn fill(&self, layout: &Layout, bins: &BinningParams, out: &mut [f64], aux: &mut [FuzzyAux]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        for seg in &layout.segments {
            if let SegmentKind::Continuous(c) = seg.kind {
                let dst = &mut out[seg.start..seg.start + seg.len];
                match bins.mode {
                    BinMode::Fuzzy => {
                        aux[c] = fuzzy_weights_into(self.z[c], bins.centers_of(c), bins.sigma(c), bins.eps, dst);
                    }
                    BinMode::Hard => dst[bins.hard_slot(c, self.raw[c])?] = 1.0,
                }
            }
        }
        for &s in &self.cat_slots {
            out[s] = 1.0;
        }
        Ok(())
    }
}

/// Encodes a raw row: continuous features are standardized and binned under
/// the current mode, categorical features one-hot encoded.
pub fn encode_instance(row: &[Value], schema: &FeatureSchema, bins: &BinningParams) -> Result<EncodedInstance> {
    let layout = Layout::new(schema, bins.k);
    let prepared = PreparedRow::new(row, schema, &layout, bins)?;
    let mut vector = vec![0.0; layout.width];
    let mut aux = vec![FuzzyAux::default(); bins.n_features()];
    prepared.fill(&layout, bins, &mut vector, &mut aux)?;
    Ok(EncodedInstance { vector, layout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::init_binning;
    use crate::data::{Column, Dataset, Role};
    use alloc::collections::BTreeMap;
    use alloc::string::String;

    fn mixed() -> Dataset {
        let mut vocab = BTreeMap::new();
        vocab.insert(String::from("flag"), vec![String::from("0"), String::from("1")]);
        let schema = FeatureSchema::new(
            vec![
                Column { name: "lab".into(), role: Role::Continuous },
                Column { name: "flag".into(), role: Role::Categorical },
                Column { name: "y".into(), role: Role::Target },
            ],
            vocab,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let mut values = Vec::new();
        for i in 0..30 {
            values.push(Value::Num(i as f64));
            values.push(Value::Cat(i % 2));
        }
        Dataset { schema, values, labels: (0..30).map(|i| i % 2).collect() }
    }

    #[test]
    fn hard_mode_two_ones() {
        let d = mixed();
        let (mut bins, _) = init_binning(&d, 3).unwrap();
        bins.mode = BinMode::Hard;
        let e = encode_instance(d.row(7), &d.schema, &bins).unwrap();
        assert_eq!(e.vector.len(), 5);
        assert_eq!(e.vector.iter().filter(|&&v| v == 1.0).count(), 2);
        assert_eq!(e.vector.iter().sum::<f64>(), 2.0);
        assert_eq!(e.vector[4], 1.0);
    }

    #[test]
    fn fuzzy_segment_sums_to_one() {
        let d = mixed();
        let (bins, _) = init_binning(&d, 3).unwrap();
        let e = encode_instance(d.row(7), &d.schema, &bins).unwrap();
        assert!((e.vector[..3].iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(&e.vector[3..], &[0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_category_and_missing() {
        let d = mixed();
        let (bins, _) = init_binning(&d, 3).unwrap();
        let err = encode_instance(&[Value::Num(1.0), Value::Cat(5)], &d.schema, &bins);
        assert!(matches!(err, Err(Error::UnknownCategory { .. })));
        let err = encode_instance(&[Value::Missing, Value::Cat(0)], &d.schema, &bins);
        assert!(matches!(err, Err(Error::MissingValue { .. })));
    }

    #[test]
    fn layout_width_counts_slots() {
        let d = mixed();
        let l = Layout::new(&d.schema, 3);
        assert_eq!(l.width, 5);
        assert_eq!(l.locate(4).1, 1);
        assert_eq!(l.locate(2).0.kind, SegmentKind::Continuous(0));
    }
}
