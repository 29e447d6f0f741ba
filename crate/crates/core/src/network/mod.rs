//! Forward pass: patching masks cut the encoded instance into parts, a
//! shared shallow extractor embeds each part, squared distances to the
//! prototypes are min-pooled over parts and a linear head turns the pooled
//! distances into class probabilities.

mod engine;

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use engine::{Cache, Grads, Group, TrainMask};

use crate::binning::{encode_instance, BinningParams, EncodedInstance, Layout};
use crate::data::{FeatureSchema, Value};
use crate::error::{Error, Result};
use crate::linalg::{affine, sq_dist, Matrix};
use crate::math;

/// `p × d'` patching masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchMasks {
    pub values: Matrix,
    pub binarized: bool,
}

impl PatchMasks {
    pub fn parts(&self) -> usize {
        self.values.rows
    }

    pub fn width(&self) -> usize {
        self.values.cols
    }
}

/// Shallow feed-forward extractor `d' -> hidden -> h` with a rectified
/// hidden layer and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extractor {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    /// `hidden × input`
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `output × hidden`
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Extractor {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; output * hidden],
            b2: vec![0.0; output],
        }
    }

    pub(crate) fn forward_into(&self, part: &[f64], pre: &mut [f64], act: &mut [f64], out: &mut [f64]) {
        affine(&self.w1, &self.b1, part, pre);
        for (a, &z) in act.iter_mut().zip(pre.iter()) {
            *a = if z > 0.0 { z } else { 0.0 };
        }
        affine(&self.w2, &self.b2, act, out);
    }
}

/// Where a projected prototype came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Row index in the training dataset.
    pub row: usize,
    /// Mask row (part) index.
    pub part: usize,
    /// Raw feature values of the source row, kept so the prototype can be
    /// decoded without the training data.
    pub source: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSet {
    /// `n × h` prototype embeddings.
    pub z: Matrix,
    pub provenance: Vec<Option<Provenance>>,
    pub frozen: bool,
}

impl PrototypeSet {
    pub fn len(&self) -> usize {
        self.z.rows
    }

    pub fn is_empty(&self) -> bool {
        self.z.rows == 0
    }

    pub fn dim(&self) -> usize {
        self.z.cols
    }
}

/// Linear head from pooled distances to class logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    /// `c × n`
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Stage {
    /// Fuzzy end-to-end training.
    Fuzzy = 1,
    /// Hard binning, binary masks.
    Hard = 2,
    /// Prototypes projected onto real parts; head fine-tuned.
    Projected = 3,
}

impl From<Stage> for u8 {
    fn from(s: Stage) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for Stage {
    type Error = &'static str;

    fn try_from(v: u8) -> core::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Stage::Fuzzy),
            2 => Ok(Stage::Hard),
            3 => Ok(Stage::Projected),
            _ => Err("stage must be 1, 2 or 3"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub schema: FeatureSchema,
    pub layout: Layout,
    pub bins: BinningParams,
    pub masks: PatchMasks,
    pub extractor: Extractor,
    pub prototypes: PrototypeSet,
    pub head: ClassifierHead,
    pub stage: Stage,
}

/// Everything computed for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub encoded: EncodedInstance,
    /// `p × d'`
    pub parts: Matrix,
    /// `p × h`
    pub embeddings: Matrix,
    /// `p × n` squared distances
    pub distances: Matrix,
    pub pooled: Vec<f64>,
    pub best_part: Vec<usize>,
    pub probs: Vec<f64>,
}

impl ForwardTrace {
    pub fn predicted(&self) -> usize {
        math::argmax(&self.probs)
    }
}

/// One part per mask row: `part_i = M_i ⊙ e`.
pub fn extract_parts(e: &[f64], masks: &PatchMasks) -> Result<Matrix> {
    if e.len() != masks.width() {
        return Err(Error::DimensionMismatch { what: "mask width", expected: masks.width(), got: e.len() });
    }
    let mut parts = masks.values.clone();
    for i in 0..parts.rows {
        for (v, &x) in parts.row_mut(i).iter_mut().zip(e) {
            *v *= x;
        }
    }
    Ok(parts)
}

pub fn embed_part(part: &[f64], theta: &Extractor) -> Result<Vec<f64>> {
    if part.len() != theta.input {
        return Err(Error::DimensionMismatch { what: "part width", expected: theta.input, got: part.len() });
    }
    let mut pre = vec![0.0; theta.hidden];
    let mut act = vec![0.0; theta.hidden];
    let mut out = vec![0.0; theta.output];
    theta.forward_into(part, &mut pre, &mut act, &mut out);
    Ok(out)
}

/// `D[i][j] = ‖E_i − z_j‖²`.
pub fn prototype_distances(embeddings: &Matrix, protos: &PrototypeSet) -> Result<Matrix> {
    if embeddings.cols != protos.dim() {
        return Err(Error::DimensionMismatch { what: "embedding width", expected: protos.dim(), got: embeddings.cols });
    }
    let mut d = Matrix::zeros(embeddings.rows, protos.len());
    for i in 0..embeddings.rows {
        for j in 0..protos.len() {
            d.set(i, j, sq_dist(embeddings.row(i), protos.z.row(j)));
        }
    }
    Ok(d)
}

/// Column-wise minimum over parts; ties go to the lowest part index.
pub fn pool_min(distances: &Matrix) -> (Vec<f64>, Vec<usize>) {
    let mut pooled = vec![f64::INFINITY; distances.cols];
    let mut best = vec![0; distances.cols];
    for i in 0..distances.rows {
        for (j, &v) in distances.row(i).iter().enumerate() {
            if v < pooled[j] {
                pooled[j] = v;
                best[j] = i;
            }
        }
    }
    (pooled, best)
}

/// `softmax(W · pooled + b)`.
pub fn classify(pooled: &[f64], head: &ClassifierHead) -> Result<Vec<f64>> {
    if pooled.len() != head.w.cols {
        return Err(Error::DimensionMismatch { what: "pooled length", expected: head.w.cols, got: pooled.len() });
    }
    let mut logits = vec![0.0; head.w.rows];
    affine(&head.w.data, &head.b, pooled, &mut logits);
    let mut probs = vec![0.0; logits.len()];
    math::softmax_into(&logits, &mut probs);
    Ok(probs)
}

impl Model {
    pub fn n_parts(&self) -> usize {
        self.masks.parts()
    }

    pub fn n_prototypes(&self) -> usize {
        self.prototypes.len()
    }

    pub fn n_classes(&self) -> usize {
        self.head.w.rows
    }

    pub fn encode(&self, row: &[Value]) -> Result<EncodedInstance> {
        encode_instance(row, &self.schema, &self.bins)
    }

    /// Full forward pass with every intermediate retained.
    pub fn forward(&self, row: &[Value]) -> Result<ForwardTrace> {
        let encoded = self.encode(row)?;
        self.forward_encoded(encoded)
    }

    pub fn forward_encoded(&self, encoded: EncodedInstance) -> Result<ForwardTrace> {
        let parts = extract_parts(&encoded.vector, &self.masks)?;
        let mut embeddings = Matrix::zeros(parts.rows, self.extractor.output);
        for i in 0..parts.rows {
            let emb = embed_part(parts.row(i), &self.extractor)?;
            embeddings.row_mut(i).copy_from_slice(&emb);
        }
        let distances = prototype_distances(&embeddings, &self.prototypes)?;
        let (pooled, best_part) = pool_min(&distances);
        let probs = classify(&pooled, &self.head)?;
        Ok(ForwardTrace { encoded, parts, embeddings, distances, pooled, best_part, probs })
    }

    pub fn predict(&self, row: &[Value]) -> Result<usize> {
        Ok(self.forward(row)?.predicted())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn masks(rows: usize, cols: usize, data: Vec<f64>) -> PatchMasks {
        PatchMasks { values: Matrix::from_vec(rows, cols, data), binarized: false }
    }

    #[test]
    fn parts_are_hadamard_products() {
        let e = [1.0, 0.0, 1.0, 0.0];
        let m = masks(3, 4, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let p = extract_parts(&e, &m).unwrap();
        assert_eq!(p.row(0), &e);
        assert_eq!(p.row(1), &[0.0; 4]);
        assert_eq!(p.row(2), &[1.0, 0.0, 0.0, 0.0]);
        assert!(extract_parts(&[1.0], &m).is_err());
    }

    #[test]
    fn zero_extractor_gives_zero_embedding() {
        let x = Extractor::zeros(4, 6, 3);
        assert_eq!(embed_part(&[1.0, 0.0, 1.0, 1.0], &x).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn embedding_matches_manual_composition() {
        let x = Extractor {
            input: 2,
            hidden: 2,
            output: 1,
            w1: vec![1.0, -2.0, 0.5, 0.25],
            b1: vec![0.1, -0.3],
            w2: vec![2.0, -1.0],
            b2: vec![0.05],
        };
        let part = [0.8, 0.6];
        // hidden: relu(0.8 - 1.2 + 0.1) = 0, relu(0.4 + 0.15 - 0.3) = 0.25
        let expect = 2.0 * 0.0 - 1.0 * 0.25 + 0.05;
        assert!((embed_part(&part, &x).unwrap()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn distances_and_pooling() {
        let protos = PrototypeSet {
            z: Matrix::from_vec(3, 2, vec![0.0, 1.0, 1.0, 0.0, 5.0, 5.0]),
            provenance: vec![None; 3],
            frozen: false,
        };
        let e = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 0.0]);
        let d = prototype_distances(&e, &protos).unwrap();
        assert_eq!((d.rows, d.cols), (2, 3));
        assert_eq!(d.get(0, 0), 2.0);
        assert_eq!(d.get(0, 1), 0.0);

        let d = Matrix::from_vec(2, 2, vec![1.0, 4.0, 2.0, 0.5]);
        assert_eq!(pool_min(&d), (vec![1.0, 0.5], vec![0, 1]));
        let tied = Matrix::from_vec(2, 1, vec![3.0, 3.0]);
        assert_eq!(pool_min(&tied).1, vec![0]);
        let single = Matrix::from_vec(1, 2, vec![7.0, 8.0]);
        assert_eq!(pool_min(&single).0, vec![7.0, 8.0]);
    }

    #[test]
    fn head_probabilities() {
        let head = ClassifierHead { w: Matrix::zeros(3, 2), b: vec![0.0; 3] };
        let p = classify(&[1.0, 2.0], &head).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));

        let head = ClassifierHead { w: Matrix::zeros(2, 1), b: vec![libm::log(2.0), 0.0] };
        let p = classify(&[0.0], &head).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-9 && (p[1] - 1.0 / 3.0).abs() < 1e-9);

        let head = ClassifierHead { w: Matrix::zeros(2, 1), b: vec![37.5, 37.5] };
        assert_eq!(classify(&[0.0], &head).unwrap(), vec![0.5, 0.5]);
    }

    proptest::proptest! {
        #[test]
        fn adding_a_part_never_raises_pooled(
            rows in 1usize..6,
            n in 1usize..5,
            cells in proptest::collection::vec(0.0f64..10.0, 30),
            extra in proptest::collection::vec(0.0f64..10.0, 5),
        ) {
            let d = Matrix::from_vec(rows, n, cells[..rows * n].to_vec());
            let mut grown = d.data.clone();
            grown.extend_from_slice(&extra[..n]);
            let (before, _) = pool_min(&d);
            let (after, _) = pool_min(&Matrix::from_vec(rows + 1, n, grown));
            for (a, b) in after.iter().zip(&before) {
                proptest::prop_assert!(a <= b);
            }
        }

        #[test]
        fn binary_masks_on_binary_codes_give_binary_parts(
            e in proptest::collection::vec(0u8..2, 6),
            m in proptest::collection::vec(0u8..2, 18),
        ) {
            let e: Vec<f64> = e.iter().map(|&v| v as f64).collect();
            let masks = PatchMasks { values: Matrix::from_vec(3, 6, m.iter().map(|&v| v as f64).collect()), binarized: true };
            let parts = extract_parts(&e, &masks).unwrap();
            proptest::prop_assert!(parts.data.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}
