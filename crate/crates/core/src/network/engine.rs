//! Cached forward pass and hand-derived backward pass used by training.

use alloc::vec;
use alloc::vec::Vec;

use super::Model;
use crate::binning::{fuzzy_backward, BinMode, FuzzyAux, PreparedRow, SegmentKind};
use crate::error::Result;
use crate::linalg::{affine, sq_dist};
use crate::math;

/// Parameter groups, in a fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Centers,
    RawSigma,
    Masks,
    W1,
    B1,
    W2,
    B2,
    Prototypes,
    HeadW,
    HeadB,
}

impl Group {
    pub const ALL: [Group; 10] = [
        Group::Centers,
        Group::RawSigma,
        Group::Masks,
        Group::W1,
        Group::B1,
        Group::W2,
        Group::B2,
        Group::Prototypes,
        Group::HeadW,
        Group::HeadB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl Model {
    pub fn group(&self, g: Group) -> &[f64] {
        match g {
            Group::Centers => &self.bins.centers,
            Group::RawSigma => &self.bins.raw_sigma,
            Group::Masks => &self.masks.values.data,
            Group::W1 => &self.extractor.w1,
            Group::B1 => &self.extractor.b1,
            Group::W2 => &self.extractor.w2,
            Group::B2 => &self.extractor.b2,
            Group::Prototypes => &self.prototypes.z.data,
            Group::HeadW => &self.head.w.data,
            Group::HeadB => &self.head.b,
        }
    }

    pub fn group_mut(&mut self, g: Group) -> &mut [f64] {
        match g {
            Group::Centers => &mut self.bins.centers,
            Group::RawSigma => &mut self.bins.raw_sigma,
            Group::Masks => &mut self.masks.values.data,
            Group::W1 => &mut self.extractor.w1,
            Group::B1 => &mut self.extractor.b1,
            Group::W2 => &mut self.extractor.w2,
            Group::B2 => &mut self.extractor.b2,
            Group::Prototypes => &mut self.prototypes.z.data,
            Group::HeadW => &mut self.head.w.data,
            Group::HeadB => &mut self.head.b,
        }
    }
}

/// Which parameter groups receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainMask {
    pub bins: bool,
    pub masks: bool,
    pub extractor: bool,
    pub prototypes: bool,
    pub head: bool,
}

impl TrainMask {
    pub const ALL: TrainMask = TrainMask { bins: true, masks: true, extractor: true, prototypes: true, head: true };

    pub fn trains(&self, g: Group) -> bool {
        match g {
            Group::Centers | Group::RawSigma => self.bins,
            Group::Masks => self.masks,
            Group::W1 | Group::B1 | Group::W2 | Group::B2 => self.extractor,
            Group::Prototypes => self.prototypes,
            Group::HeadW | Group::HeadB => self.head,
        }
    }
}

/// Gradient buffers shaped like the model's parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub groups: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(model: &Model) -> Grads {
        Grads { groups: Group::ALL.iter().map(|&g| vec![0.0; model.group(g).len()]).collect() }
    }

    pub fn get(&self, g: Group) -> &[f64] {
        &self.groups[g.index()]
    }

    pub fn get_mut(&mut self, g: Group) -> &mut [f64] {
        &mut self.groups[g.index()]
    }

    pub fn clear(&mut self) {
        for v in self.groups.iter_mut() {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

/// Per-instance intermediate buffers, reused across instances.
#[derive(Debug, Clone)]
pub struct Cache {
    pub e: Vec<f64>,
    pub aux: Vec<FuzzyAux>,
    pub parts: Vec<f64>,
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub emb: Vec<f64>,
    pub dist: Vec<f64>,
    pub pooled: Vec<f64>,
    pub best: Vec<usize>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    g_pooled: Vec<f64>,
    g_emb: Vec<f64>,
    touched: Vec<bool>,
    g_act: Vec<f64>,
    g_part: Vec<f64>,
    g_e: Vec<f64>,
}

impl Cache {
    pub fn new(model: &Model) -> Cache {
        let p = model.n_parts();
        let d = model.layout.width;
        let hid = model.extractor.hidden;
        let h = model.extractor.output;
        let n = model.n_prototypes();
        let c = model.n_classes();
        Cache {
            e: vec![0.0; d],
            aux: vec![FuzzyAux::default(); model.bins.n_features()],
            parts: vec![0.0; p * d],
            pre: vec![0.0; p * hid],
            act: vec![0.0; p * hid],
            emb: vec![0.0; p * h],
            dist: vec![0.0; p * n],
            pooled: vec![0.0; n],
            best: vec![0; n],
            logits: vec![0.0; c],
            probs: vec![0.0; c],
            g_pooled: vec![0.0; n],
            g_emb: vec![0.0; p * h],
            touched: vec![false; p],
            g_act: vec![0.0; hid],
            g_part: vec![0.0; d],
            g_e: vec![0.0; d],
        }
    }
}

impl Model {
    /// Encodes `row` into `cache.e` under the current binning mode.
    pub fn encode_into(&self, row: &PreparedRow, cache: &mut Cache) -> Result<()> {
        row.fill(&self.layout, &self.bins, &mut cache.e, &mut cache.aux)
    }

    /// Forward pass from `cache.e`, filling every cache buffer.
    pub fn forward_cached(&self, cache: &mut Cache) {
        let d = self.layout.width;
        let hid = self.extractor.hidden;
        let h = self.extractor.output;
        let n = self.n_prototypes();
        for i in 0..self.n_parts() {
            let m = self.masks.values.row(i);
            let part = &mut cache.parts[i * d..(i + 1) * d];
            for ((p, &mi), &x) in part.iter_mut().zip(m).zip(&cache.e) {
                *p = mi * x;
            }
            self.extractor.forward_into(
                &cache.parts[i * d..(i + 1) * d],
                &mut cache.pre[i * hid..(i + 1) * hid],
                &mut cache.act[i * hid..(i + 1) * hid],
                &mut cache.emb[i * h..(i + 1) * h],
            );
            let emb = &cache.emb[i * h..(i + 1) * h];
            for j in 0..n {
                cache.dist[i * n + j] = sq_dist(emb, self.prototypes.z.row(j));
            }
        }
        for j in 0..n {
            let mut best = 0;
            let mut v = cache.dist[j];
            for i in 1..self.n_parts() {
                if cache.dist[i * n + j] < v {
                    v = cache.dist[i * n + j];
                    best = i;
                }
            }
            cache.pooled[j] = v;
            cache.best[j] = best;
        }
        affine(&self.head.w.data, &self.head.b, &cache.pooled, &mut cache.logits);
        math::softmax_into(&cache.logits, &mut cache.probs);
    }

    /// Accumulates parameter gradients for one instance given the upstream
    /// gradient of the logits. `row` is needed only when bins train.
    pub fn backward(&self, cache: &mut Cache, row: Option<&PreparedRow>, g_logits: &[f64], mask: TrainMask, grads: &mut Grads) {
        let d = self.layout.width;
        let hid = self.extractor.hidden;
        let h = self.extractor.output;
        let n = self.n_prototypes();
        let c = self.n_classes();

        if mask.head {
            let gw = grads.get_mut(Group::HeadW);
            for k in 0..c {
                for j in 0..n {
                    gw[k * n + j] += g_logits[k] * cache.pooled[j];
                }
            }
            let gb = grads.get_mut(Group::HeadB);
            for k in 0..c {
                gb[k] += g_logits[k];
            }
        }
        if !(mask.prototypes || mask.extractor || mask.masks || mask.bins) {
            return;
        }

        for j in 0..n {
            cache.g_pooled[j] = (0..c).map(|k| self.head.w.get(k, j) * g_logits[k]).sum();
        }
        cache.g_emb.iter_mut().for_each(|x| *x = 0.0);
        cache.touched.iter_mut().for_each(|t| *t = false);
        for j in 0..n {
            let i = cache.best[j];
            let g = cache.g_pooled[j];
            if g == 0.0 {
                continue;
            }
            cache.touched[i] = true;
            let z = self.prototypes.z.row(j);
            let emb = &cache.emb[i * h..(i + 1) * h];
            let g_emb = &mut cache.g_emb[i * h..(i + 1) * h];
            for m in 0..h {
                g_emb[m] += 2.0 * g * (emb[m] - z[m]);
            }
            if mask.prototypes {
                let gz = &mut grads.get_mut(Group::Prototypes)[j * h..(j + 1) * h];
                for m in 0..h {
                    gz[m] -= 2.0 * g * (emb[m] - z[m]);
                }
            }
        }
        let need_input = mask.masks || mask.bins;
        if !(mask.extractor || need_input) {
            return;
        }

        cache.g_e.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..self.n_parts() {
            if !cache.touched[i] {
                continue;
            }
            let g_emb = &cache.g_emb[i * h..(i + 1) * h];
            let act = &cache.act[i * hid..(i + 1) * hid];
            let pre = &cache.pre[i * hid..(i + 1) * hid];
            let part = &cache.parts[i * d..(i + 1) * d];
            if mask.extractor {
                let gb2 = grads.get_mut(Group::B2);
                for m in 0..h {
                    gb2[m] += g_emb[m];
                }
                let gw2 = grads.get_mut(Group::W2);
                for m in 0..h {
                    for q in 0..hid {
                        gw2[m * hid + q] += g_emb[m] * act[q];
                    }
                }
            }
            for q in 0..hid {
                cache.g_act[q] = if pre[q] > 0.0 {
                    (0..h).map(|m| self.extractor.w2[m * hid + q] * g_emb[m]).sum()
                } else {
                    0.0
                };
            }
            if mask.extractor {
                let gb1 = grads.get_mut(Group::B1);
                for q in 0..hid {
                    gb1[q] += cache.g_act[q];
                }
                let gw1 = grads.get_mut(Group::W1);
                for q in 0..hid {
                    let ga = cache.g_act[q];
                    if ga != 0.0 {
                        for (g, &x) in gw1[q * d..(q + 1) * d].iter_mut().zip(part) {
                            *g += ga * x;
                        }
                    }
                }
            }
            if need_input {
                cache.g_part.iter_mut().for_each(|x| *x = 0.0);
                for q in 0..hid {
                    let ga = cache.g_act[q];
                    if ga != 0.0 {
                        for (g, &w) in cache.g_part.iter_mut().zip(&self.extractor.w1[q * d..(q + 1) * d]) {
                            *g += ga * w;
                        }
                    }
                }
                let m_row = self.masks.values.row(i);
                if mask.masks {
                    let gm = &mut grads.get_mut(Group::Masks)[i * d..(i + 1) * d];
                    for t in 0..d {
                        gm[t] += cache.g_part[t] * cache.e[t];
                    }
                }
                for t in 0..d {
                    cache.g_e[t] += cache.g_part[t] * m_row[t];
                }
            }
        }

        if mask.bins && self.bins.mode == BinMode::Fuzzy {
            let row = row.expect("prepared row required for bin gradients");
            let k = self.bins.k;
            for seg in &self.layout.segments {
                if let SegmentKind::Continuous(f) = seg.kind {
                    let sigma = self.bins.sigma(f);
                    let g_sigma = fuzzy_backward(
                        row.z[f],
                        self.bins.centers_of(f),
                        sigma,
                        self.bins.eps,
                        &cache.e[seg.start..seg.start + seg.len],
                        cache.aux[f],
                        &cache.g_e[seg.start..seg.start + seg.len],
                        &mut grads.get_mut(Group::Centers)[f * k..(f + 1) * k],
                    );
                    grads.get_mut(Group::RawSigma)[f] += g_sigma * math::sigmoid(self.bins.raw_sigma[f]);
                }
            }
        }
    }
}
