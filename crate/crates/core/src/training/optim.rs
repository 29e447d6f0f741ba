use crate::math;
use crate::network::{Grads, Group, Model, TrainMask};

/// Adaptive-moment optimizer over the model's parameter groups.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(model: &Model, lr: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Grads::zeros_like(model), v: Grads::zeros_like(model) }
    }

    /// One update of every group enabled in `mask`; other groups are not
    /// touched.
    pub fn step(&mut self, model: &mut Model, grads: &Grads, mask: TrainMask) {
        self.t += 1;
        let c1 = 1.0 - math::powf(self.beta1, self.t as f64);
        let c2 = 1.0 - math::powf(self.beta2, self.t as f64);
        for g in Group::ALL {
            if !mask.trains(g) {
                continue;
            }
            let params = model.group_mut(g);
            let m = self.m.get_mut(g);
            let v = self.v.get_mut(g);
            for (((p, &gr), m), v) in params.iter_mut().zip(grads.get(g)).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * gr;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gr * gr;
                *p -= self.lr * (*m / c1) / (math::sqrt(*v / c2) + self.eps);
            }
        }
    }
}
