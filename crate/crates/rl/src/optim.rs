//! Momentum-free adaptive optimizer (RMSProp) plus global gradient clipping.

use ndarray::ArrayD;

use crate::net::{NetGrads, PolicyNet, Scalar};

/// RMSProp: per-parameter step size from a running average of squared
/// gradients, no momentum term.
pub struct RmsProp<S: Scalar> {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    sq: Vec<ArrayD<S>>,
}

impl<S: Scalar> RmsProp<S> {
    pub fn new(net: &PolicyNet<S>, lr: f64, rho: f64, eps: f64) -> Self {
        let sq = net
            .param_views()
            .iter()
            .map(|(_, v)| ArrayD::zeros(v.raw_dim()))
            .collect();
        RmsProp { lr, rho, eps, sq }
    }

    /// One update: v <- rho v + (1 - rho) g^2; p <- p - lr g / (sqrt(v) + eps).
    pub fn step(&mut self, net: &mut PolicyNet<S>, grads: &NetGrads<S>) {
        let rho = S::from_f64(self.rho);
        let one_m_rho = S::from_f64(1.0 - self.rho);
        let lr = S::from_f64(self.lr);
        let eps = S::from_f64(self.eps);
        for ((sq, (_, mut p)), (_, g)) in self
            .sq
            .iter_mut()
            .zip(net.param_views_mut())
            .zip(grads.views())
        {
            ndarray::Zip::from(sq).and(&mut p).and(&g).for_each(|v, p, &g| {
                *v = rho * *v + one_m_rho * g * g;
                *p = *p - lr * g / (v.sqrt() + eps);
            });
        }
    }
}

/// Scale gradients so their global L2 norm is at most `max_norm`; returns the
/// pre-clip norm.
pub fn clip_grad_norm<S: Scalar>(grads: &mut NetGrads<S>, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(S::from_f64(max_norm / norm));
    }
    norm
}
