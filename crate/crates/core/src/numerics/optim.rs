use crate::error::{Error, Result};

use super::ParamStore;

/// Momentum SGD with coupled L2 weight decay:
/// `v ← μ·v + g + λ·w`, `w ← w − lr·v`; gradients are cleared afterwards.
pub fn sgd_step(params: &mut ParamStore, lr: f64, momentum: f64, weight_decay: f64) -> Result<()> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(Error::invalid(format!("learning rate must be non-negative, got {lr}")));
    }
    if !(0.0..1.0).contains(&momentum) || weight_decay < 0.0 {
        return Err(Error::invalid(format!(
            "momentum must lie in [0, 1) and weight decay be non-negative (got {momentum}, {weight_decay})"
        )));
    }
    for p in params.iter_mut() {
        let velocity = p
            .velocity
            .get_or_insert_with(|| super::Tensor::zeros(p.value.shape()));
        let values = p.value.data_mut();
        let grads = p.gradient.data_mut();
        for ((w, g), v) in values.iter_mut().zip(grads.iter_mut()).zip(velocity.data_mut()) {
            *v = momentum * *v + *g + weight_decay * *w;
            *w -= lr * *v;
            *g = 0.0;
        }
    }
    Ok(())
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping. `max_norm = 0` only measures.
pub fn clip_grad_norm(params: &mut ParamStore, max_norm: f64) -> f64 {
    let total = params
        .iter()
        .map(|(_, p)| p.gradient.data().iter().map(|g| g * g).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    if max_norm > 0.0 && total > max_norm {
        let s = max_norm / total;
        for p in params.iter_mut() {
            p.gradient.data_mut().iter_mut().for_each(|g| *g *= s);
        }
    }
    total
}
