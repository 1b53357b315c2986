use crate::error::{config_err, shape_err, Error, Result};
use crate::numcore::{Grads, ParamStore};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// One bias-corrected Adam update of every trainable parameter.
///
/// All gradients are validated before anything is written, so a failed step
/// leaves the store untouched. Frozen parameters keep their bits and their
/// optimizer state.
pub fn adam_step(store: &mut ParamStore, grads: &Grads, lr: f64) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(config_err(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    for p in store.iter().filter(|p| p.trainable) {
        let g = grads
            .get(&p.name)
            .ok_or_else(|| config_err(format!("missing gradient for `{}`", p.name)))?;
        if g.shape() != p.value.shape() {
            return Err(shape_err(format!(
                "gradient for `{}` has shape {:?}, parameter has {:?}",
                p.name,
                g.shape(),
                p.value.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::Divergence { param: p.name.clone() });
        }
    }

    for p in store.iter_mut().filter(|p| p.trainable) {
        let g = grads.get(&p.name).expect("validated above").data();
        let state = &mut p.adam;
        state.step += 1;
        let t = state.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let values = p.value.data_mut();
        for (((v, &gi), m), s) in values
            .iter_mut()
            .zip(g)
            .zip(state.first.iter_mut())
            .zip(state.second.iter_mut())
        {
            *m = BETA1 * *m + (1.0 - BETA1) * gi;
            *s = BETA2 * *s + (1.0 - BETA2) * gi * gi;
            let m_hat = *m / c1;
            let s_hat = *s / c2;
            *v -= lr * m_hat / (s_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}
