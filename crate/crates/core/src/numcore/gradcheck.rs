use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numcore::{Grads, ParamStore};

/// Denominator floor of the relative error, so gradients that are zero up to
/// rounding compare by absolute error.
pub const REL_FLOOR: f64 = 1e-6;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter, flat index)` where the maximum occurred.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

/// Compare analytic gradients against central differences on every trainable
/// coordinate. Returns the maximum of
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-6)`.
pub fn grad_check<F>(loss_and_grads: F, store: &ParamStore, h: f64) -> Result<f64>
where
    F: Fn(&ParamStore) -> Result<(f64, Grads)>,
{
    Ok(grad_check_report(loss_and_grads, store, h, None, 0)?.max_rel_error)
}

/// Like [`grad_check`], but checks at most `per_param` coordinates of each
/// parameter, chosen by `seed`.
pub fn grad_check_sampled<F>(
    loss_and_grads: F,
    store: &ParamStore,
    h: f64,
    per_param: usize,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Grads)>,
{
    grad_check_report(loss_and_grads, store, h, Some(per_param), seed)
}

fn grad_check_report<F>(
    f: F,
    store: &ParamStore,
    h: f64,
    per_param: Option<usize>,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(f64, Grads)>,
{
    let (base, analytic) = f(store)?;
    if !base.is_finite() {
        return Err(Error::Evaluation(format!("non-finite loss {base}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        coords_checked: 0,
    };

    let trainable: Vec<(String, usize)> = store
        .iter()
        .filter(|p| p.trainable)
        .map(|p| (p.name.clone(), p.value.len()))
        .collect();

    for (name, len) in trainable {
        let coords: Vec<usize> = match per_param {
            Some(k) if k < len => {
                let mut c = sample(&mut rng, len, k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..len).collect(),
        };
        let grad = analytic
            .get(&name)
            .ok_or_else(|| Error::Evaluation(format!("no analytic gradient for `{name}`")))?
            .data()
            .to_vec();
        for k in coords {
            let orig = probe.data(&name)[k];
            probe.get_mut(&name)?.data_mut()[k] = orig + h;
            let (up, _) = f(&probe)?;
            probe.get_mut(&name)?.data_mut()[k] = orig - h;
            let (down, _) = f(&probe)?;
            probe.get_mut(&name)?.data_mut()[k] = orig;
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::Evaluation(format!(
                    "non-finite loss while perturbing `{name}`[{k}]"
                )));
            }
            let numeric = (up - down) / (2.0 * h);
            let rel = (grad[k] - numeric).abs() / grad[k].abs().max(numeric.abs()).max(REL_FLOOR);
            report.coords_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((name.clone(), k));
            }
        }
    }
    Ok(report)
}
