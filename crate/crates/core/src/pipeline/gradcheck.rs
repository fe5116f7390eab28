use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::FreqMixFormer;
use crate::numerics::{ParamId, Tensor};

/// Denominator floor of the relative error; differences between gradients
/// smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Above this many scalars a full check gets slow.
pub const GRAD_CHECK_WARN_PARAMS: usize = 10_000;

/// Relative gap between the left and right one-sided slopes above which an
/// entry is treated as straddling a kink of the loss.
pub const KINK_GAP: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter holding the worst entry.
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
    /// Entries whose `±ε` probe crossed a kink (a ReLU switching state).
    pub kinks: usize,
}

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Central finite differences of the cross-entropy loss against the recorded
/// gradient of every parameter entry.
///
/// Where the left and right one-sided slopes disagree by more than
/// [`KINK_GAP`] the probe crossed a kink; the central difference is then
/// meaningless and the entry passes if the analytic value matches either side.
pub fn grad_check(model: &FreqMixFormer, x: &Tensor, label: usize, epsilon: f64) -> Result<GradCheckReport> {
    grad_check_with(model, x, label, epsilon, None)
}

/// As [`grad_check`]; `corrupt` adds 1 to the recorded gradient of the named
/// parameter before comparison (fault injection for the harness itself).
pub fn grad_check_with(
    model: &FreqMixFormer,
    x: &Tensor,
    label: usize,
    epsilon: f64,
    corrupt: Option<&str>,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let total = model.parameter_count();
    if total > GRAD_CHECK_WARN_PARAMS {
        warn!("gradient check over {total} parameters will be slow");
    }
    let (center, _, grads) = model.loss_and_gradients(x, label)?;
    let entries: Vec<(ParamId, String, Tensor)> = model
        .store()
        .iter()
        .map(|(id, p)| {
            let mut g = grads.param(id).unwrap_or_else(|| Tensor::zeros(p.value.shape()));
            if corrupt == Some(p.name.as_str()) {
                g.data_mut().iter_mut().for_each(|v| *v += 1.0);
            }
            (id, p.name.clone(), g)
        })
        .collect();
    let jobs: Vec<(usize, usize)> = entries
        .iter()
        .enumerate()
        .flat_map(|(e, (_, _, g))| (0..g.len()).map(move |k| (e, k)))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(e, k)| {
            let (id, _, g) = &entries[e];
            let mut probe = model.clone();
            let base = probe.store().value(*id).data()[k];
            probe.store_mut().get_mut(*id).value.data_mut()[k] = base + epsilon;
            let plus = probe.loss(x, label)?;
            probe.store_mut().get_mut(*id).value.data_mut()[k] = base - epsilon;
            let minus = probe.loss(x, label)?;
            let analytic = g.data()[k];
            let central = relative_error(analytic, (plus - minus) / (2.0 * epsilon));
            let (left, right) = ((center - minus) / epsilon, (plus - center) / epsilon);
            if relative_error(left, right) > KINK_GAP {
                let sided = relative_error(analytic, left).min(relative_error(analytic, right));
                return Ok((central.min(sided), true));
            }
            Ok((central, false))
        })
        .collect::<Result<Vec<(f64, bool)>>>()?;
    let kinks = errors.iter().filter(|e| e.1).count();
    let (worst, max_rel_err) = errors
        .iter()
        .map(|e| e.0)
        .enumerate()
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let (e, k) = jobs[worst];
    Ok(GradCheckReport {
        max_rel_err,
        worst_param: entries[e].1.clone(),
        worst_index: k,
        checked: jobs.len(),
        kinks,
    })
}
