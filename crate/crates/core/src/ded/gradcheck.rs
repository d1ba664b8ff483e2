//! Central finite-difference check of `backward`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::loss::{loss, LossConfig};
use super::model::DedModel;
use super::net::Mode;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub analytic_norm: f64,
    pub numeric_norm: f64,
    /// `|a - n| / max(|a|, |n|, floor)` over the flattened tensor.
    pub rel_error: f64,
}

/// Norms below this are treated as zero gradients, so a tensor whose true
/// gradient vanishes (a bias feeding batch norm) is judged by absolute error.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Compares analytic gradients against central differences with step `h`,
/// using a fixed input mask so the training pass is deterministic.
pub fn gradient_check(
    model: &DedModel,
    x: &Array2<f64>,
    input_mask: Option<&Array2<f64>>,
    target: &Array2<f64>,
    weights: Option<&Array2<f64>>,
    cfg: &LossConfig,
    h: f64,
) -> Result<Vec<TensorCheck>> {
    let (z, cache) = model.forward_with_mask(x, Mode::Train, input_mask)?;
    let (grads, _) = model.backward(&cache, &z, target, weights, cfg)?;
    let layout = model.params().layout();
    let mut probe = model.clone();
    let eval = |probe: &DedModel| -> Result<f64> {
        let (z, _) = probe.forward_with_mask(x, Mode::Train, input_mask)?;
        Ok(loss(&z, target, weights, cfg, probe)?.total)
    };
    let mut out = Vec::with_capacity(layout.len());
    for (t, ((name, _), analytic)) in layout.into_iter().zip(grads.slices()).enumerate() {
        let mut diff2 = 0.0;
        let mut num2 = 0.0;
        for (i, &a) in analytic.iter().enumerate() {
            let orig = probe.params().slices()[t][i];
            probe.params_mut().slices_mut()[t][i] = orig + h;
            let up = eval(&probe)?;
            probe.params_mut().slices_mut()[t][i] = orig - h;
            let down = eval(&probe)?;
            probe.params_mut().slices_mut()[t][i] = orig;
            let n = (up - down) / (2.0 * h);
            diff2 += (a - n).powi(2);
            num2 += n * n;
        }
        let analytic_norm = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let numeric_norm = num2.sqrt();
        out.push(TensorCheck {
            name,
            analytic_norm,
            numeric_norm,
            rel_error: diff2.sqrt() / analytic_norm.max(numeric_norm).max(GRADCHECK_FLOOR),
        });
    }
    Ok(out)
}
