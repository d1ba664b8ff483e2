//! Cross-entropy, weighted DICE and the spatial weight regularizer.

use ndarray::{Array2, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use super::model::DedModel;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before logarithms.
pub const CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub ce_weight: f64,
    pub dice_weight: f64,
    pub lambda_swr: f64,
    pub use_boundary_mask: bool,
    pub mask_alpha: f64,
    pub mask_sigma: f64,
    pub input_mask_prob: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            ce_weight: 0.4,
            dice_weight: 0.6,
            lambda_swr: 0.0,
            use_boundary_mask: true,
            mask_alpha: 14.0,
            mask_sigma: 1.5,
            input_mask_prob: 0.1,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.ce_weight, self.dice_weight, self.lambda_swr];
        if nonneg.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig("loss weights must be finite and >= 0".into()));
        }
        if (self.ce_weight + self.dice_weight - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "ce_weight + dice_weight must be 1, got {}",
                self.ce_weight + self.dice_weight
            )));
        }
        if !(0.0..1.0).contains(&self.input_mask_prob) {
            return Err(Error::InvalidConfig("input_mask_prob must lie in [0, 1)".into()));
        }
        if self.use_boundary_mask && !(self.mask_alpha > 0.0 && self.mask_sigma > 0.0) {
            return Err(Error::InvalidConfig("mask alpha and sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Loss value and its parts, averaged over the batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Negated cross-entropy log-likelihood, averaged over voxels.
    pub ce: f64,
    pub wdice: f64,
    pub swr: f64,
    /// Probabilities that hit the clamp.
    pub clamped: usize,
}

/// Weighted DICE `2 sum(w^2 x y) / (sum(w^2 x^2) + sum(w^2 y^2))`; 1 when
/// both vectors vanish.
pub fn wdice(x: ArrayView1<f64>, y: ArrayView1<f64>, w: Option<ArrayView1<f64>>) -> f64 {
    let (n, d) = wdice_parts(x, y, w);
    if d == 0.0 {
        1.0
    } else {
        n / d
    }
}

fn wdice_parts(x: ArrayView1<f64>, y: ArrayView1<f64>, w: Option<ArrayView1<f64>>) -> (f64, f64) {
    let mut num = 0.0;
    let mut den = 0.0;
    match w {
        Some(w) => Zip::from(&x).and(&y).and(&w).for_each(|&a, &b, &w| {
            let w2 = w * w;
            num += w2 * a * b;
            den += w2 * (a * a + b * b);
        }),
        None => Zip::from(&x).and(&y).for_each(|&a, &b| {
            num += a * b;
            den += a * a + b * b;
        }),
    }
    (2.0 * num, den)
}

/// Sum over first-layer rows (one per hidden unit, laid out on the grid) of
/// squared forward differences along each axis.
pub fn swr_penalty(model: &DedModel) -> f64 {
    let w = &model.params().weights[0];
    let grid = model.grid();
    w.rows()
        .into_iter()
        .map(|row| {
            let row = row.as_slice().expect("standard layout");
            let mut acc = 0.0;
            for_each_forward_pair(grid, |i, j| acc += (row[j] - row[i]).powi(2));
            acc
        })
        .sum()
}

fn for_each_forward_pair(grid: &GridSpec, mut f: impl FnMut(usize, usize)) {
    let [nx, ny, nz] = grid.dims;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = x + nx * (y + ny * z);
                if x + 1 < nx {
                    f(i, i + 1);
                }
                if y + 1 < ny {
                    f(i, i + nx);
                }
                if z + 1 < nz {
                    f(i, i + nx * ny);
                }
            }
        }
    }
}

/// Adds `lambda * d(swr)/dW0`, i.e. `-2 lambda` times the graph Laplacian of
/// each row.
pub(crate) fn add_swr_grad(model: &DedModel, lambda: f64, grad: &mut Array2<f64>) {
    let w = &model.params().weights[0];
    let grid = *model.grid();
    for (row, mut g) in w.rows().into_iter().zip(grad.rows_mut()) {
        let row = row.as_slice().expect("standard layout");
        let g = g.as_slice_mut().expect("standard layout");
        for_each_forward_pair(&grid, |i, j| {
            let d = 2.0 * lambda * (row[j] - row[i]);
            g[j] += d;
            g[i] -= d;
        });
    }
}

/// Loss over a batch and its gradient with respect to the probabilities.
pub(crate) fn loss_and_grad(
    z: &Array2<f64>,
    target: &Array2<f64>,
    weights: Option<&Array2<f64>>,
    cfg: &LossConfig,
    model: &DedModel,
) -> Result<(LossBreakdown, Array2<f64>)> {
    if z.shape() != target.shape() || weights.is_some_and(|w| w.shape() != z.shape()) {
        return Err(Error::ShapeMismatch(format!(
            "probabilities {:?}, targets {:?}",
            z.shape(),
            target.shape()
        )));
    }
    if let Some(bad) = z.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::DomainError(format!("probability {bad} outside [0, 1]")));
    }
    let (b, s) = z.dim();
    let mut dz = Array2::zeros((b, s));
    let mut out = LossBreakdown::default();
    for r in 0..b {
        let zr = z.row(r);
        let tr = target.row(r);
        let wr = weights.map(|w| w.row(r));
        let mut ce = 0.0;
        let mut drow = dz.row_mut(r);
        for v in 0..s {
            let (p, t) = (zr[v], tr[v]);
            let pc = p.clamp(CLAMP, 1.0 - CLAMP);
            if pc != p {
                out.clamped += 1;
            }
            ce += t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
            if pc == p {
                drow[v] += cfg.ce_weight * -(t / pc - (1.0 - t) / (1.0 - pc)) / s as f64;
            }
        }
        out.ce += -ce / s as f64;

        let (num, den) = wdice_parts(tr, zr, wr);
        let dice = if den == 0.0 { 1.0 } else { num / den };
        out.wdice += dice;
        if den > 0.0 {
            for v in 0..s {
                let w2 = wr.map_or(1.0, |w| w[v] * w[v]);
                let d = (2.0 * w2 * tr[v] * den - num * 2.0 * w2 * zr[v]) / (den * den);
                drow[v] -= cfg.dice_weight * d;
            }
        }
    }
    let bf = b as f64;
    out.ce /= bf;
    out.wdice /= bf;
    dz /= bf;
    if out.clamped > 0 {
        log::debug!("{} probabilities clamped", out.clamped);
    }
    out.swr = swr_penalty(model);
    out.total = cfg.ce_weight * out.ce - cfg.dice_weight * out.wdice + cfg.lambda_swr * out.swr;
    Ok((out, dz))
}

/// Loss value without gradients.
pub fn loss(
    z: &Array2<f64>,
    target: &Array2<f64>,
    weights: Option<&Array2<f64>>,
    cfg: &LossConfig,
    model: &DedModel,
) -> Result<LossBreakdown> {
    loss_and_grad(z, target, weights, cfg, model).map(|(l, _)| l)
}
