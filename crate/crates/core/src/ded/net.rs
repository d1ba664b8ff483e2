//! Forward and backward passes.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;

use super::loss::{loss_and_grad, LossBreakdown, LossConfig};
use super::model::{BatchNormStats, DedModel, DedParams, BN_EPS, BN_MOMENTUM};
use crate::error::{Error, Result};
use crate::grid::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    /// Normalized pre-activation and `1 / sqrt(var + eps)` for normalized layers.
    xhat: Option<(Array2<f64>, Array1<f64>)>,
    /// Post-activation output.
    output: Array2<f64>,
}

/// Everything `backward` needs from a training forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    layers: Vec<LayerCache>,
    /// Batch statistics of every normalized layer (mean, biased variance).
    batch_stats: Vec<(Array1<f64>, Array1<f64>)>,
}

impl ForwardCache {
    pub fn model_version(&self) -> u64 {
        self.version
    }
}

/// Input keep-mask for dropout-style masking: each unit survives with
/// probability `1 - p` and survivors are scaled by `1 / (1 - p)`.
pub fn draw_input_mask<R: Rng + ?Sized>(rows: usize, cols: usize, p: f64, rng: &mut R) -> Array2<f64> {
    if p <= 0.0 {
        return Array2::ones((rows, cols));
    }
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < p { 0.0 } else { keep })
}

fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

impl DedModel {
    /// Forward pass over a batch (one sample per row). In training mode the
    /// input is multiplied by `input_mask` (if given) and batch norm uses
    /// batch statistics; inference uses running statistics and no mask.
    pub fn forward_with_mask(
        &self,
        x: &Array2<f64>,
        mode: Mode,
        input_mask: Option<&Array2<f64>>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        let s = self.layer_sizes()[0];
        if x.ncols() != s || x.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "input batch {:?}, expected (>=1, {s})",
                x.shape()
            )));
        }
        let mut h = match (mode, input_mask) {
            (Mode::Train, Some(m)) => {
                if m.shape() != x.shape() {
                    return Err(Error::ShapeMismatch("input mask shape differs from input".into()));
                }
                x * m
            }
            _ => x.clone(),
        };
        let k = self.depth();
        let p = &self.params;
        let mut layers = Vec::with_capacity(2 * k);
        let mut batch_stats = Vec::with_capacity(2 * k - 1);
        for l in 0..2 * k {
            let a = if l < k {
                h.dot(&p.weights[l].t()) + &p.b_enc[l]
            } else {
                let j = 2 * k - 1 - l;
                h.dot(&p.weights[j]) + &p.b_dec[j]
            };
            let input = std::mem::take(&mut h);
            if l == 2 * k - 1 {
                let z = a.mapv(sigmoid);
                layers.push(LayerCache {
                    input,
                    xhat: None,
                    output: z.clone(),
                });
                h = z;
                break;
            }
            let (mean, var) = match mode {
                Mode::Train => {
                    let mean = a.mean_axis(Axis(0)).expect("non-empty batch");
                    let var = (&a - &mean).mapv(|d| d * d).mean_axis(Axis(0)).expect("non-empty batch");
                    (mean, var)
                }
                Mode::Infer => (
                    Array1::from(self.bn[l].running_mean.clone()),
                    Array1::from(self.bn[l].running_var.clone()),
                ),
            };
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = (&a - &mean) * &inv_std;
            let out = (&xhat * &p.gamma[l] + &p.beta[l]).mapv(|v| v.max(0.0));
            batch_stats.push((mean, var));
            layers.push(LayerCache {
                input,
                xhat: Some((xhat, inv_std)),
                output: out.clone(),
            });
            h = out;
        }
        Ok((
            h,
            ForwardCache {
                version: self.version(),
                layers,
                batch_stats,
            },
        ))
    }

    /// Forward pass drawing the training input mask from `rng`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Array2<f64>,
        mode: Mode,
        input_mask_prob: f64,
        rng: &mut R,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        match mode {
            Mode::Train if input_mask_prob > 0.0 => {
                let m = draw_input_mask(x.nrows(), x.ncols(), input_mask_prob, rng);
                self.forward_with_mask(x, mode, Some(&m))
            }
            _ => self.forward_with_mask(x, mode, None),
        }
    }

    /// Folds a training pass's batch statistics into the running averages.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        for (bn, (mean, var)) in self.bn.iter_mut().zip(&cache.batch_stats) {
            update_stats(bn, mean, var);
        }
    }

    /// Exact gradient of the loss evaluated on `z` (the output of the pass
    /// that produced `cache`) with respect to every parameter.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        z: &Array2<f64>,
        target: &Array2<f64>,
        weights: Option<&Array2<f64>>,
        cfg: &LossConfig,
    ) -> Result<(DedParams, LossBreakdown)> {
        if cache.version != self.version() || cache.layers.len() != 2 * self.depth() {
            return Err(Error::StaleCache);
        }
        let (breakdown, dz) = loss_and_grad(z, target, weights, cfg, self)?;
        let mut grads = DedParams::zeros_like(&self.params);
        let k = self.depth();
        let p = &self.params;

        // Sigmoid output layer.
        let last = &cache.layers[2 * k - 1];
        let mut da = &dz * &last.output.mapv(|z| z * (1.0 - z));
        for l in (0..2 * k).rev() {
            let layer = &cache.layers[l];
            if l < 2 * k - 1 {
                let (xhat, inv_std) = layer.xhat.as_ref().expect("normalized layer");
                let dh = {
                    let mut d = da.clone();
                    Zip::from(&mut d).and(&layer.output).for_each(|g, &o| {
                        if o <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    d
                };
                grads.gamma[l] = (&dh * xhat).sum_axis(Axis(0));
                grads.beta[l] = dh.sum_axis(Axis(0));
                let dxhat = &dh * &p.gamma[l];
                let n = dh.nrows() as f64;
                let sum_d = dxhat.sum_axis(Axis(0));
                let sum_dx = (&dxhat * xhat).sum_axis(Axis(0));
                da = (dxhat * n - &sum_d - xhat * &sum_dx) * &(inv_std / n);
            }
            if l < k {
                grads.b_enc[l] = da.sum_axis(Axis(0));
                grads.weights[l] += &da.t().dot(&layer.input);
                if l > 0 {
                    da = da.dot(&p.weights[l]);
                }
            } else {
                let j = 2 * k - 1 - l;
                grads.b_dec[j] = da.sum_axis(Axis(0));
                grads.weights[j] += &layer.input.t().dot(&da);
                da = da.dot(&p.weights[j].t());
            }
        }
        if cfg.lambda_swr != 0.0 {
            super::loss::add_swr_grad(self, cfg.lambda_swr, &mut grads.weights[0]);
        }
        Ok((grads, breakdown))
    }

    /// Inference on a single probability/occupancy field.
    pub fn infer_field(&self, input: &ScalarField) -> Result<ScalarField> {
        self.grid().ensure_same(input.grid())?;
        let x = Array2::from_shape_vec((1, input.data().len()), input.data().to_vec())
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let (z, _) = self.forward_with_mask(&x, Mode::Infer, None)?;
        ScalarField::new(*self.grid(), z.row(0).to_vec())
    }

    /// Probabilities for a batch in inference mode.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((x.nrows(), self.layer_sizes()[0]));
        // Rows are independent in inference mode; chunking bounds memory.
        for (start, chunk) in x.axis_chunks_iter(Axis(0), 64).enumerate() {
            let (z, _) = self.forward_with_mask(&chunk.to_owned(), Mode::Infer, None)?;
            out.slice_mut(s![start * 64..start * 64 + z.nrows(), ..]).assign(&z);
        }
        Ok(out)
    }
}

fn update_stats(bn: &mut BatchNormStats, mean: &Array1<f64>, var: &Array1<f64>) {
    for (r, &m) in bn.running_mean.iter_mut().zip(mean) {
        *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * m;
    }
    for (r, &v) in bn.running_var.iter_mut().zip(var) {
        *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * v;
    }
}
