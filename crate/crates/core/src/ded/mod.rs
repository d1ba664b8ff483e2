//! Dense encoder-decoder (DED) with tied weights, trained to map a sparse
//! catheter-path volume to the full atrium occupancy.
//!
//! The network is `k` affine encoder layers followed by `k` decoder layers
//! that reuse the transposed encoder matrices. Every layer except the last
//! is affine, batch norm, ReLU; the last is affine, sigmoid.

mod gradcheck;
mod loss;
mod model;
mod net;
#[cfg(test)]
mod tests;

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OccupancyVolume, ScalarField};
use crate::io::write_json;
use crate::volume::boundary_weight_mask;

pub use gradcheck::{gradient_check, TensorCheck, GRADCHECK_FLOOR};
pub use loss::{loss, swr_penalty, wdice, LossBreakdown, LossConfig, CLAMP};
pub use model::{BatchNormStats, DedModel, DedParams, BN_EPS, BN_MOMENTUM};
pub use net::{draw_input_mask, ForwardCache, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: DedParams,
    pub v: DedParams,
    pub cfg: AdamConfig,
}

impl AdamState {
    pub fn new(params: &DedParams, cfg: AdamConfig) -> Self {
        Self {
            step: 0,
            m: DedParams::zeros_like(params),
            v: DedParams::zeros_like(params),
            cfg,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut DedParams, grads: &DedParams, state: &mut AdamState) -> Result<()> {
    let shapes = |p: &DedParams| p.slices().iter().map(|s| s.len()).collect::<Vec<_>>();
    if shapes(params) != shapes(grads) || shapes(params) != shapes(&state.m) {
        return Err(Error::ShapeMismatch("Adam tensors do not match the parameters".into()));
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps_adam,
    } = state.cfg;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let mut m_all = state.m.slices_mut();
    let mut v_all = state.v.slices_mut();
    for (((p, g), m), v) in params
        .slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(m_all.iter_mut())
        .zip(v_all.iter_mut())
    {
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p[i] -= lr * mhat / (vhat.sqrt() + eps_adam);
        }
    }
    Ok(())
}

/// Everything `train` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossConfig,
    pub optimizer: AdamConfig,
    /// Start the output bias at the logit of the mean training target, so
    /// the untrained network predicts the mean shape.
    pub output_prior: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            epochs: 40,
            batch_size: 16,
            seed: 0,
            loss: LossConfig::default(),
            optimizer: AdamConfig::default(),
            output_prior: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_dice: Option<f64>,
}

/// (input path volume, target shape volume)
pub type TrainPair = (OccupancyVolume, OccupancyVolume);

fn rows(vols: &[&OccupancyVolume]) -> Array2<f64> {
    let s = vols[0].grid().len();
    let mut x = Array2::zeros((vols.len(), s));
    for (mut row, v) in x.rows_mut().into_iter().zip(vols) {
        for (o, &b) in row.iter_mut().zip(v.data()) {
            *o = if b { 1.0 } else { 0.0 };
        }
    }
    x
}

/// Batch rows of `n` shuffled indices; a trailing single sample joins the
/// previous batch because training batch norm needs two rows.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let size = size.max(2);
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let n = out.len();
        let start = (n - 1) * size;
        out[n - 1] = &order[start..];
    }
    out
}

fn mean_dice(model: &DedModel, pairs: &[TrainPair]) -> Result<f64> {
    let mut total = 0.0;
    for (x, y) in pairs {
        let (_, bin) = infer(model, x)?;
        total += crate::eval::dice(&bin, y)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Output bias = logit of the per-voxel target frequency, kept a little
/// away from 0 and 1.
fn set_output_prior(model: &mut DedModel, targets: &Array2<f64>) {
    let mean = targets.mean_axis(ndarray::Axis(0)).expect("non-empty targets");
    let n = targets.nrows() as f64;
    let lo = 0.5 / (n + 1.0);
    model.params_mut().b_dec[0] = mean.mapv(|p| {
        let p = p.clamp(lo, 1.0 - lo);
        (p / (1.0 - p)).ln()
    });
}

/// Trains a fresh model. Deterministic in `cfg.seed`: initialization,
/// shuffling and input masks come from fixed seeded streams and all
/// reductions run in a fixed order.
pub fn train(data: &[TrainPair], validation: &[TrainPair], cfg: &TrainConfig) -> Result<(DedModel, Vec<EpochLog>)> {
    cfg.loss.validate()?;
    let (first, _) = data.first().ok_or(Error::EmptyDataset)?;
    let grid = *first.grid();
    for (x, y) in data.iter().chain(validation) {
        grid.ensure_same(x.grid())?;
        grid.ensure_same(y.grid())?;
    }
    if data.len() < 2 {
        log::warn!("single-sample batches collapse batch norm to its shift");
    }
    let mut model = DedModel::new(grid, &cfg.hidden, cfg.seed)?;
    let inputs = rows(&data.iter().map(|(x, _)| x).collect::<Vec<_>>());
    let targets = rows(&data.iter().map(|(_, y)| y).collect::<Vec<_>>());
    if cfg.output_prior {
        set_output_prior(&mut model, &targets);
    }
    let mut adam = AdamState::new(model.params(), cfg.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5eed));

    let masks = if cfg.loss.use_boundary_mask {
        let mut m = Array2::zeros(targets.raw_dim());
        for (mut row, (_, y)) in m.rows_mut().into_iter().zip(data) {
            let w = boundary_weight_mask(y, cfg.loss.mask_alpha, cfg.loss.mask_sigma)?;
            row.assign(&ndarray::ArrayView1::from(w.data()));
        }
        Some(m)
    } else {
        None
    };

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let groups = batches(&order, cfg.batch_size);
        for idx in &groups {
            let x = inputs.select(ndarray::Axis(0), idx);
            let t = targets.select(ndarray::Axis(0), idx);
            let w = masks.as_ref().map(|m| m.select(ndarray::Axis(0), idx));
            let (z, cache) = model.forward(&x, Mode::Train, cfg.loss.input_mask_prob, &mut rng)?;
            let (grads, parts) = model.backward(&cache, &z, &t, w.as_ref(), &cfg.loss)?;
            model.update_running_stats(&cache);
            adam_step(model.params_mut(), &grads, &mut adam)?;
            sum.total += parts.total;
            sum.ce += parts.ce;
            sum.wdice += parts.wdice;
            sum.swr += parts.swr;
            sum.clamped += parts.clamped;
        }
        let n = groups.len() as f64;
        let entry = EpochLog {
            epoch,
            loss: LossBreakdown {
                total: sum.total / n,
                ce: sum.ce / n,
                wdice: sum.wdice / n,
                swr: sum.swr / n,
                clamped: sum.clamped,
            },
            val_dice: if validation.is_empty() {
                None
            } else {
                Some(mean_dice(&model, validation)?)
            },
        };
        log::info!(
            "epoch {epoch}: loss {:.5} ce {:.5} wdice {:.4} swr {:.3} val dice {:?}",
            entry.loss.total,
            entry.loss.ce,
            entry.loss.wdice,
            entry.loss.swr,
            entry.val_dice
        );
        log.push(entry);
    }
    Ok((model, log))
}

/// Probability field and its `>= 0.5` binarization for one path volume.
pub fn infer(model: &DedModel, path: &OccupancyVolume) -> Result<(ScalarField, OccupancyVolume)> {
    let z = model.infer_field(&path.to_field())?;
    let bin = z.threshold(0.5);
    Ok((z, bin))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

/// `model.json`: architecture, hyperparameters and the tensor order of
/// `model.raw` (little-endian f32).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub layer_sizes: Vec<usize>,
    pub grid: GridSpec,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub loss: LossConfig,
    pub seed: u64,
    pub tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(model: &DedModel, loss: &LossConfig, seed: u64, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut tensors: Vec<TensorEntry> = model
        .params()
        .layout()
        .into_iter()
        .map(|(name, shape)| TensorEntry { name, shape })
        .collect();
    let mut raw = Vec::with_capacity(model.params().len() * 4);
    for s in model.params().slices() {
        raw.extend(s.iter().flat_map(|&v| (v as f32).to_le_bytes()));
    }
    for (l, bn) in model.bn_stats().iter().enumerate() {
        for (name, vals) in [("running_mean", &bn.running_mean), ("running_var", &bn.running_var)] {
            tensors.push(TensorEntry {
                name: format!("{name}{l}"),
                shape: vec![vals.len()],
            });
            raw.extend(vals.iter().flat_map(|&v| (v as f32).to_le_bytes()));
        }
    }
    let header = CheckpointHeader {
        layer_sizes: model.layer_sizes().to_vec(),
        grid: *model.grid(),
        bn_momentum: BN_MOMENTUM,
        bn_eps: BN_EPS,
        loss: *loss,
        seed,
        tensors,
    };
    write_json(&header, dir.join("model.json"))?;
    fs::write(dir.join("model.raw"), raw)?;
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<(DedModel, CheckpointHeader)> {
    let dir = dir.as_ref();
    let header: CheckpointHeader = crate::io::read_json(dir.join("model.json"))?;
    let raw = fs::read(dir.join("model.raw"))?;
    let sizes = &header.layer_sizes;
    if sizes.len() < 2 || sizes[0] != header.grid.len() {
        return Err(Error::Format(format!("layer sizes {sizes:?} do not match the grid")));
    }
    let template = DedModel::new(header.grid, &sizes[1..], 0)?;
    let expected: usize = template.params().len()
        + template.bn_stats().iter().map(|b| 2 * b.running_mean.len()).sum::<usize>();
    if raw.len() != expected * 4 {
        return Err(Error::Format(format!(
            "model.raw holds {} bytes, expected {}",
            raw.len(),
            expected * 4
        )));
    }
    let mut values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut params = template.params().clone();
    let mut bn = template.bn_stats().to_vec();
    let targets = params
        .slices_mut()
        .into_iter()
        .chain(bn.iter_mut().flat_map(|b| [b.running_mean.as_mut_slice(), b.running_var.as_mut_slice()]));
    for s in targets {
        for v in s.iter_mut() {
            *v = values.next().expect("length checked");
        }
    }
    let model = DedModel::from_parts(header.grid, sizes.clone(), params, bn)?;
    Ok((model, header))
}
