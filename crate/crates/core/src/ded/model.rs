//! Tied-weight dense encoder-decoder parameters.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Trainable tensors. Encoder layer `j` maps `sizes[j] -> sizes[j + 1]`
/// with `weights[j]` (shape `sizes[j + 1] x sizes[j]`); the matching decoder
/// layer reuses its transpose. Batch-norm affine parameters are indexed by
/// network layer: encoder layers first, then decoder layers from the
/// innermost outward, omitting the final output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DedParams {
    pub weights: Vec<Array2<f64>>,
    pub b_enc: Vec<Array1<f64>>,
    pub b_dec: Vec<Array1<f64>>,
    pub gamma: Vec<Array1<f64>>,
    pub beta: Vec<Array1<f64>>,
}

impl DedParams {
    pub fn zeros_like(other: &DedParams) -> Self {
        let z1 = |v: &Vec<Array1<f64>>| v.iter().map(|a| Array1::zeros(a.len())).collect();
        Self {
            weights: other.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            b_enc: z1(&other.b_enc),
            b_dec: z1(&other.b_dec),
            gamma: z1(&other.gamma),
            beta: z1(&other.beta),
        }
    }

    /// Tensor names and shapes in storage order.
    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (j, w) in self.weights.iter().enumerate() {
            out.push((format!("W{j}"), w.shape().to_vec()));
        }
        for (name, set) in [("b_enc", &self.b_enc), ("b_dec", &self.b_dec), ("gamma", &self.gamma), ("beta", &self.beta)] {
            for (j, b) in set.iter().enumerate() {
                out.push((format!("{name}{j}"), vec![b.len()]));
            }
        }
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.weights.iter().map(|w| w.as_slice().expect("standard layout")).collect();
        for set in [&self.b_enc, &self.b_dec, &self.gamma, &self.beta] {
            out.extend(set.iter().map(|b| b.as_slice().expect("contiguous")));
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .weights
            .iter_mut()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect();
        for set in [&mut self.b_enc, &mut self.b_dec, &mut self.gamma, &mut self.beta] {
            out.extend(set.iter_mut().map(|b| b.as_slice_mut().expect("contiguous")));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat copy in storage order.
    pub fn to_vec(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormStats {
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// Batch-norm hyperparameters.
pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct DedModel {
    layer_sizes: Vec<usize>,
    grid: GridSpec,
    pub(crate) params: DedParams,
    pub(crate) bn: Vec<BatchNormStats>,
    /// Bumped on every parameter update; caches remember the version they
    /// were computed with.
    version: u64,
}

impl DedModel {
    /// Freshly initialized model: weights uniform in
    /// `+-sqrt(6 / (fan_in + fan_out))`, zero biases, identity batch norm.
    pub fn new(grid: GridSpec, hidden: &[usize], seed: u64) -> Result<Self> {
        grid.validate()?;
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::InvalidConfig(format!("hidden sizes must be non-empty and positive: {hidden:?}")));
        }
        let mut sizes = vec![grid.len()];
        sizes.extend_from_slice(hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = sizes
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Array2::from_shape_simple_fn((w[1], w[0]), || rng.random_range(-limit..=limit))
            })
            .collect();
        let k = hidden.len();
        let b_enc = (0..k).map(|j| Array1::zeros(sizes[j + 1])).collect();
        let b_dec = (0..k).map(|j| Array1::zeros(sizes[j])).collect();
        let norm_sizes: Vec<usize> = (0..2 * k - 1).map(|l| layer_output_size(&sizes, l)).collect();
        let gamma = norm_sizes.iter().map(|&n| Array1::ones(n)).collect();
        let beta = norm_sizes.iter().map(|&n| Array1::zeros(n)).collect();
        let bn = norm_sizes
            .iter()
            .map(|&n| BatchNormStats {
                running_mean: vec![0.0; n],
                running_var: vec![1.0; n],
            })
            .collect();
        Ok(Self {
            layer_sizes: sizes,
            grid,
            params: DedParams {
                weights,
                b_enc,
                b_dec,
                gamma,
                beta,
            },
            bn,
            version: 0,
        })
    }

    pub(crate) fn from_parts(grid: GridSpec, layer_sizes: Vec<usize>, params: DedParams, bn: Vec<BatchNormStats>) -> Result<Self> {
        let model = Self {
            layer_sizes,
            grid,
            params,
            bn,
            version: 0,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 || sizes[0] != self.grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "layer sizes {sizes:?} do not start with the grid voxel count {}",
                self.grid.len()
            )));
        }
        let k = sizes.len() - 1;
        let p = &self.params;
        let ok = p.weights.len() == k
            && p.weights.iter().enumerate().all(|(j, w)| w.shape() == [sizes[j + 1], sizes[j]])
            && p.b_enc.len() == k
            && p.b_enc.iter().enumerate().all(|(j, b)| b.len() == sizes[j + 1])
            && p.b_dec.len() == k
            && p.b_dec.iter().enumerate().all(|(j, b)| b.len() == sizes[j])
            && p.gamma.len() == 2 * k - 1
            && p.beta.len() == 2 * k - 1
            && self.bn.len() == 2 * k - 1
            && (0..2 * k - 1).all(|l| {
                let n = layer_output_size(sizes, l);
                p.gamma[l].len() == n
                    && p.beta[l].len() == n
                    && self.bn[l].running_mean.len() == n
                    && self.bn[l].running_var.len() == n
            });
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("parameter tensors do not match layer sizes".into()))
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &DedParams {
        &self.params
    }

    pub fn bn_stats(&self) -> &[BatchNormStats] {
        &self.bn
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Mutable parameter access; invalidates every outstanding cache.
    pub fn params_mut(&mut self) -> &mut DedParams {
        self.version += 1;
        &mut self.params
    }

    /// Number of encoder layers (`k`).
    pub fn depth(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn encoder_weight(&self, j: usize) -> ArrayView2<'_, f64> {
        self.params.weights[j].view()
    }

    /// Decoder weight of layer `j`: a transposed view of the encoder matrix.
    pub fn decoder_weight(&self, j: usize) -> ArrayView2<'_, f64> {
        self.params.weights[j].t()
    }
}

/// Output width of network layer `l` (encoder layers, then decoder layers).
pub(crate) fn layer_output_size(sizes: &[usize], l: usize) -> usize {
    let k = sizes.len() - 1;
    if l < k {
        sizes[l + 1]
    } else {
        sizes[2 * k - 1 - l]
    }
}
