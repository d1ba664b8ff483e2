//! Occupancy volumes and scalar fields: voxelization, distance transforms,
//! boundary extraction, the boundary weight mask, Gaussian smoothing,
//! marching cubes and the voxel-wise mean shape.

mod distance;
mod marching_cubes;
mod voxelize;

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::{OccupancyVolume, ScalarField, VoxelSet, FACE_OFFSETS};

pub use distance::{boundary_distance_sq, signed_distance_transform, squared_distance_to_sites};
pub use marching_cubes::marching_cubes;
pub use voxelize::voxelize;

/// Occupied voxels with at least one empty (or off-grid) face neighbor.
pub fn extract_boundary(vol: &OccupancyVolume) -> VoxelSet {
    let grid = *vol.grid();
    let voxels: BTreeSet<_> = vol
        .occupied()
        .filter(|&v| {
            FACE_OFFSETS
                .iter()
                .any(|&o| grid.offset(v, o).is_none_or(|n| !vol.get(n)))
        })
        .collect();
    VoxelSet { grid, voxels }
}

/// Normalized 1D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Separable Gaussian blur with clamped edges; `sigma` is in voxels.
pub fn gaussian_smooth(field: &ScalarField, sigma: f64) -> Result<ScalarField> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(field.clone());
    }
    let grid = *field.grid();
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let mut data = field.data().to_vec();
    let mut scratch = vec![0.0; data.len()];
    for axis in 0..3 {
        let n = grid.dims[axis] as isize;
        for (i, out) in scratch.iter_mut().enumerate() {
            let v = grid.voxel(i);
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let mut u = v;
                u[axis] = (v[axis] as isize + t as isize - r).clamp(0, n - 1) as usize;
                acc += w * data[grid.index(u)];
            }
            *out = acc;
        }
        std::mem::swap(&mut data, &mut scratch);
    }
    ScalarField::new(grid, data)
}

/// Loss weights concentrated on the shape boundary:
/// `W = (1 + alpha) / (1 + D')` with `D'` the Gaussian-smoothed unsigned
/// distance (voxels) to the nearest boundary voxel. Boundary voxels keep
/// `D' = 0`, so they carry the maximum weight `1 + alpha`.
pub fn boundary_weight_mask(vol: &OccupancyVolume, alpha: f64, sigma: f64) -> Result<ScalarField> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    let d2 = boundary_distance_sq(vol)?;
    let dist = ScalarField::new(*vol.grid(), d2.iter().map(|d| d.sqrt()).collect())?;
    let smooth = gaussian_smooth(&dist, sigma)?;
    let data = smooth
        .data()
        .iter()
        .zip(&d2)
        .map(|(&d, &raw)| if raw == 0.0 { 1.0 + alpha } else { (1.0 + alpha) / (1.0 + d) })
        .collect();
    ScalarField::new(*vol.grid(), data)
}

/// Voxel-wise mean of the stack and its binarization at `>= 0.5`.
pub fn mean_shape(volumes: &[OccupancyVolume]) -> Result<(ScalarField, OccupancyVolume)> {
    let first = volumes
        .first()
        .ok_or_else(|| Error::InvalidConfig("mean shape of an empty stack".into()))?;
    let grid = *first.grid();
    let mut sum = vec![0usize; grid.len()];
    for v in volumes {
        grid.ensure_same(v.grid())?;
        for (s, &b) in sum.iter_mut().zip(v.data()) {
            *s += b as usize;
        }
    }
    let n = volumes.len() as f64;
    let mean = ScalarField::new(grid, sum.iter().map(|&s| s as f64 / n).collect())?;
    let binary = mean.threshold(0.5);
    Ok((mean, binary))
}
