//! Exact Euclidean distance transforms (separable lower-envelope method).

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OccupancyVolume, ScalarField};

use super::extract_boundary;

/// Squared Euclidean distance (voxel units) from every voxel to the nearest
/// site. Values are exact integers stored as `f64`; `f64::INFINITY` when there
/// is no site at all.
pub fn squared_distance_to_sites(grid: &GridSpec, sites: &[bool]) -> Vec<f64> {
    assert_eq!(sites.len(), grid.len());
    let [nx, ny, nz] = grid.dims;
    let mut d: Vec<f64> = sites
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();

    let longest = nx.max(ny).max(nz);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut env = Envelope::with_capacity(longest);

    // x lines
    for z in 0..nz {
        for y in 0..ny {
            let base = nx * (y + ny * z);
            line[..nx].copy_from_slice(&d[base..base + nx]);
            env.transform(&line[..nx], &mut out[..nx]);
            d[base..base + nx].copy_from_slice(&out[..nx]);
        }
    }
    // y lines
    for z in 0..nz {
        for x in 0..nx {
            for y in 0..ny {
                line[y] = d[x + nx * (y + ny * z)];
            }
            env.transform(&line[..ny], &mut out[..ny]);
            for y in 0..ny {
                d[x + nx * (y + ny * z)] = out[y];
            }
        }
    }
    // z lines
    for y in 0..ny {
        for x in 0..nx {
            for z in 0..nz {
                line[z] = d[x + nx * (y + ny * z)];
            }
            env.transform(&line[..nz], &mut out[..nz]);
            for z in 0..nz {
                d[x + nx * (y + ny * z)] = out[z];
            }
        }
    }
    d
}

/// Lower envelope of parabolas `(q - p)^2 + f(p)` for one grid line.
struct Envelope {
    roots: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            roots: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n),
        }
    }

    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.roots.clear();
        self.bounds.clear();
        for q in 0..f.len() {
            if f[q].is_infinite() {
                continue;
            }
            let mut start = f64::NEG_INFINITY;
            while let Some(&p) = self.roots.last() {
                // Inputs are exact integers, so the intersection abscissa is a
                // correctly rounded rational and comparisons are exact.
                let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
                if s <= *self.bounds.last().unwrap() {
                    self.roots.pop();
                    self.bounds.pop();
                } else {
                    start = s;
                    break;
                }
            }
            self.roots.push(q);
            self.bounds.push(start);
        }
        if self.roots.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, o) in out.iter_mut().enumerate() {
            while k + 1 < self.roots.len() && self.bounds[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.roots[k];
            let dq = q.abs_diff(p) as f64;
            *o = dq * dq + f[p];
        }
    }
}

/// Squared distance (voxel units) from every voxel to the nearest boundary
/// voxel of `vol`.
pub fn boundary_distance_sq(vol: &OccupancyVolume) -> Result<Vec<f64>> {
    let count = vol.count();
    if count == 0 || count == vol.grid().len() {
        return Err(Error::DegenerateVolume(format!(
            "{count} of {} voxels occupied",
            vol.grid().len()
        )));
    }
    let boundary = extract_boundary(vol).to_volume();
    Ok(squared_distance_to_sites(vol.grid(), boundary.data()))
}

/// Signed distance (voxel units) to the nearest boundary voxel: zero on the
/// boundary, positive inside, negative outside.
pub fn signed_distance_transform(vol: &OccupancyVolume) -> Result<ScalarField> {
    let d2 = boundary_distance_sq(vol)?;
    let data = d2
        .iter()
        .zip(vol.data())
        .map(|(&d, &inside)| if inside { d.sqrt() } else { -d.sqrt() })
        .collect();
    ScalarField::new(*vol.grid(), data)
}
