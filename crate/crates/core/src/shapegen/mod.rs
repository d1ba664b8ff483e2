//! Parametric left-atrium generator.
//!
//! An atrium is an ellipsoid body smoothly blended with four pulmonary-vein
//! tubes and an appendage tube, then bent by a smooth divergence-free warp.
//! Parameters come from a multivariate normal with Mahalanobis rejection.

mod implicit;
mod params;

use std::fs;
use std::path::Path;

use nalgebra::Point3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OccupancyVolume, ScalarField};
use crate::io;
use crate::mesh::{self, Landmarks, TriMesh};
use crate::volume::marching_cubes;

pub use implicit::{ellipsoid_ray, ellipsoid_sdf, septum_direction, smin, AtriumShape, Capsule, Warp, BLEND_MM};
pub use params::{
    direction, sample_params, AtriumParams, MvnSampler, MvnSpec, MAX_DRAWS, MAX_WARP_AMP_MM, MIN_PV_ANGLE_DEG,
    PARAM_DIM, PV_RADIUS_RANGE_MM,
};

/// Shapes tried per sample before the dataset generator gives up on it.
pub const MAX_SHAPE_ATTEMPTS: usize = 100;

/// One generated atrium.
#[derive(Debug, Clone)]
pub struct Atrium {
    pub params: AtriumParams,
    pub volume: OccupancyVolume,
    pub mesh: TriMesh,
    pub landmarks: Landmarks,
    /// Warped PV tube axis ends, LS, LI, RI, RS.
    pub pv_axis_ends: [Point3<f64>; 4],
    /// Warped points where each PV axis leaves the body.
    pub pv_bases: [Point3<f64>; 4],
}

/// Samples the implicit shape on `grid` and extracts its surface and
/// landmarks. Fails with `OutOfExtent` when the shape reaches a grid face.
pub fn build_atrium(params: &AtriumParams, grid: &GridSpec) -> Result<Atrium> {
    grid.validate()?;
    let shape = AtriumShape::new(params);
    let values = ScalarField::from_fn(*grid, |v| shape.value(&grid.world_of(v)));
    let volume = OccupancyVolume::new(*grid, values.data().iter().map(|&f| f <= 0.0).collect())?;
    if let Some(v) = volume.occupied().find(|&v| grid.on_grid_face(v)) {
        return Err(Error::OutOfExtent(format!("occupied voxel {v:?} on the grid face")));
    }
    if volume.count() == 0 {
        return Err(Error::DegenerateVolume("shape misses every voxel center".into()));
    }
    let negated = ScalarField::new(*grid, values.data().iter().map(|f| -f).collect())?;
    let mesh = marching_cubes(&negated, 0.0)?;
    let landmarks = Landmarks::new(
        std::array::from_fn(|i| shape.pv_landmark(i)),
        shape.septum_landmark(),
    )?;
    Ok(Atrium {
        params: params.clone(),
        volume,
        mesh,
        landmarks,
        pv_axis_ends: std::array::from_fn(|i| shape.pv_axis_end(i)),
        pv_bases: std::array::from_fn(|i| shape.pv_base(i)),
    })
}

/// Landmarks of the unwarped mean-parameter atrium, the reference placed on
/// the mean shape.
pub fn mean_parameter_landmarks(spec: &MvnSpec) -> Result<Landmarks> {
    let mut params = AtriumParams::from_vector(&spec.mean, 0)?;
    params.warp_amp_mm = 0.0;
    let shape = AtriumShape::new(&params);
    Landmarks::new(std::array::from_fn(|i| shape.pv_landmark(i)), shape.septum_landmark())
}

/// Mean-parameter atrium without warp.
pub fn mean_parameter_atrium(spec: &MvnSpec, grid: &GridSpec) -> Result<Atrium> {
    let mut params = AtriumParams::from_vector(&spec.mean, 0)?;
    params.warp_amp_mm = 0.0;
    build_atrium(&params, grid)
}

/// Independent per-sample seed derived from the master seed.
pub fn sample_seed(master: u64, index: usize) -> u64 {
    let mut z = master ^ (index as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub index: usize,
    pub seed: u64,
    /// Shapes built for this sample, including rejected ones.
    pub attempts: usize,
    pub atrium: Atrium,
}

impl Sample {
    pub fn id(&self) -> String {
        sample_id(self.index)
    }
}

pub fn sample_id(index: usize) -> String {
    format!("{index:04}")
}

fn generate_one(sampler: &MvnSampler, threshold: f64, grid: &GridSpec, index: usize, seed: u64) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=MAX_SHAPE_ATTEMPTS {
        let params = params::sample_with(sampler, threshold, &mut rng)?;
        match build_atrium(&params, grid) {
            Ok(atrium) => {
                let components = atrium.volume.component_count();
                if components == 1 {
                    return Ok(Sample {
                        index,
                        seed,
                        attempts: attempt,
                        atrium,
                    });
                }
                log::debug!("sample {index}: {components} components, redrawing");
            }
            Err(Error::OutOfExtent(msg)) => log::debug!("sample {index}: {msg}, redrawing"),
            Err(e) => return Err(e),
        }
    }
    Err(Error::RejectionExhausted(MAX_SHAPE_ATTEMPTS))
}

/// `n` accepted atria, deterministic in `seed` regardless of thread count.
pub fn generate_dataset(spec: &MvnSpec, grid: &GridSpec, n: usize, seed: u64) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    grid.validate()?;
    let sampler = MvnSampler::new(spec)?;
    (0..n)
        .into_par_iter()
        .map(|i| generate_one(&sampler, spec.accept_threshold, grid, i, sample_seed(seed, i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub split: Split,
    pub seed: u64,
    pub warp_seed: u64,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub spec_hash: String,
    pub grid: GridSpec,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub samples: Vec<SampleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<crate::pathgen::PathManifest>,
}

impl DatasetManifest {
    /// The first `n_train` samples form the training split.
    pub fn new(spec: &MvnSpec, grid: &GridSpec, seed: u64, samples: &[Sample], n_train: usize) -> Self {
        let records = samples
            .iter()
            .map(|s| SampleRecord {
                id: s.id(),
                split: if s.index < n_train { Split::Train } else { Split::Test },
                seed: s.seed,
                warp_seed: s.atrium.params.warp_seed,
                attempts: s.attempts,
            })
            .collect();
        Self {
            spec_hash: spec.hash_hex(),
            grid: *grid,
            seed,
            n_train: n_train.min(samples.len()),
            n_test: samples.len().saturating_sub(n_train),
            samples: records,
            paths: None,
        }
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.samples.iter().filter(move |s| s.split == split).map(|s| s.id.as_str())
    }
}

/// Writes `<dir>/<id>/{shape.vol.json, shape.vol.raw, shape.obj,
/// landmarks.json, params.json}` for one sample.
pub fn write_sample(dir: impl AsRef<Path>, sample: &Sample) -> Result<()> {
    let sdir = dir.as_ref().join(sample.id());
    fs::create_dir_all(&sdir)?;
    io::write_occupancy(&sample.atrium.volume, sdir.join("shape"))?;
    mesh::write_obj(&sample.atrium.mesh, sdir.join("shape.obj"))?;
    io::write_json(&sample.atrium.landmarks, sdir.join("landmarks.json"))?;
    io::write_json(&sample.atrium.params, sdir.join("params.json"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_grid() -> GridSpec {
        GridSpec::centered(24, 5.0).unwrap()
    }

    #[test]
    fn plain_ellipsoid_matches_analytic_containment() {
        let spec = MvnSpec::default();
        let mut p = AtriumParams::from_vector(&spec.mean, 9).unwrap();
        p.warp_amp_mm = 0.0;
        p.pv_length_mm = [0.0; 4];
        p.appendage_length_mm = 0.0;
        let grid = desk_grid();
        let a = build_atrium(&p, &grid).unwrap();
        let [rx, ry, rz] = p.body_radii_mm;
        let oracle = OccupancyVolume::from_fn(grid, |v| {
            let w = grid.world_of(v);
            w.x * w.x / (rx * rx) + w.y * w.y / (ry * ry) + w.z * w.z / (rz * rz) <= 1.0
        });
        assert_eq!(a.volume, oracle);
        assert!(a.mesh.is_closed());
    }

    #[test]
    fn mean_atrium_is_valid() {
        let spec = MvnSpec::default();
        let grid = desk_grid();
        let a = mean_parameter_atrium(&spec, &grid).unwrap();
        assert_eq!(a.volume.component_count(), 1);
        assert!(a.mesh.is_closed());
        assert!(a.mesh.signed_volume() > 0.0);
        let lm = mean_parameter_landmarks(&spec).unwrap();
        assert_eq!(lm, a.landmarks);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let s: Vec<u64> = (0..100).map(|i| sample_seed(42, i)).collect();
        let mut u = s.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), 100);
        assert_eq!(sample_seed(42, 3), s[3]);
        assert_ne!(sample_seed(43, 3), s[3]);
    }
}
