//! Reproducible end-to-end commands: shapes, paths, training, inference,
//! evaluation and mesh export. Each command writes its resolved
//! configuration next to its outputs and produces byte-identical files for
//! identical inputs.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ded::{self, EpochLog, TrainPair};
use crate::error::{Error, Result};
use crate::eval::{compare_to_mean_shape, MetricReport};
use crate::grid::{OccupancyVolume, ScalarField};
use crate::io::{self, read_json, write_json, Dtype, VolumeHeader};
use crate::mesh::{self, rigid_register, Landmarks, RigidTransform, TriMesh};
use crate::pathgen::{self, PathCloud, PathManifest, PathFailure};
use crate::shapegen::{self, sample_seed, DatasetManifest, Split};
use crate::volume::{marching_cubes, mean_shape};

pub use config::{desk_grid, paper_grid, Overrides, PipelineConfig, SwrPreset};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";
pub const MEAN_FIELD: &str = "mean_field";
pub const MEAN_SHAPE: &str = "mean_shape";
pub const MEAN_MESH: &str = "mean_shape.obj";
pub const MEAN_LANDMARKS: &str = "mean_landmarks.json";
pub const SHAPE: &str = "shape";
pub const SHAPE_MESH: &str = "shape.obj";
pub const PATH_CSV: &str = "path.csv";
pub const PATH_VOLUME: &str = "path";
pub const PATH_LANDMARKS: &str = "path_landmarks.json";
pub const RECON_FIELD: &str = "recon_prob";
pub const RECON: &str = "recon";

/// Keeps the path streams independent of the shape streams under one seed.
const PATH_STREAM: u64 = 0x7061_7468_7374_726d;

/// Generates `n_train + n_test` atria, their training-split mean shape and
/// the mean-shape landmarks, then the manifest (last, so a failed run never
/// leaves one behind).
pub fn gen_shapes(cfg: &PipelineConfig, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let spec = cfg.shape_spec()?;
    fs::create_dir_all(out)?;
    write_json(cfg, out.join(CONFIG))?;
    let n = cfg.n_train + cfg.n_test;
    let samples = shapegen::generate_dataset(&spec, &cfg.grid, n, cfg.seed)?;
    let rejected: usize = samples.iter().map(|s| s.attempts - 1).sum();
    log::info!("generated {n} atria ({rejected} rejected shapes)");
    for s in &samples {
        shapegen::write_sample(out, s)?;
    }
    let train: Vec<OccupancyVolume> = samples[..cfg.n_train].iter().map(|s| s.atrium.volume.clone()).collect();
    let (field, binary) = mean_shape(&train)?;
    let mean_mesh = marching_cubes(&field, 0.5)?;
    let mean_lm = snap_landmarks(&mean_mesh, &shapegen::mean_parameter_landmarks(&spec)?)?;
    io::write_field(&field, out.join(MEAN_FIELD))?;
    io::write_occupancy(&binary, out.join(MEAN_SHAPE))?;
    mesh::write_obj(&mean_mesh, out.join(MEAN_MESH))?;
    write_json(&mean_lm, out.join(MEAN_LANDMARKS))?;
    let manifest = DatasetManifest::new(&spec, &cfg.grid, cfg.seed, &samples, cfg.n_train);
    write_json(&manifest, out.join(MANIFEST))?;
    Ok(manifest)
}

/// Landmarks moved to their nearest mesh vertices.
fn snap_landmarks(mesh: &TriMesh, lm: &Landmarks) -> Result<Landmarks> {
    let snap = |p| -> Result<_> { Ok(mesh.vertices()[mesh::nearest_vertex(mesh, p)?]) };
    let pv = [snap(&lm.pv[0])?, snap(&lm.pv[1])?, snap(&lm.pv[2])?, snap(&lm.pv[3])?];
    Landmarks::new(pv, snap(&lm.septum)?)
}

pub fn read_manifest(dataset: &Path) -> Result<DatasetManifest> {
    read_json(dataset.join(MANIFEST))
}

/// Mean-shape mesh and landmarks of a dataset.
pub fn read_mean_frame(dataset: &Path) -> Result<(TriMesh, Landmarks)> {
    Ok((mesh::read_obj(dataset.join(MEAN_MESH))?, read_json(dataset.join(MEAN_LANDMARKS))?))
}

/// Synthesizes the catheter path of one sample.
pub fn sample_path(
    cfg: &PipelineConfig,
    mean_mesh: &TriMesh,
    mean_lm: &Landmarks,
    shape: &OccupancyVolume,
    shape_mesh: &TriMesh,
    index: usize,
) -> Result<(Landmarks, PathCloud, OccupancyVolume)> {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed ^ PATH_STREAM, index));
    let lm = pathgen::project_landmarks(mean_mesh, mean_lm, shape_mesh, cfg.pv_eps, cfg.septum_sigma_mm, &mut rng)?;
    let path = pathgen::compose_path(shape, &lm, cfg.alphas)?;
    let path = pathgen::augment_path(&path, shape, &cfg.augment, &mut rng)?;
    let (vol, dropped) = pathgen::path_to_volume(&path, shape.grid());
    if dropped > 0 {
        log::warn!("sample {index}: {dropped} augmented point(s) outside the grid");
    }
    Ok((lm, path, vol))
}

/// Writes `path.csv`, `path.vol.*` and `path_landmarks.json` beside every
/// sample. Failing samples are recorded in the manifest and skipped.
pub fn gen_paths(cfg: &PipelineConfig, dataset: &Path) -> Result<PathManifest> {
    cfg.validate()?;
    let mut manifest = read_manifest(dataset)?;
    let (mean_mesh, mean_lm) = read_mean_frame(dataset)?;
    write_json(cfg, dataset.join("config.paths.json"))?;
    let results: Vec<Result<()>> = manifest
        .samples
        .par_iter()
        .enumerate()
        .map(|(index, rec)| {
            let dir = dataset.join(&rec.id);
            let shape = io::read_occupancy(dir.join(SHAPE))?;
            let shape_mesh = mesh::read_obj(dir.join(SHAPE_MESH))?;
            let (lm, path, vol) = sample_path(cfg, &mean_mesh, &mean_lm, &shape, &shape_mesh, index)?;
            path.write_csv(dir.join(PATH_CSV))?;
            io::write_occupancy(&vol, dir.join(PATH_VOLUME))?;
            write_json(&lm, dir.join(PATH_LANDMARKS))
        })
        .collect();
    let mut failed = Vec::new();
    for (rec, r) in manifest.samples.iter().zip(results) {
        if let Err(e) = r {
            log::error!("sample {}: {e}", rec.id);
            failed.push(PathFailure {
                id: rec.id.clone(),
                error: e.kind().to_string(),
                message: e.to_string(),
            });
        }
    }
    let paths = PathManifest {
        seed: cfg.seed,
        alphas: cfg.alphas,
        augment: cfg.augment,
        pv_eps: cfg.pv_eps,
        septum_sigma_mm: cfg.septum_sigma_mm,
        failed,
    };
    manifest.paths = Some(paths.clone());
    write_json(&manifest, dataset.join(MANIFEST))?;
    Ok(paths)
}

/// (id, path volume, shape volume) of every sample in `split` that has a path.
pub fn load_pairs(dataset: &Path, split: Split) -> Result<(Vec<String>, Vec<TrainPair>)> {
    let manifest = read_manifest(dataset)?;
    let failed: Vec<&str> = manifest
        .paths
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("dataset has no paths; run gen-paths first".into()))?
        .failed
        .iter()
        .map(|f| f.id.as_str())
        .collect();
    let ids: Vec<String> = manifest
        .ids(split)
        .filter(|id| !failed.contains(id))
        .map(str::to_string)
        .collect();
    let pairs = ids
        .par_iter()
        .map(|id| {
            let dir = dataset.join(id);
            Ok((io::read_occupancy(dir.join(PATH_VOLUME))?, io::read_occupancy(dir.join(SHAPE))?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ids, pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub config: PipelineConfig,
    pub n_train: usize,
    pub n_validation: usize,
    pub epochs: Vec<EpochLog>,
    pub final_swr: f64,
}

/// Trains on the training split (test split as validation monitor only)
/// and writes the checkpoint plus `train_log.json` to `out`.
pub fn train(cfg: &PipelineConfig, dataset: &Path, out: &Path) -> Result<(ded::DedModel, TrainLog)> {
    cfg.validate()?;
    let (_, data) = load_pairs(dataset, Split::Train)?;
    let (_, validation) = load_pairs(dataset, Split::Test)?;
    let tc = cfg.train_config();
    let (model, epochs) = ded::train(&data, &validation, &tc)?;
    fs::create_dir_all(out)?;
    write_json(cfg, out.join(CONFIG))?;
    ded::save_checkpoint(&model, &tc.loss, tc.seed, out)?;
    let log = TrainLog {
        config: cfg.clone(),
        n_train: data.len(),
        n_validation: validation.len(),
        epochs,
        final_swr: ded::swr_penalty(&model),
    };
    write_json(&log, out.join("train_log.json"))?;
    Ok((model, log))
}

fn write_recon(model: &ded::DedModel, path: &OccupancyVolume, dir: &Path) -> Result<()> {
    let (field, bin) = ded::infer(model, path)?;
    fs::create_dir_all(dir)?;
    io::write_field(&field, dir.join(RECON_FIELD))?;
    io::write_occupancy(&bin, dir.join(RECON))
}

/// Reconstructs every test sample into `out/<id>/recon{,_prob}.vol.*`.
pub fn infer(cfg: &PipelineConfig, model_dir: &Path, dataset: &Path, out: &Path) -> Result<Vec<String>> {
    let (model, _) = ded::load_checkpoint(model_dir)?;
    let (ids, pairs) = load_pairs(dataset, Split::Test)?;
    fs::create_dir_all(out)?;
    write_json(cfg, out.join(CONFIG))?;
    ids.par_iter()
        .zip(&pairs)
        .map(|(id, (path, _))| write_recon(&model, path, &out.join(id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ids)
}

/// Reconstructs an external path: its PV ostia are rigidly registered onto
/// the mean-shape ostia, the path is moved along, voxelized and inferred.
/// Outputs go to `out` directly, together with `registration.json`.
pub fn infer_external(
    cfg: &PipelineConfig,
    model_dir: &Path,
    dataset: &Path,
    path_csv: &Path,
    landmarks: &Path,
    out: &Path,
) -> Result<RigidTransform> {
    let (model, _) = ded::load_checkpoint(model_dir)?;
    let (_, mean_lm) = read_mean_frame(dataset)?;
    let lm: Landmarks = read_json(landmarks)?;
    let path = PathCloud::read_csv(path_csv)?;
    let transform = rigid_register(&lm.pv, &mean_lm.pv)?;
    let moved = PathCloud {
        points: path.points.iter().map(|p| transform.apply(p)).collect(),
        sections: path.sections.clone(),
    };
    let (vol, dropped) = pathgen::path_to_volume(&moved, model.grid());
    if dropped > 0 {
        log::warn!("{dropped} registered path point(s) fall outside the grid");
    }
    fs::create_dir_all(out)?;
    write_json(cfg, out.join(CONFIG))?;
    write_json(&transform, out.join("registration.json"))?;
    io::write_occupancy(&vol, out.join(PATH_VOLUME))?;
    write_recon(&model, &vol, out)?;
    Ok(transform)
}

/// Scores `recon_dir/<id>/recon.vol.*` against the test shapes and the
/// dataset's mean shape; writes `report.json` and `report.csv` to `out`.
pub fn eval(cfg: &PipelineConfig, dataset: &Path, recon_dir: &Path, out: &Path) -> Result<MetricReport> {
    let manifest = read_manifest(dataset)?;
    let mean = io::read_occupancy(dataset.join(MEAN_SHAPE))?;
    let ids: Vec<String> = manifest
        .ids(Split::Test)
        .filter(|id| io::volume_paths(recon_dir.join(id).join(RECON)).0.exists())
        .map(str::to_string)
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let loaded = ids
        .par_iter()
        .map(|id| {
            Ok((
                io::read_occupancy(recon_dir.join(id).join(RECON))?,
                io::read_occupancy(dataset.join(id).join(SHAPE))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (recons, truths): (Vec<_>, Vec<_>) = loaded.into_iter().unzip();
    let report = compare_to_mean_shape(&ids, &recons, &truths, &mean)?;
    fs::create_dir_all(out)?;
    write_json(cfg, out.join(CONFIG))?;
    write_json(&report, out.join("report.json"))?;
    fs::write(out.join("report.csv"), report.to_csv())?;
    Ok(report)
}

/// Reads a `u8` or `f32` volume from its stem (`dir/name` for
/// `dir/name.vol.json`) as a scalar field.
pub fn read_any_volume(stem: &Path) -> Result<ScalarField> {
    let (json, _) = io::volume_paths(stem);
    let header: VolumeHeader = read_json(&json)?;
    match header.dtype {
        Dtype::U8 => Ok(io::read_occupancy(stem)?.to_field()),
        Dtype::F32 => io::read_field(stem),
    }
}

/// Accepts `name`, `name.vol.json` or `name.vol.raw`.
pub fn volume_stem(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    for suffix in [".vol.json", ".vol.raw"] {
        if let Some(stem) = s.strip_suffix(suffix) {
            return PathBuf::from(stem);
        }
    }
    path.to_path_buf()
}

/// Marching cubes of a stored volume at `iso`, written as OBJ.
pub fn export_mesh(input: &Path, iso: f64, out: &Path) -> Result<TriMesh> {
    let field = read_any_volume(&volume_stem(input))?;
    let mesh = marching_cubes(&field, iso)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    mesh::write_obj(&mesh, out)?;
    Ok(mesh)
}
