//! Synthetic catheter paths: landmarks projected from the mean shape onto a
//! sample, four Dijkstra legs through a depth-weighted voxel graph, and
//! stochastic augmentation around the routed points.

mod graph;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OccupancyVolume, Voxel};
use crate::mesh::{find_point_in_pv, nearest_vertex, sample_septum, vertex_normal, Landmarks, PvLabel, TriMesh};

pub use graph::{build_graph, dijkstra, dijkstra_with_cost, VoxelGraph};

/// Route order alphas: septum to LS, LS to LI, LI to RI, RI to RS.
pub const DEFAULT_ALPHAS: [f64; 4] = [0.001, 4.0, 1.0, 4.0];

/// Landmarks may sit up to this many voxels away from the interior.
pub const SNAP_RADIUS_VOXELS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathSection {
    SeptumToLS,
    LSToLI,
    LIToRI,
    RIToRS,
    Augmented,
}

impl PathSection {
    pub const LEGS: [PathSection; 4] = [Self::SeptumToLS, Self::LSToLI, Self::LIToRI, Self::RIToRS];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SeptumToLS => "SeptumToLS",
            Self::LSToLI => "LSToLI",
            Self::LIToRI => "LIToRI",
            Self::RIToRS => "RIToRS",
            Self::Augmented => "Augmented",
        }
    }
}

impl FromStr for PathSection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::LEGS
            .into_iter()
            .chain([Self::Augmented])
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Format(format!("unknown path section `{s}`")))
    }
}

/// Ordered catheter points (mm) with per-point section labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCloud {
    pub points: Vec<Point3<f64>>,
    pub sections: Vec<PathSection>,
}

impl PathCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push(&mut self, p: Point3<f64>, s: PathSection) {
        self.points.push(p);
        self.sections.push(s);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_mm,y_mm,z_mm,section\n");
        for (p, s) in self.points.iter().zip(&self.sections) {
            writeln!(out, "{},{},{},{}", p.x, p.y, p.z, s.as_str()).expect("write to string");
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == "x_mm,y_mm,z_mm,section" => {}
            other => return Err(Error::Format(format!("unexpected path header {other:?}"))),
        }
        let mut path = PathCloud {
            points: Vec::new(),
            sections: Vec::new(),
        };
        for line in lines {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(Error::Format(format!("path row `{line}` needs 4 columns")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Format(format!("bad coordinate `{s}`")))
            };
            path.push(Point3::new(num(cols[0])?, num(cols[1])?, num(cols[2])?), cols[3].parse()?);
        }
        Ok(path)
    }

    pub fn write_csv(&self, file: impl AsRef<Path>) -> Result<()> {
        fs::write(file, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(file: impl AsRef<Path>) -> Result<Self> {
        Self::parse_csv(&fs::read_to_string(file)?)
    }
}

/// Augmentation around every path point: `n` Gaussian draws of spread
/// `sigma` (mm), each kept with probability `s_f` if it lands inside, then
/// shifted by `N(0, I) * mu_s` (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub n: usize,
    pub sigma: f64,
    pub s_f: f64,
    pub mu_s: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            n: 6,
            sigma: 4.0,
            s_f: 0.5,
            mu_s: 2.0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.mu_s >= 0.0 && (0.0..=1.0).contains(&self.s_f)) {
            return Err(Error::InvalidConfig(format!("invalid augmentation config {self:?}")));
        }
        Ok(())
    }
}

/// Path-synthesis settings and per-sample failures, recorded in the
/// dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathManifest {
    pub seed: u64,
    pub alphas: [f64; 4],
    pub augment: AugmentConfig,
    pub pv_eps: f64,
    pub septum_sigma_mm: f64,
    pub failed: Vec<PathFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailure {
    pub id: String,
    pub error: String,
    pub message: String,
}

/// Moves the mean-shape landmarks onto `target`: each PV landmark walks the
/// target surface from its nearest vertex along the mean-shape normal at
/// the landmark; the septum is resampled around its nearest target vertex.
pub fn project_landmarks<R: Rng + ?Sized>(
    mean_mesh: &TriMesh,
    mean_landmarks: &Landmarks,
    target: &TriMesh,
    eps: f64,
    septum_sigma: f64,
    rng: &mut R,
) -> Result<Landmarks> {
    let mut pv = [Point3::origin(); 4];
    for (i, label) in PvLabel::ALL.into_iter().enumerate() {
        let p = mean_landmarks.pv(label);
        let anchor = nearest_vertex(mean_mesh, &p)?;
        let d = vertex_normal(mean_mesh, anchor)?;
        pv[i] = target.vertices()[find_point_in_pv(target, &p, &d, eps)?];
    }
    let septum = sample_septum(target, &mean_landmarks.septum, septum_sigma, rng)?;
    Landmarks::new(pv, septum)
}

/// Occupied voxel for a landmark: the containing voxel if occupied, else
/// the nearest occupied voxel within [`SNAP_RADIUS_VOXELS`] (ties to the
/// lexicographically smallest).
pub fn snap_to_interior(vol: &OccupancyVolume, p: &Point3<f64>) -> Option<Voxel> {
    let grid = vol.grid();
    if let Some(v) = grid.voxel_containing(p) {
        if vol.get(v) {
            return Some(v);
        }
    }
    let g = grid.grid_coords(p);
    let r = SNAP_RADIUS_VOXELS.ceil() as isize + 1;
    let base = g.map(|c| c.round() as isize);
    let mut best: Option<(f64, Voxel)> = None;
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                let c = [base[0] + dx, base[1] + dy, base[2] + dz];
                if !grid.in_bounds(c) {
                    continue;
                }
                let v = c.map(|x| x as usize);
                if !vol.get(v) {
                    continue;
                }
                let d2: f64 = (0..3).map(|a| (v[a] as f64 - g[a]).powi(2)).sum();
                if d2 > SNAP_RADIUS_VOXELS * SNAP_RADIUS_VOXELS {
                    continue;
                }
                if best.is_none_or(|(bd, bv)| d2 < bd || (d2 == bd && v < bv)) {
                    best = Some((d2, v));
                }
            }
        }
    }
    best.map(|(_, v)| v)
}

/// Routes septum -> LS -> LI -> RI -> RS through the occupied voxels, leg
/// `i` weighted with `alphas[i]`. Junction voxels appear once.
pub fn compose_path(vol: &OccupancyVolume, lm: &Landmarks, alphas: [f64; 4]) -> Result<PathCloud> {
    let names = ["septum", "pv_ls", "pv_li", "pv_ri", "pv_rs"];
    let mut stops = [[0usize; 3]; 5];
    for (i, p) in lm.route().iter().enumerate() {
        stops[i] = snap_to_interior(vol, p).ok_or_else(|| Error::LandmarkOutside(names[i].into()))?;
    }
    let mut graphs: HashMap<u64, VoxelGraph> = HashMap::new();
    let grid = vol.grid();
    let mut path = PathCloud {
        points: Vec::new(),
        sections: Vec::new(),
    };
    for (leg, section) in PathSection::LEGS.into_iter().enumerate() {
        let alpha = alphas[leg];
        let g = match graphs.entry(alpha.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(build_graph(vol, alpha)?),
        };
        let voxels = dijkstra(g, stops[leg], stops[leg + 1])?;
        let skip = usize::from(leg > 0);
        for v in voxels.into_iter().skip(skip) {
            path.push(grid.world_of(v), section);
        }
    }
    Ok(path)
}

/// Appends jittered copies of every point of `path` (see [`AugmentConfig`]).
/// Draws are consumed in a fixed order, so the result is a pure function of
/// the inputs and the rng state.
pub fn augment_path<R: Rng + ?Sized>(
    path: &PathCloud,
    vol: &OccupancyVolume,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<PathCloud> {
    cfg.validate()?;
    let mut out = path.clone();
    let grid = vol.grid();
    for p in &path.points {
        for _ in 0..cfg.n {
            let offset = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)) * cfg.sigma;
            let keep = rng.random::<f64>() < cfg.s_f;
            let q = p + offset;
            if !keep || !grid.voxel_containing(&q).is_some_and(|v| vol.get(v)) {
                continue;
            }
            let shift = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)) * cfg.mu_s;
            out.push(q + shift, PathSection::Augmented);
        }
    }
    Ok(out)
}

/// Voxels containing at least one path point, plus the number of points
/// that fell outside the grid.
pub fn path_to_volume(path: &PathCloud, grid: &GridSpec) -> (OccupancyVolume, usize) {
    let mut vol = OccupancyVolume::empty(*grid);
    let mut dropped = 0;
    for p in &path.points {
        match grid.voxel_containing(p) {
            Some(v) => vol.set(v, true),
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::debug!("{dropped} path point(s) outside the grid dropped");
    }
    (vol, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ball() -> OccupancyVolume {
        let grid = GridSpec::centered(15, 2.0).unwrap();
        OccupancyVolume::from_fn(grid, |v| grid.world_of(v).coords.norm() <= 11.0)
    }

    fn ball_landmarks() -> Landmarks {
        Landmarks::new(
            [
                Point3::new(10.0, 0.0, 4.0),
                Point3::new(10.0, 0.0, -4.0),
                Point3::new(-10.0, 0.0, -4.0),
                Point3::new(-10.0, 0.0, 4.0),
            ],
            Point3::new(0.0, -11.0, 0.0),
        )
        .unwrap()
    }

    #[test]
    fn composed_path_sections_and_adjacency() {
        let vol = ball();
        let path = compose_path(&vol, &ball_landmarks(), DEFAULT_ALPHAS).unwrap();
        let order: Vec<_> = path.sections.iter().copied().fold(Vec::new(), |mut acc, s| {
            if acc.last() != Some(&s) {
                acc.push(s);
            }
            acc
        });
        assert_eq!(order, PathSection::LEGS.to_vec());
        let grid = vol.grid();
        let voxels: Vec<_> = path.points.iter().map(|p| grid.voxel_containing(p).unwrap()).collect();
        for w in voxels.windows(2) {
            let d: usize = (0..3).map(|a| w[0][a].abs_diff(w[1][a])).sum();
            assert_eq!(d, 1);
        }
        assert!(voxels.iter().all(|&v| vol.get(v)));
        let (pv, dropped) = path_to_volume(&path, grid);
        assert_eq!(dropped, 0);
        assert_eq!(pv.count(), voxels.iter().collect::<std::collections::BTreeSet<_>>().len());
    }

    #[test]
    fn equal_landmarks_give_one_point() {
        let vol = ball();
        let p = Point3::new(0.0, 0.0, 0.0);
        let lm = Landmarks {
            pv: [p; 4],
            septum: p,
        };
        let path = compose_path(&vol, &lm, DEFAULT_ALPHAS).unwrap();
        assert_eq!(path.len(), 1);
    }

    #[test]
    fn far_landmark_rejected() {
        let vol = ball();
        let mut lm = ball_landmarks();
        lm.pv[2] = Point3::new(-13.9, 0.0, -13.9);
        assert!(matches!(compose_path(&vol, &lm, DEFAULT_ALPHAS), Err(Error::LandmarkOutside(s)) if s == "pv_ri"));
    }

    #[test]
    fn augmentation_noops_and_interior() {
        let vol = ball();
        let path = compose_path(&vol, &ball_landmarks(), DEFAULT_ALPHAS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let none = AugmentConfig { n: 0, ..Default::default() };
        assert_eq!(augment_path(&path, &vol, &none, &mut rng).unwrap(), path);
        let trimmed = AugmentConfig { s_f: 0.0, ..Default::default() };
        assert_eq!(augment_path(&path, &vol, &trimmed, &mut rng).unwrap(), path);
        let still = AugmentConfig { mu_s: 0.0, ..Default::default() };
        let aug = augment_path(&path, &vol, &still, &mut rng).unwrap();
        assert!(aug.len() > path.len());
        for p in &aug.points[path.len()..] {
            assert!(vol.get(vol.grid().voxel_containing(p).unwrap()));
        }
    }

    #[test]
    fn csv_roundtrip() {
        let path = compose_path(&ball(), &ball_landmarks(), DEFAULT_ALPHAS).unwrap();
        let text = path.to_csv();
        assert!(text.starts_with("x_mm,y_mm,z_mm,section\n"));
        assert_eq!(PathCloud::parse_csv(&text).unwrap(), path);
    }
}
