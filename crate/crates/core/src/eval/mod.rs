//! Reconstruction metrics and the mean-shape baseline comparison.

mod stats;

use std::fmt::Write as _;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::OccupancyVolume;
use crate::mesh::{nearest_vertex, TriMesh};
use crate::volume::{extract_boundary, squared_distance_to_sites};

pub use stats::{ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_cdf, PairedTTest};

/// `2 |x & y| / (|x| + |y|)`, and 1 when both are empty.
pub fn dice(x: &OccupancyVolume, y: &OccupancyVolume) -> Result<f64> {
    x.grid().ensure_same(y.grid())?;
    let (mut both, mut total) = (0usize, 0usize);
    for (&a, &b) in x.data().iter().zip(y.data()) {
        both += (a && b) as usize;
        total += a as usize + b as usize;
    }
    if total == 0 {
        log::debug!("dice of two empty volumes");
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / total as f64)
}

/// Symmetric mean of nearest-boundary-voxel distances between the two
/// boundaries, in mm.
pub fn avdist(x: &OccupancyVolume, y: &OccupancyVolume) -> Result<f64> {
    x.grid().ensure_same(y.grid())?;
    let bx = extract_boundary(x).to_volume();
    let by = extract_boundary(y).to_volume();
    if bx.count() == 0 || by.count() == 0 {
        return Err(Error::EmptyBoundary);
    }
    let directed = |from: &OccupancyVolume, to: &OccupancyVolume| {
        let d2 = squared_distance_to_sites(to.grid(), to.data());
        let (sum, n) = from
            .data()
            .iter()
            .zip(&d2)
            .filter(|(&b, _)| b)
            .fold((0.0, 0usize), |(s, n), (_, d)| (s + d.sqrt(), n + 1));
        sum / n as f64
    };
    Ok(0.5 * (directed(&bx, &by) + directed(&by, &bx)) * x.grid().spacing_mm)
}

/// Distance from each point to its nearest mesh vertex, and the mean.
pub fn point_to_mesh(points: &[Point3<f64>], mesh: &TriMesh) -> Result<(Vec<f64>, f64)> {
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let v = nearest_vertex(mesh, p)?;
        out.push((mesh.vertices()[v] - p).norm());
    }
    let mean = if out.is_empty() {
        0.0
    } else {
        out.iter().sum::<f64>() / out.len() as f64
    };
    Ok((out, mean))
}

/// Symmetric mean nearest-vertex distance between two meshes, each
/// direction using only source vertices within `radius_mm` of some center
/// (`None` uses every vertex).
pub fn radius_limited_surface_distance(
    a: &TriMesh,
    b: &TriMesh,
    centers: &[Point3<f64>],
    radius_mm: Option<f64>,
) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let select = |m: &TriMesh| -> Result<Vec<Point3<f64>>> {
        let pts: Vec<Point3<f64>> = match radius_mm {
            None => m.vertices().to_vec(),
            Some(r) => m
                .vertices()
                .iter()
                .filter(|v| centers.iter().any(|c| (*v - c).norm() <= r))
                .copied()
                .collect(),
        };
        if pts.is_empty() {
            return Err(Error::NoVerticesInRadius(radius_mm.unwrap_or(f64::INFINITY)));
        }
        Ok(pts)
    };
    let (_, ab) = point_to_mesh(&select(a)?, b)?;
    let (_, ba) = point_to_mesh(&select(b)?, a)?;
    Ok(0.5 * (ab + ba))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    pub dice: f64,
    pub avdist_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub dice: f64,
    pub avdist_mm: f64,
    pub per_sample: Vec<SampleMetrics>,
    /// Reconstruction DICE minus baseline DICE, one-tailed for "greater".
    pub dice_test: PairedTTest,
    /// Baseline AVDist minus reconstruction AVDist, one-tailed for "greater".
    pub avdist_test: PairedTTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dice: f64,
    pub avdist_mm: f64,
    pub per_sample: Vec<SampleMetrics>,
    pub baseline: Option<BaselineReport>,
}

fn metrics(ids: &[String], recons: &[OccupancyVolume], truths: &[OccupancyVolume]) -> Result<Vec<SampleMetrics>> {
    if recons.len() != truths.len() || ids.len() != truths.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} ids, {} reconstructions, {} truths",
            ids.len(),
            recons.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::EmptyDataset);
    }
    ids.iter()
        .zip(recons.iter().zip(truths))
        .map(|(id, (r, t))| {
            Ok(SampleMetrics {
                id: id.clone(),
                dice: dice(r, t)?,
                avdist_mm: avdist(r, t)?,
            })
        })
        .collect()
}

fn mean_of(rows: &[SampleMetrics], f: impl Fn(&SampleMetrics) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

/// Per-sample metrics of reconstructions against the truth.
pub fn evaluate(ids: &[String], recons: &[OccupancyVolume], truths: &[OccupancyVolume]) -> Result<MetricReport> {
    let per_sample = metrics(ids, recons, truths)?;
    Ok(MetricReport {
        dice: mean_of(&per_sample, |m| m.dice),
        avdist_mm: mean_of(&per_sample, |m| m.avdist_mm),
        per_sample,
        baseline: None,
    })
}

/// Scores reconstructions and the mean shape against the same truths and
/// tests (paired, one-tailed) whether the reconstructions are better.
pub fn compare_to_mean_shape(
    ids: &[String],
    recons: &[OccupancyVolume],
    truths: &[OccupancyVolume],
    mean_vol: &OccupancyVolume,
) -> Result<MetricReport> {
    let mut report = evaluate(ids, recons, truths)?;
    let means = vec![mean_vol.clone(); truths.len()];
    let base = metrics(ids, &means, truths)?;
    let dice_diff: Vec<f64> = report.per_sample.iter().zip(&base).map(|(r, b)| r.dice - b.dice).collect();
    let dist_diff: Vec<f64> = report
        .per_sample
        .iter()
        .zip(&base)
        .map(|(r, b)| b.avdist_mm - r.avdist_mm)
        .collect();
    report.baseline = Some(BaselineReport {
        dice: mean_of(&base, |m| m.dice),
        avdist_mm: mean_of(&base, |m| m.avdist_mm),
        per_sample: base,
        dice_test: paired_t_test(&dice_diff),
        avdist_test: paired_t_test(&dist_diff),
    });
    Ok(report)
}

impl MetricReport {
    /// One row per sample: `id,dice,avdist_mm[,baseline_dice,baseline_avdist_mm]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,dice,avdist_mm");
        if self.baseline.is_some() {
            out.push_str(",baseline_dice,baseline_avdist_mm");
        }
        out.push('\n');
        for (i, m) in self.per_sample.iter().enumerate() {
            write!(out, "{},{},{}", m.id, m.dice, m.avdist_mm).expect("write to string");
            if let Some(b) = &self.baseline {
                write!(out, ",{},{}", b.per_sample[i].dice, b.per_sample[i].avdist_mm).expect("write to string");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn slab(grid: GridSpec, z: usize) -> OccupancyVolume {
        OccupancyVolume::from_fn(grid, |v| v[2] == z)
    }

    #[test]
    fn dice_cases() {
        let grid = GridSpec::centered(4, 1.0).unwrap();
        let mut a = OccupancyVolume::empty(grid);
        let mut b = OccupancyVolume::empty(grid);
        assert_eq!(dice(&a, &b).unwrap(), 1.0);
        a.set([0, 0, 0], true);
        a.set([1, 0, 0], true);
        b.set([1, 0, 0], true);
        b.set([2, 0, 0], true);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &a.complement()).unwrap(), 0.0);
    }

    #[test]
    fn parallel_slabs() {
        let grid = GridSpec::centered(8, 2.5).unwrap();
        assert_eq!(avdist(&slab(grid, 1), &slab(grid, 4)).unwrap(), 7.5);
        assert_eq!(avdist(&slab(grid, 2), &slab(grid, 2)).unwrap(), 0.0);
        let empty = OccupancyVolume::empty(grid);
        assert!(matches!(avdist(&empty, &slab(grid, 2)), Err(Error::EmptyBoundary)));
    }

    #[test]
    fn mesh_distances() {
        let cube = TriMesh::cuboid([0.0; 3], [1.0; 3]);
        let (d, mean) = point_to_mesh(&[Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 1.0, 1.0)], &cube).unwrap();
        assert_eq!(d, vec![0.0, 2.0]);
        assert_eq!(mean, 1.0);
        assert_eq!(radius_limited_surface_distance(&cube, &cube, &[], None).unwrap(), 0.0);
        let far = [Point3::new(100.0, 0.0, 0.0)];
        assert!(matches!(
            radius_limited_surface_distance(&cube, &cube, &far, Some(1.0)),
            Err(Error::NoVerticesInRadius(_))
        ));
    }

    #[test]
    fn baseline_against_itself() {
        let grid = GridSpec::centered(6, 1.0).unwrap();
        let a = OccupancyVolume::from_fn(grid, |v| v.iter().all(|&c| (1..4).contains(&c)));
        let b = OccupancyVolume::from_fn(grid, |v| v.iter().all(|&c| (2..5).contains(&c)));
        let ids = vec!["a".to_string(), "b".to_string()];
        let r = compare_to_mean_shape(&ids, &[a.clone(), a.clone()], &[a.clone(), b.clone()], &a).unwrap();
        let base = r.baseline.as_ref().unwrap();
        assert_eq!(base.dice_test.t, 0.0);
        assert_eq!(r.dice, base.dice);
        let perfect = compare_to_mean_shape(&ids, &[a.clone(), b.clone()], &[a.clone(), b.clone()], &a).unwrap();
        assert_eq!(perfect.dice, 1.0);
        assert!(perfect.dice > perfect.baseline.unwrap().dice);
        assert!(r.to_csv().starts_with("id,dice,avdist_mm,baseline_dice,baseline_avdist_mm\na,1,0,1,0\n"));
    }
}
