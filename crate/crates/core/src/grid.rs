//! Regular lattices and the voxel containers that live on them.
//!
//! Voxel data is stored x-fastest: the linear index of `[x, y, z]` is
//! `x + nx * (y + ny * z)`.

use std::collections::BTreeSet;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer voxel coordinate.
pub type Voxel = [usize; 3];

/// Face-neighbor offsets, ordered -x, +x, -y, +y, -z, +z.
pub const FACE_OFFSETS: [[isize; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

/// Isotropic lattice description: voxel counts, edge length and the world
/// position of the center of voxel `(0, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub spacing_mm: f64,
    pub origin_mm: [f64; 3],
}

impl GridSpec {
    pub fn new(dims: [usize; 3], spacing_mm: f64, origin_mm: [f64; 3]) -> Result<Self> {
        let grid = Self {
            dims,
            spacing_mm,
            origin_mm,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Cubic grid of `n` voxels per axis centered on the world origin.
    pub fn centered(n: usize, spacing_mm: f64) -> Result<Self> {
        let half = (n as f64 - 1.0) * 0.5 * spacing_mm;
        Self::new([n; 3], spacing_mm, [-half; 3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidGrid(format!(
                "all dims must be >= 2, got {:?}",
                self.dims
            )));
        }
        if !(self.spacing_mm > 0.0 && self.spacing_mm.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {}",
                self.spacing_mm
            )));
        }
        if self.origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, v: Voxel) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    #[inline]
    pub fn voxel(&self, index: usize) -> Voxel {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        [x, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn in_bounds(&self, v: [isize; 3]) -> bool {
        (0..3).all(|a| v[a] >= 0 && (v[a] as usize) < self.dims[a])
    }

    /// Neighbor of `v` shifted by `offset`, if it stays on the grid.
    #[inline]
    pub fn offset(&self, v: Voxel, offset: [isize; 3]) -> Option<Voxel> {
        let n = [
            v[0] as isize + offset[0],
            v[1] as isize + offset[1],
            v[2] as isize + offset[2],
        ];
        self.in_bounds(n)
            .then(|| [n[0] as usize, n[1] as usize, n[2] as usize])
    }

    /// On-grid face neighbors of `v`.
    pub fn neighbors6(&self, v: Voxel) -> impl Iterator<Item = Voxel> + '_ {
        FACE_OFFSETS.iter().filter_map(move |&o| self.offset(v, o))
    }

    /// World position (mm) of a voxel center.
    pub fn world_of(&self, v: Voxel) -> Point3<f64> {
        Point3::new(
            self.origin_mm[0] + v[0] as f64 * self.spacing_mm,
            self.origin_mm[1] + v[1] as f64 * self.spacing_mm,
            self.origin_mm[2] + v[2] as f64 * self.spacing_mm,
        )
    }

    /// Continuous voxel coordinates of a world point (voxel centers are integers).
    pub fn grid_coords(&self, p: &Point3<f64>) -> [f64; 3] {
        [
            (p.x - self.origin_mm[0]) / self.spacing_mm,
            (p.y - self.origin_mm[1]) / self.spacing_mm,
            (p.z - self.origin_mm[2]) / self.spacing_mm,
        ]
    }

    /// Voxel whose half-open cell `[c - s/2, c + s/2)` contains `p`.
    pub fn voxel_containing(&self, p: &Point3<f64>) -> Option<Voxel> {
        let g = self.grid_coords(p);
        let mut v = [0usize; 3];
        for a in 0..3 {
            let i = (g[a] + 0.5).floor();
            if !(i >= 0.0 && i < self.dims[a] as f64) {
                return None;
            }
            v[a] = i as usize;
        }
        Some(v)
    }

    /// Axis-aligned world extent covered by the voxel cells.
    pub fn extent_mm(&self) -> ([f64; 3], [f64; 3]) {
        let h = 0.5 * self.spacing_mm;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..3 {
            lo[a] = self.origin_mm[a] - h;
            hi[a] = self.origin_mm[a] + (self.dims[a] as f64 - 1.0) * self.spacing_mm + h;
        }
        (lo, hi)
    }

    /// True when the voxel touches a face of the grid.
    pub fn on_grid_face(&self, v: Voxel) -> bool {
        (0..3).any(|a| v[a] == 0 || v[a] + 1 == self.dims[a])
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Binary occupancy on a grid: `true` means inside or on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyVolume {
    grid: GridSpec,
    data: Vec<bool>,
}

impl OccupancyVolume {
    pub fn new(grid: GridSpec, data: Vec<bool>) -> Result<Self> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} voxels, got {}",
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn empty(grid: GridSpec) -> Self {
        Self {
            data: vec![false; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(Voxel) -> bool) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.voxel(i))).collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, v: Voxel) -> bool {
        self.data[self.grid.index(v)]
    }

    #[inline]
    pub fn set(&mut self, v: Voxel, value: bool) {
        let i = self.grid.index(v);
        self.data[i] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Occupied voxels in linear-index order.
    pub fn occupied(&self) -> impl Iterator<Item = Voxel> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| self.grid.voxel(i))
    }

    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// `{0, 1}` real field.
    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Labels of 6-connected components of occupied voxels (`None` for
    /// background); returns the labels and the number of components.
    pub fn components(&self) -> (Vec<Option<usize>>, usize) {
        let mut labels = vec![None; self.data.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || labels[start].is_some() {
                continue;
            }
            labels[start] = Some(count);
            stack.push(start);
            while let Some(i) = stack.pop() {
                for n in self.grid.neighbors6(self.grid.voxel(i)) {
                    let j = self.grid.index(n);
                    if self.data[j] && labels[j].is_none() {
                        labels[j] = Some(count);
                        stack.push(j);
                    }
                }
            }
            count += 1;
        }
        (labels, count)
    }

    pub fn component_count(&self) -> usize {
        self.components().1
    }

    /// Voxel-wise erosion with a 6-neighborhood; off-grid neighbors count as empty.
    pub fn erode6(&self) -> Self {
        Self::from_fn(self.grid, |v| {
            self.get(v)
                && FACE_OFFSETS
                    .iter()
                    .all(|&o| self.grid.offset(v, o).is_some_and(|n| self.get(n)))
        })
    }
}

/// Real-valued field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::DomainError(format!("non-finite value at index {i}")));
        }
        Ok(Self { grid, data })
    }

    pub fn filled(grid: GridSpec, value: f64) -> Self {
        Self {
            data: vec![value; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(Voxel) -> f64) -> Self {
        let data = (0..grid.len()).map(|i| f(grid.voxel(i))).collect();
        Self { grid, data }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, v: Voxel) -> f64 {
        self.data[self.grid.index(v)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Voxels with value `>= threshold`.
    pub fn threshold(&self, threshold: f64) -> OccupancyVolume {
        OccupancyVolume {
            grid: self.grid,
            data: self.data.iter().map(|&v| v >= threshold).collect(),
        }
    }
}

/// A set of voxels on a grid, iterated in lexicographic `[x, y, z]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelSet {
    pub grid: GridSpec,
    pub voxels: BTreeSet<Voxel>,
}

impl VoxelSet {
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn contains(&self, v: &Voxel) -> bool {
        self.voxels.contains(v)
    }

    pub fn to_volume(&self) -> OccupancyVolume {
        let mut vol = OccupancyVolume::empty(self.grid);
        for &v in &self.voxels {
            vol.set(v, true);
        }
        vol
    }
}
