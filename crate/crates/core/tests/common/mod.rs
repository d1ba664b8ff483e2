//! Brute-force reference implementations shared by the integration tests
//! and the acceptance suite. Each one is written from the definition, with
//! no code shared with the library beyond the data types.

#![allow(dead_code)]

use std::collections::HashMap;

use atrium_recon::pathgen::VoxelGraph;
use atrium_recon::{GridSpec, OccupancyVolume, Voxel};
use rand::Rng;

pub fn random_volume<R: Rng>(rng: &mut R, dims: [usize; 3], p: f64) -> OccupancyVolume {
    let grid = GridSpec::new(dims, 1.0, [0.0; 3]).unwrap();
    OccupancyVolume::from_fn(grid, |_| rng.random_bool(p))
}

pub fn random_dims<R: Rng>(rng: &mut R, max: usize) -> [usize; 3] {
    [0; 3].map(|_| rng.random_range(2..=max))
}

fn face_neighbors(grid: &GridSpec, v: Voxel) -> Vec<Option<Voxel>> {
    let mut out = Vec::with_capacity(6);
    for axis in 0..3 {
        for step in [-1isize, 1] {
            let c = v[axis] as isize + step;
            if c < 0 || c >= grid.dims[axis] as isize {
                out.push(None);
            } else {
                let mut n = v;
                n[axis] = c as usize;
                out.push(Some(n));
            }
        }
    }
    out
}

/// Occupied voxels with an empty or missing face neighbor, in index order.
pub fn boundary(vol: &OccupancyVolume) -> Vec<Voxel> {
    let grid = vol.grid();
    (0..grid.len())
        .map(|i| grid.voxel(i))
        .filter(|&v| vol.get(v) && face_neighbors(grid, v).iter().any(|n| n.is_none_or(|n| !vol.get(n))))
        .collect()
}

pub fn sq_dist(a: Voxel, b: Voxel) -> f64 {
    (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum()
}

/// Squared distance from every voxel to the nearest site, by exhaustion.
pub fn sq_dist_to(grid: &GridSpec, sites: &[Voxel]) -> Vec<f64> {
    (0..grid.len())
        .map(|i| {
            let v = grid.voxel(i);
            sites.iter().map(|&s| sq_dist(v, s)).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn dice(x: &OccupancyVolume, y: &OccupancyVolume) -> f64 {
    let both = x.data().iter().zip(y.data()).filter(|(a, b)| **a && **b).count();
    let total = x.count() + y.count();
    if total == 0 {
        1.0
    } else {
        2.0 * both as f64 / total as f64
    }
}

/// Mean over both directions of boundary-to-boundary nearest distances, mm.
pub fn avdist(x: &OccupancyVolume, y: &OccupancyVolume) -> f64 {
    let (bx, by) = (boundary(x), boundary(y));
    let directed = |from: &[Voxel], to: &[Voxel]| {
        let mut sum = 0.0;
        for &a in from {
            sum += to.iter().map(|&b| sq_dist(a, b)).fold(f64::INFINITY, f64::min).sqrt();
        }
        sum / from.len() as f64
    };
    0.5 * (directed(&bx, &by) + directed(&by, &bx)) * x.grid().spacing_mm
}

/// Largest 6-connected component, ties to the one holding the smallest index.
pub fn largest_component(vol: &OccupancyVolume) -> OccupancyVolume {
    let grid = *vol.grid();
    let mut label = vec![usize::MAX; grid.len()];
    let mut sizes = Vec::new();
    for start in 0..grid.len() {
        if !vol.data()[start] || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            for n in face_neighbors(&grid, grid.voxel(i)).into_iter().flatten() {
                let j = grid.index(n);
                if vol.data()[j] && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    let best = (0..sizes.len()).max_by_key(|&k| (sizes[k], usize::MAX - k));
    OccupancyVolume::new(grid, label.iter().map(|&l| Some(l) == best).collect()).unwrap()
}

/// Cheapest simple-path cost from `s` to `t` by depth-first enumeration.
/// Prefixes that reach a voxel no cheaper than an earlier prefix are cut;
/// costs accumulate from `s` exactly as a walk is summed.
pub fn brute_shortest_cost(graph: &VoxelGraph, s: Voxel, t: Voxel) -> f64 {
    fn go(
        graph: &VoxelGraph,
        v: Voxel,
        t: Voxel,
        cost: f64,
        on_path: &mut Vec<Voxel>,
        best_at: &mut HashMap<Voxel, f64>,
        best: &mut f64,
    ) {
        if best_at.get(&v).is_some_and(|&b| cost >= b) {
            return;
        }
        best_at.insert(v, cost);
        if v == t {
            *best = best.min(cost);
            return;
        }
        let neighbors: Vec<Voxel> = graph.neighbors(v).collect();
        for n in neighbors {
            if on_path.contains(&n) {
                continue;
            }
            on_path.push(n);
            go(graph, n, t, cost + graph.edge_cost(v, n), on_path, best_at, best);
            on_path.pop();
        }
    }
    let mut best = f64::INFINITY;
    go(graph, s, t, 0.0, &mut vec![s], &mut HashMap::new(), &mut best);
    best
}
