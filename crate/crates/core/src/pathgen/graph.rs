//! Distance-weighted voxel graph and Dijkstra routing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OccupancyVolume, Voxel};
use crate::volume::signed_distance_transform;

/// 6-adjacency graph over the occupied voxels of a volume. Node weights are
/// `(m_w - w_dt)^alpha`, with `w_dt` the signed distance transform and `m_w`
/// one more than its interior maximum, so every weight is positive and the
/// cheapest nodes sit deepest inside.
#[derive(Debug, Clone)]
pub struct VoxelGraph {
    grid: GridSpec,
    alpha: f64,
    /// `NaN` for non-nodes.
    node_weight: Vec<f64>,
    /// Interior distance-transform values (`NaN` for non-nodes).
    w_dt: Vec<f64>,
}

pub fn build_graph(vol: &OccupancyVolume, alpha: f64) -> Result<VoxelGraph> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
    }
    let count = vol.count();
    if count < 2 {
        return Err(Error::DegenerateVolume(format!("{count} interior voxel(s), need at least 2")));
    }
    let components = vol.component_count();
    if components != 1 {
        return Err(Error::DisconnectedInterior(components));
    }
    let sdt = signed_distance_transform(vol)?;
    let m_w = vol
        .data()
        .iter()
        .zip(sdt.data())
        .filter(|(&inside, _)| inside)
        .map(|(_, &d)| d)
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    let mut node_weight = vec![f64::NAN; vol.grid().len()];
    let mut w_dt = vec![f64::NAN; vol.grid().len()];
    for (i, (&inside, &d)) in vol.data().iter().zip(sdt.data()).enumerate() {
        if inside {
            node_weight[i] = (m_w - d).powf(alpha);
            w_dt[i] = d;
        }
    }
    Ok(VoxelGraph {
        grid: *vol.grid(),
        alpha,
        node_weight,
        w_dt,
    })
}

impl VoxelGraph {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_node(&self, v: Voxel) -> bool {
        !self.node_weight[self.grid.index(v)].is_nan()
    }

    pub fn node_weight(&self, v: Voxel) -> Option<f64> {
        let w = self.node_weight[self.grid.index(v)];
        (!w.is_nan()).then_some(w)
    }

    /// Distance-transform value of a node.
    pub fn depth(&self, v: Voxel) -> Option<f64> {
        let d = self.w_dt[self.grid.index(v)];
        (!d.is_nan()).then_some(d)
    }

    /// Cost of the edge between two adjacent nodes: the mean of their weights.
    pub fn edge_cost(&self, u: Voxel, v: Voxel) -> f64 {
        0.5 * (self.node_weight[self.grid.index(u)] + self.node_weight[self.grid.index(v)])
    }

    /// Adjacent nodes of `v`.
    pub fn neighbors(&self, v: Voxel) -> impl Iterator<Item = Voxel> + '_ {
        self.grid.neighbors6(v).filter(|&n| self.is_node(n))
    }

    /// Total cost of a walk, accumulated from its first voxel.
    pub fn path_cost(&self, path: &[Voxel]) -> f64 {
        path.windows(2).fold(0.0, |acc, w| acc + self.edge_cost(w[0], w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    voxel: Voxel,
}

impl Eq for Entry {}

impl Ord for Entry {
    /// Reversed so that `BinaryHeap` pops the cheapest, then
    /// lexicographically smallest, voxel first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.voxel.cmp(&self.voxel))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cheapest path from `s` to `t`, both endpoints included, with its cost.
/// Equal-cost frontier entries are expanded in lexicographic voxel order and
/// a predecessor is only replaced by a strictly cheaper one.
pub fn dijkstra_with_cost(graph: &VoxelGraph, s: Voxel, t: Voxel) -> Result<(Vec<Voxel>, f64)> {
    for v in [s, t] {
        if !graph.grid.in_bounds(v.map(|c| c as isize)) || !graph.is_node(v) {
            return Err(Error::InvalidConfig(format!("voxel {v:?} is not a graph node")));
        }
    }
    let grid = graph.grid;
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut prev = vec![usize::MAX; grid.len()];
    let mut done = vec![false; grid.len()];
    let mut heap = BinaryHeap::new();
    dist[grid.index(s)] = 0.0;
    heap.push(Entry { cost: 0.0, voxel: s });
    while let Some(Entry { cost, voxel }) = heap.pop() {
        let u = grid.index(voxel);
        if done[u] {
            continue;
        }
        done[u] = true;
        if voxel == t {
            break;
        }
        for n in graph.neighbors(voxel) {
            let j = grid.index(n);
            if done[j] {
                continue;
            }
            let c = cost + graph.edge_cost(voxel, n);
            if c < dist[j] {
                dist[j] = c;
                prev[j] = u;
                heap.push(Entry { cost: c, voxel: n });
            }
        }
    }
    let ti = grid.index(t);
    if !done[ti] {
        return Err(Error::Unreachable(t));
    }
    let mut path = vec![t];
    let mut i = ti;
    while i != grid.index(s) {
        i = prev[i];
        path.push(grid.voxel(i));
    }
    path.reverse();
    Ok((path, dist[ti]))
}

pub fn dijkstra(graph: &VoxelGraph, s: Voxel, t: Voxel) -> Result<Vec<Voxel>> {
    dijkstra_with_cost(graph, s, t).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corridor() -> OccupancyVolume {
        let grid = GridSpec::new([8, 3, 3], 1.0, [0.0; 3]).unwrap();
        OccupancyVolume::from_fn(grid, |v| v[1] == 1 && v[2] == 1 && (1..=6).contains(&v[0]))
    }

    #[test]
    fn straight_corridor() {
        let vol = corridor();
        let g = build_graph(&vol, 1.0).unwrap();
        let (path, cost) = dijkstra_with_cost(&g, [1, 1, 1], [6, 1, 1]).unwrap();
        assert_eq!(path, (1..=6).map(|x| [x, 1, 1]).collect::<Vec<_>>());
        // Every corridor voxel is boundary: w_dt = 0, m_w = 1, weights 1.
        assert_eq!(cost, 5.0);
        let (single, c) = dijkstra_with_cost(&g, [3, 1, 1], [3, 1, 1]).unwrap();
        assert_eq!(single, vec![[3, 1, 1]]);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn alpha_zero_weights_are_one() {
        let grid = GridSpec::centered(9, 1.0).unwrap();
        let ball = OccupancyVolume::from_fn(grid, |v| grid.world_of(v).coords.norm() <= 3.0);
        let g = build_graph(&ball, 0.0).unwrap();
        for v in ball.occupied() {
            assert_eq!(g.node_weight(v), Some(1.0));
        }
        let g1 = build_graph(&ball, 1.0).unwrap();
        let center = g1.node_weight([4, 4, 4]).unwrap();
        assert!(ball.occupied().all(|v| g1.node_weight(v).unwrap() >= center));
        assert_eq!(center, 1.0);
    }

    #[test]
    fn disconnected_and_unreachable() {
        let grid = GridSpec::centered(6, 1.0).unwrap();
        let mut vol = OccupancyVolume::empty(grid);
        vol.set([1, 1, 1], true);
        vol.set([4, 4, 4], true);
        assert!(matches!(build_graph(&vol, 1.0), Err(Error::DisconnectedInterior(2))));
    }
}
