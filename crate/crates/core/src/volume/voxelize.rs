//! Closed-mesh voxelization by +x parity ray casting.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, OccupancyVolume};
use crate::mesh::TriMesh;

/// Marks every voxel whose center is inside or on the closed mesh.
///
/// Rays start at the voxel center and run along +x. Rays grazing an edge or
/// vertex are resolved by perturbing the ray origin by `(0, e, e^2)`, with
/// every edge evaluated in a canonical vertex order so that the two faces
/// sharing it always agree. Centers lying exactly on a face are inside.
pub fn voxelize(mesh: &TriMesh, grid: &GridSpec) -> Result<OccupancyVolume> {
    grid.validate()?;
    let open = mesh
        .edge_face_counts()
        .values()
        .filter(|&&c| c != 2)
        .count();
    if open > 0 || mesh.faces().is_empty() {
        return Err(Error::OpenMesh(open));
    }
    let (lo, hi) = grid.extent_mm();
    for v in mesh.vertices() {
        for a in 0..3 {
            if v[a] < lo[a] || v[a] > hi[a] {
                return Err(Error::OutOfExtent(format!(
                    "vertex {:?} outside [{lo:?}, {hi:?}]",
                    [v.x, v.y, v.z]
                )));
            }
        }
    }

    let verts = mesh.vertices();
    let tris: Vec<[Point3<f64>; 3]> = mesh
        .faces()
        .iter()
        .map(|f| [verts[f[0]], verts[f[1]], verts[f[2]]])
        .collect();
    let bounds: Vec<([f64; 3], [f64; 3])> = tris
        .iter()
        .map(|t| {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for p in t {
                for a in 0..3 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            (lo, hi)
        })
        .collect();

    let [nx, ny, nz] = grid.dims;
    let mut vol = OccupancyVolume::empty(*grid);
    let mut candidates = Vec::new();
    let mut crossings = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            let c = grid.world_of([0, y, z]);
            let (py, pz) = (c.y, c.z);
            candidates.clear();
            candidates.extend((0..tris.len()).filter(|&i| {
                let (l, h) = &bounds[i];
                py >= l[1] && py <= h[1] && pz >= l[2] && pz <= h[2]
            }));
            crossings.clear();
            for &i in &candidates {
                if let Some(x) = ray_hit(&tris[i], py, pz) {
                    crossings.push(x);
                }
            }
            for x in 0..nx {
                let p = grid.world_of([x, y, z]);
                let on_surface = candidates.iter().any(|&i| {
                    let (l, h) = &bounds[i];
                    p.x >= l[0] && p.x <= h[0] && point_on_triangle(&tris[i], &p)
                });
                let ahead = crossings.iter().filter(|&&cx| cx > p.x).count();
                let touching = crossings.contains(&p.x);
                if on_surface || touching || ahead % 2 == 1 {
                    vol.set([x, y, z], true);
                }
            }
        }
    }
    Ok(vol)
}

/// Sign of the yz-orientation of `p` against directed edge `a -> b`,
/// resolved by the symbolic perturbation when exactly zero.
fn edge_side(a: &Point3<f64>, b: &Point3<f64>, py: f64, pz: f64) -> f64 {
    // Canonical order: the same edge seen from either face yields exactly
    // negated values.
    let flip = (a.y, a.z, a.x) > (b.y, b.z, b.x);
    let (a, b) = if flip { (b, a) } else { (a, b) };
    let dy = b.y - a.y;
    let dz = b.z - a.z;
    let mut s = dy * (pz - a.z) - dz * (py - a.y);
    if s == 0.0 {
        s = if dz != 0.0 { -dz } else { dy };
    }
    let s = s.signum();
    if flip {
        -s
    } else {
        s
    }
}

/// x coordinate where the (perturbed) +x line through `(py, pz)` meets the
/// triangle, if it does.
fn ray_hit(t: &[Point3<f64>; 3], py: f64, pz: f64) -> Option<f64> {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    if n.x == 0.0 {
        return None;
    }
    let s0 = edge_side(&t[0], &t[1], py, pz);
    let s1 = edge_side(&t[1], &t[2], py, pz);
    let s2 = edge_side(&t[2], &t[0], py, pz);
    if s0 != s1 || s1 != s2 {
        return None;
    }
    Some(t[0].x - (n.y * (py - t[0].y) + n.z * (pz - t[0].z)) / n.x)
}

fn point_on_triangle(t: &[Point3<f64>; 3], p: &Point3<f64>) -> bool {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
    if n.dot(&(p - t[0])) != 0.0 {
        return false;
    }
    // Drop the dominant normal axis and test closed containment in 2D.
    let drop = n.iamax();
    let (u, v) = match drop {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    };
    let orient = |a: &Point3<f64>, b: &Point3<f64>| (b[u] - a[u]) * (p[v] - a[v]) - (b[v] - a[v]) * (p[u] - a[u]);
    let o = [orient(&t[0], &t[1]), orient(&t[1], &t[2]), orient(&t[2], &t[0])];
    o.iter().all(|&x| x >= 0.0) || o.iter().all(|&x| x <= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_on_voxel_centers() {
        let grid = GridSpec::new([8, 8, 8], 1.0, [0.0; 3]).unwrap();
        let mesh = TriMesh::cuboid([2.0; 3], [5.0; 3]);
        let vol = voxelize(&mesh, &grid).unwrap();
        assert_eq!(vol.count(), 64);
        for v in vol.occupied() {
            assert!(v.iter().all(|&c| (2..=5).contains(&c)));
        }
    }

    #[test]
    fn open_mesh_rejected() {
        let grid = GridSpec::new([8, 8, 8], 1.0, [0.0; 3]).unwrap();
        let mesh = TriMesh::cuboid([2.0; 3], [5.0; 3]);
        let mut faces = mesh.faces().to_vec();
        faces.pop();
        let open = TriMesh::new(mesh.vertices().to_vec(), faces).unwrap();
        assert!(matches!(voxelize(&open, &grid), Err(Error::OpenMesh(_))));
    }

    #[test]
    fn out_of_extent() {
        let grid = GridSpec::new([4, 4, 4], 1.0, [0.0; 3]).unwrap();
        let mesh = TriMesh::cuboid([1.0; 3], [5.0; 3]);
        assert!(matches!(voxelize(&mesh, &grid), Err(Error::OutOfExtent(_))));
    }
}
