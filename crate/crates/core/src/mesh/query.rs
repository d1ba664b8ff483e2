use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TriMesh;
use crate::error::{Error, Result};

/// Index of the vertex closest to `p`; ties go to the lowest index.
pub fn nearest_vertex(mesh: &TriMesh, p: &Point3<f64>) -> Result<usize> {
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for (i, v) in mesh.vertices().iter().enumerate() {
        let d = (v - p).norm_squared();
        if d < best_d {
            best_d = d;
            best = Some(i);
        }
    }
    best.ok_or(Error::EmptyMesh)
}

/// Area-weighted unit normal at a vertex, oriented by face winding.
pub fn vertex_normal(mesh: &TriMesh, v: usize) -> Result<Vector3<f64>> {
    if v >= mesh.vertices().len() {
        return Err(Error::InvalidMesh(format!("vertex {v} out of range")));
    }
    let mut sum = Vector3::zeros();
    let mut incident = 0;
    for (fi, f) in mesh.faces().iter().enumerate() {
        if f.contains(&v) {
            sum += mesh.face_cross(fi);
            incident += 1;
        }
    }
    if incident == 0 {
        return Err(Error::IsolatedVertex(v));
    }
    let n = sum.norm();
    if n == 0.0 {
        return Err(Error::DegenerateConfiguration(format!(
            "incident face normals cancel at vertex {v}"
        )));
    }
    Ok(sum / n)
}

/// Slides from the vertex nearest `p` along direction `d`: at each step the
/// walk moves to the neighbor whose unit offset has the largest projection
/// on `d`, and stops once that projection falls below `eps`.
pub fn find_point_in_pv(mesh: &TriMesh, p: &Point3<f64>, d: &Vector3<f64>, eps: f64) -> Result<usize> {
    find_point_in_pv_traced(mesh, p, d, eps).map(|trace| *trace.last().unwrap())
}

/// Same walk as [`find_point_in_pv`], returning every visited vertex.
pub fn find_point_in_pv_traced(
    mesh: &TriMesh,
    p: &Point3<f64>,
    d: &Vector3<f64>,
    eps: f64,
) -> Result<Vec<usize>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
    }
    let mut current = nearest_vertex(mesh, p)?;
    let mut trace = vec![current];
    let verts = mesh.vertices();
    // Every accepted step raises the projection on `d`, so a walk can never
    // be longer than the vertex count.
    for _ in 0..verts.len() {
        let mut best: Option<(usize, f64)> = None;
        for &n in mesh.neighbors(current) {
            let offset = verts[n] - verts[current];
            let len = offset.norm();
            if len == 0.0 {
                continue;
            }
            let proj = offset.dot(d) / len;
            if best.is_none_or(|(_, b)| proj > b) {
                best = Some((n, proj));
            }
        }
        match best {
            Some((n, proj)) if proj >= eps => {
                current = n;
                trace.push(n);
            }
            _ => break,
        }
    }
    Ok(trace)
}

/// Picks the vertex nearest `mean_septum`, perturbs its position with an
/// isotropic Gaussian of std `sigma` (mm) and snaps back to the mesh.
pub fn sample_septum<R: Rng + ?Sized>(
    mesh: &TriMesh,
    mean_septum: &Point3<f64>,
    sigma: f64,
    rng: &mut R,
) -> Result<Point3<f64>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {sigma}")));
    }
    let center = mesh.vertices()[nearest_vertex(mesh, mean_septum)?];
    let mut jitter = Vector3::zeros();
    for c in jitter.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *c = sigma * z;
    }
    let idx = nearest_vertex(mesh, &(center + jitter))?;
    Ok(mesh.vertices()[idx])
}
