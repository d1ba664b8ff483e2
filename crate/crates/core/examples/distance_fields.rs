//! Voxelizes a mesh, then derives the signed distance transform, the
//! boundary weight mask and an iso-surface from it.

use atrium_recon::mesh::TriMesh;
use atrium_recon::volume::{
    boundary_weight_mask, extract_boundary, gaussian_smooth, marching_cubes, signed_distance_transform, voxelize,
};
use atrium_recon::GridSpec;
use nalgebra::Point3;

fn main() -> atrium_recon::Result<()> {
    let grid = GridSpec::centered(32, 1.0)?;
    let sphere = TriMesh::icosphere(Point3::new(0.3, -0.2, 0.1), 10.0, 4);
    let vol = voxelize(&sphere, &grid)?;
    let boundary = extract_boundary(&vol);
    println!("occupied {} voxels, boundary {}", vol.count(), boundary.len());

    let sdt = signed_distance_transform(&vol)?;
    let (lo, hi) = sdt.min_max();
    println!("signed distance in [{lo:.2}, {hi:.2}] voxels");

    let mask = boundary_weight_mask(&vol, 14.0, 1.5)?;
    let center = grid.voxel_containing(&Point3::origin()).expect("origin on grid");
    let edge = *boundary.voxels.iter().next().expect("non-empty boundary");
    println!("mask weight: boundary {:.2}, center {:.2}", mask.get(edge), mask.get(center));

    let smooth = gaussian_smooth(&vol.to_field(), 1.0)?;
    let surface = marching_cubes(&smooth, 0.5)?;
    let exact = sphere.signed_volume();
    println!(
        "iso-surface: {} vertices, {} faces, closed {}, volume {:.0} mm^3 (mesh {:.0})",
        surface.vertices().len(),
        surface.faces().len(),
        surface.is_closed(),
        surface.signed_volume(),
        exact
    );
    Ok(())
}
