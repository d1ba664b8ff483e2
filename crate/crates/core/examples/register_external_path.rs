//! Rigidly registers an externally recorded path onto the mean-shape frame
//! using its four PV ostia.

use atrium_recon::mesh::rigid_register;
use atrium_recon::pipeline::desk_grid;
use atrium_recon::shapegen::{mean_parameter_atrium, MvnSpec};
use nalgebra::{Rotation3, Vector3};

fn main() -> atrium_recon::Result<()> {
    let mean = mean_parameter_atrium(&MvnSpec::default(), &desk_grid())?;
    // A recording in a scanner frame: rotated 25 degrees and shifted.
    let pose = Rotation3::from_euler_angles(0.2, -0.3, 0.25);
    let shift = Vector3::new(12.0, -40.0, 7.5);
    let recorded = mean.landmarks.map(|p| pose * p + shift);

    let t = rigid_register(&recorded.pv, &mean.landmarks.pv)?;
    println!("rotation deviation from identity {:.3}", t.rotation_deviation());
    println!("residual {:.2e} mm^2", t.residual(&recorded.pv, &mean.landmarks.pv));
    let septum_error = (t.apply(&recorded.septum) - mean.landmarks.septum).norm();
    println!("septum lands {septum_error:.2e} mm from the mean-shape septum");
    Ok(())
}
