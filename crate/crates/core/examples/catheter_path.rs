//! Synthesizes a catheter path through one atrium: the mean-shape landmarks
//! are projected onto the atrium surface, routed through the interior and
//! augmented with jitter.
//!
//! `cargo run --example catheter_path -- [path.csv]`

use std::collections::BTreeMap;

use atrium_recon::pathgen::{augment_path, compose_path, path_to_volume, project_landmarks, AugmentConfig, DEFAULT_ALPHAS};
use atrium_recon::pipeline::desk_grid;
use atrium_recon::shapegen::{generate_dataset, mean_parameter_atrium, MvnSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> atrium_recon::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "path.csv".into());
    let spec = MvnSpec::default();
    let grid = desk_grid();
    let mean = mean_parameter_atrium(&spec, &grid)?;
    let atrium = generate_dataset(&spec, &grid, 1, 7)?.remove(0).atrium;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let lm = project_landmarks(&mean.mesh, &mean.landmarks, &atrium.mesh, 0.1, 3.0, &mut rng)?;
    for (i, (p, t)) in lm.pv.iter().zip(&atrium.landmarks.pv).enumerate() {
        println!("PV {i}: projected {:.1} mm from the true ostium", (p - t).norm());
    }

    let path = compose_path(&atrium.volume, &lm, DEFAULT_ALPHAS)?;
    let mut legs: BTreeMap<&str, usize> = BTreeMap::new();
    for s in &path.sections {
        *legs.entry(s.as_str()).or_default() += 1;
    }
    println!("route: {legs:?}");

    let augmented = augment_path(&path, &atrium.volume, &AugmentConfig::default(), &mut rng)?;
    let (vol, _) = path_to_volume(&augmented, &grid);
    println!(
        "{} route points, {} after augmentation, {} of {} atrium voxels touched",
        path.len(),
        augmented.len(),
        vol.count(),
        atrium.volume.count()
    );
    augmented.write_csv(&out)?;
    println!("wrote {out}");
    Ok(())
}
