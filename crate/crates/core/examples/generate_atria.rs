//! Samples synthetic atria from the bundled shape model and writes them out.
//!
//! `cargo run --example generate_atria -- [out_dir] [count]`

use std::path::PathBuf;

use atrium_recon::pipeline::desk_grid;
use atrium_recon::shapegen::{generate_dataset, write_sample, MvnSampler, MvnSpec};

fn main() -> atrium_recon::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "atria".into()));
    let count: usize = args.next().and_then(|n| n.parse().ok()).unwrap_or(5);

    let spec = MvnSpec::default();
    let sampler = MvnSampler::new(&spec)?;
    let grid = desk_grid();
    let samples = generate_dataset(&spec, &grid, count, 2024)?;
    println!("{:>6} {:>9} {:>10} {:>8} {:>6}", "id", "voxels", "volume_ml", "mahal", "tries");
    for s in &samples {
        let a = &s.atrium;
        println!(
            "{:>6} {:>9} {:>10.1} {:>8.2} {:>6}",
            s.id(),
            a.volume.count(),
            a.mesh.signed_volume() / 1000.0,
            sampler.mahalanobis(&a.params.to_vector()),
            s.attempts
        );
        write_sample(&out, s)?;
    }
    println!("wrote {} samples to {}", samples.len(), out.display());
    Ok(())
}
