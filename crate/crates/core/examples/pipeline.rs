//! The reproducible file-based pipeline behind the `atrium` binary, driven
//! from the library on a reduced configuration.
//!
//! `cargo run --example pipeline -- [work_dir]`

use std::path::PathBuf;

use atrium_recon::pipeline::{self, Overrides, PipelineConfig, SwrPreset};

fn main() -> atrium_recon::Result<()> {
    let work = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "pipeline_run".into()));
    let mut cfg = PipelineConfig::resolve(
        None,
        &Overrides {
            grid: Some(16),
            spacing_mm: Some(7.5),
            epochs: Some(10),
            lambda_swr: Some(SwrPreset::Large.lambda()),
            ..Overrides::default()
        },
    )?;
    cfg.n_train = 60;
    cfg.n_test = 15;

    let ds = work.join("dataset");
    let manifest = pipeline::gen_shapes(&cfg, &ds)?;
    println!("{} train + {} test atria", manifest.n_train, manifest.n_test);
    let paths = pipeline::gen_paths(&cfg, &ds)?;
    println!("paths synthesized, {} failures", paths.failed.len());
    let (_, log) = pipeline::train(&cfg, &ds, &work.join("model"))?;
    println!("trained {} epochs, final swr {:.2}", log.epochs.len(), log.final_swr);
    let ids = pipeline::infer(&cfg, &work.join("model"), &ds, &work.join("recon"))?;
    println!("reconstructed {} test atria", ids.len());
    let report = pipeline::eval(&cfg, &ds, &work.join("recon"), &work.join("eval"))?;
    let base = report.baseline.expect("baseline present");
    println!("dice {:.4} (mean shape {:.4})", report.dice, base.dice);
    let mesh = pipeline::export_mesh(&work.join("recon").join(&ids[0]).join(pipeline::RECON_FIELD), 0.5, &work.join("recon.obj"))?;
    println!("exported {} faces to {}", mesh.faces().len(), work.join("recon.obj").display());
    Ok(())
}
