//! Sanity check of the optimizer and losses: a network fed one atrium for
//! many epochs must reproduce it almost exactly.

use atrium_recon::ded::{self, LossConfig, TrainConfig};
use atrium_recon::eval::dice;
use atrium_recon::shapegen::{generate_dataset, MvnSpec};
use atrium_recon::GridSpec;

fn main() -> atrium_recon::Result<()> {
    let grid = GridSpec::centered(12, 10.0)?;
    let shape = generate_dataset(&MvnSpec::default(), &grid, 1, 3)?.remove(0).atrium.volume;
    let input = atrium_recon::OccupancyVolume::from_fn(grid, |v| shape.get(v) && (v[0] + v[1] + v[2]) % 5 == 0);
    let cfg = TrainConfig {
        hidden: vec![8],
        epochs: 500,
        batch_size: 1,
        output_prior: false,
        loss: LossConfig {
            input_mask_prob: 0.0,
            ..LossConfig::default()
        },
        ..TrainConfig::default()
    };
    let data = [(input.clone(), shape.clone())];
    let (model, log) = ded::train(&data, &[], &cfg)?;
    let (_, recon) = ded::infer(&model, &input)?;
    println!("final loss {:.4}", log.last().expect("epochs ran").loss.total);
    println!("training dice {:.4}", dice(&recon, &shape)?);
    Ok(())
}
