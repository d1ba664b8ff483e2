//! Trains a small dense encoder-decoder on in-memory synthetic data and
//! compares its reconstructions with the mean shape on held-out atria.

use atrium_recon::ded::{self, LossConfig, TrainConfig, TrainPair};
use atrium_recon::eval::compare_to_mean_shape;
use atrium_recon::pathgen::{augment_path, compose_path, path_to_volume, project_landmarks, AugmentConfig, DEFAULT_ALPHAS};
use atrium_recon::shapegen::{generate_dataset, mean_parameter_atrium, MvnSpec};
use atrium_recon::volume::mean_shape;
use atrium_recon::GridSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> atrium_recon::Result<()> {
    let spec = MvnSpec::default();
    let grid = GridSpec::centered(16, 7.5)?;
    let mean = mean_parameter_atrium(&spec, &grid)?;
    let samples = generate_dataset(&spec, &grid, 100, 11)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut pairs: Vec<TrainPair> = Vec::new();
    for s in &samples {
        let a = &s.atrium;
        let lm = project_landmarks(&mean.mesh, &mean.landmarks, &a.mesh, 0.1, 3.0, &mut rng)?;
        let path = compose_path(&a.volume, &lm, DEFAULT_ALPHAS)?;
        let path = augment_path(&path, &a.volume, &AugmentConfig::default(), &mut rng)?;
        pairs.push((path_to_volume(&path, &grid).0, a.volume.clone()));
    }
    let (train, test) = pairs.split_at(80);

    let cfg = TrainConfig {
        hidden: vec![64, 32],
        epochs: 30,
        loss: LossConfig {
            lambda_swr: 1e-5,
            ..LossConfig::default()
        },
        ..TrainConfig::default()
    };
    let (model, log) = ded::train(train, test, &cfg)?;
    for e in log.iter().step_by(10).chain(log.last()) {
        println!("epoch {:>2}: loss {:.4}, validation dice {:.4}", e.epoch, e.loss.total, e.val_dice.unwrap_or(f64::NAN));
    }

    let truths: Vec<_> = train.iter().map(|(_, y)| y.clone()).collect();
    let (_, mean_vol) = mean_shape(&truths)?;
    let ids: Vec<String> = (80..100).map(|i| format!("{i:04}")).collect();
    let mut recons = Vec::new();
    for (x, _) in test {
        recons.push(ded::infer(&model, x)?.1);
    }
    let held_out: Vec<_> = test.iter().map(|(_, y)| y.clone()).collect();
    let report = compare_to_mean_shape(&ids, &recons, &held_out, &mean_vol)?;
    let base = report.baseline.as_ref().expect("baseline present");
    println!("network:    dice {:.4}, avdist {:.2} mm", report.dice, report.avdist_mm);
    println!("mean shape: dice {:.4}, avdist {:.2} mm", base.dice, base.avdist_mm);
    println!("paired t-test on dice gain: t = {:.2}, p = {:.2e}", base.dice_test.t, base.dice_test.p_one_tailed);
    Ok(())
}
