use atrium_recon::ded::{
    adam_step, infer, load_checkpoint, save_checkpoint, swr_penalty, train, AdamConfig, AdamState, DedModel,
    LossConfig, TrainConfig, TrainPair,
};
use atrium_recon::{Error, GridSpec, OccupancyVolume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Balls of varying radius and center, each paired with a sparse subset of
/// its voxels as the input.
fn toy_data(n: usize, seed: u64) -> Vec<TrainPair> {
    let grid = GridSpec::centered(8, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c = nalgebra::Vector3::from_fn(|_, _| rng.random_range(-0.8..0.8));
            let r = rng.random_range(2.0..3.2);
            let shape = OccupancyVolume::from_fn(grid, |v| (grid.world_of(v).coords - c).norm() < r);
            let mut path = OccupancyVolume::empty(grid);
            for v in shape.occupied() {
                if rng.random_bool(0.3) {
                    path.set(v, true);
                }
            }
            (path, shape)
        })
        .collect()
}

fn small_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        hidden: vec![16, 8],
        epochs,
        batch_size: 4,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn assert_tied(model: &DedModel) {
    for j in 0..model.depth() {
        assert_eq!(model.decoder_weight(j), model.encoder_weight(j).t());
    }
}

#[test]
fn training_is_deterministic_and_keeps_weights_tied() {
    let data = toy_data(12, 1);
    let (a, log_a) = train(&data, &[], &small_config(5)).unwrap();
    let (b, log_b) = train(&data, &[], &small_config(5)).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(log_a, log_b);
    assert_tied(&a);
    let (c, _) = train(&data, &[], &TrainConfig { seed: 4, ..small_config(5) }).unwrap();
    assert_ne!(a.params(), c.params());
}

fn val_dice(model: &DedModel, pairs: &[TrainPair]) -> f64 {
    pairs
        .iter()
        .map(|(x, y)| atrium_recon::eval::dice(&infer(model, x).unwrap().1, y).unwrap())
        .sum::<f64>()
        / pairs.len() as f64
}

#[test]
fn training_lowers_the_loss_and_beats_the_prior() {
    let data = toy_data(96, 2);
    let val = toy_data(16, 9);
    let cfg = TrainConfig {
        hidden: vec![32],
        batch_size: 8,
        ..small_config(30)
    };
    let (prior, _) = train(&data, &[], &TrainConfig { epochs: 0, ..cfg.clone() }).unwrap();
    let (model, log) = train(&data, &val, &cfg).unwrap();
    let (first, last) = (log.first().unwrap(), log.last().unwrap());
    assert!(last.loss.total < first.loss.total);
    assert!(val_dice(&model, &val) > val_dice(&prior, &val) + 0.02);
    assert_eq!(last.val_dice.unwrap(), val_dice(&model, &val));
}

#[test]
fn swr_smooths_first_layer_rows() {
    let data = toy_data(12, 5);
    let plain = small_config(20);
    let smooth = TrainConfig {
        loss: LossConfig {
            lambda_swr: 1e-2,
            ..LossConfig::default()
        },
        ..plain.clone()
    };
    let (a, _) = train(&data, &[], &plain).unwrap();
    let (b, _) = train(&data, &[], &smooth).unwrap();
    assert!(swr_penalty(&b) < 0.5 * swr_penalty(&a));
}

#[test]
fn inference_returns_probabilities_and_their_threshold() {
    let data = toy_data(8, 6);
    let (model, _) = train(&data, &[], &small_config(3)).unwrap();
    let (field, bin) = infer(&model, &data[0].0).unwrap();
    assert!(field.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
    assert_eq!(bin, field.threshold(0.5));
    let wrong = OccupancyVolume::empty(GridSpec::centered(6, 1.0).unwrap());
    assert!(infer(&model, &wrong).is_err());
}

#[test]
fn checkpoint_roundtrip_is_stable() {
    let data = toy_data(8, 7);
    let cfg = small_config(3);
    let (model, _) = train(&data, &[], &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&model, &cfg.loss, cfg.seed, dir.path()).unwrap();
    let (loaded, header) = load_checkpoint(dir.path()).unwrap();
    assert_eq!(header.layer_sizes, model.layer_sizes());
    assert_eq!(header.seed, cfg.seed);
    assert_tied(&loaded);
    let (p, _) = infer(&model, &data[1].0).unwrap();
    let (q, _) = infer(&loaded, &data[1].0).unwrap();
    for (a, b) in p.data().iter().zip(q.data()) {
        assert!((a - b).abs() < 1e-4);
    }
    // The stored form is already single precision, so a second save is identical.
    let again = tempfile::tempdir().unwrap();
    save_checkpoint(&loaded, &cfg.loss, cfg.seed, again.path()).unwrap();
    for f in ["model.json", "model.raw"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(again.path().join(f)).unwrap());
    }
    std::fs::write(dir.path().join("model.raw"), [0u8; 7]).unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format(_))));
}

#[test]
fn adam_moves_against_the_gradient_by_at_most_lr() {
    let model = DedModel::new(GridSpec::centered(3, 1.0).unwrap(), &[4], 0).unwrap();
    let mut params = model.params().clone();
    let before = params.to_vec();
    let mut grads = params.clone();
    for s in grads.slices_mut() {
        for (i, g) in s.iter_mut().enumerate() {
            *g = if i % 2 == 0 { 0.3 } else { -2.0 };
        }
    }
    let cfg = AdamConfig::default();
    let mut state = AdamState::new(&params, cfg);
    adam_step(&mut params, &grads, &mut state).unwrap();
    for ((a, b), g) in before.iter().zip(params.to_vec()).zip(grads.to_vec()) {
        let step = b - a;
        assert!(step * g < 0.0);
        assert!(step.abs() <= cfg.lr * (1.0 + 1e-9));
    }
}

#[test]
fn bad_training_inputs_are_rejected() {
    assert!(matches!(train(&[], &[], &small_config(1)), Err(Error::EmptyDataset)));
    let mut data = toy_data(3, 8);
    let other = GridSpec::centered(6, 1.0).unwrap();
    data.push((OccupancyVolume::empty(other), OccupancyVolume::empty(other)));
    assert!(train(&data, &[], &small_config(1)).is_err());
    let bad_loss = TrainConfig {
        loss: LossConfig {
            ce_weight: 0.9,
            ..LossConfig::default()
        },
        ..small_config(1)
    };
    assert!(train(&toy_data(3, 8), &[], &bad_loss).is_err());
}
