use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::GridSpec;

fn toy(seed: u64) -> (DedModel, Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>) {
    let grid = GridSpec::centered(4, 1.0).unwrap();
    let model = DedModel::new(grid, &[5], seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let x = Array2::from_shape_simple_fn((3, 64), || rng.random_range(0.0..1.0));
    let t = Array2::from_shape_simple_fn((3, 64), || if rng.random_bool(0.4) { 1.0 } else { 0.0 });
    let w = Array2::from_shape_simple_fn((3, 64), || rng.random_range(1.0..15.0));
    let mask = draw_input_mask(3, 64, 0.1, &mut rng);
    (model, x, t, w, mask)
}

fn cfg(ce: f64, dice: f64, lambda: f64) -> LossConfig {
    LossConfig {
        ce_weight: ce,
        dice_weight: dice,
        lambda_swr: lambda,
        ..LossConfig::default()
    }
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..3 {
        let (model, x, t, w, mask) = toy(seed);
        for (c, weights) in [
            (cfg(1.0, 0.0, 0.0), None),
            (cfg(0.0, 1.0, 0.0), Some(&w)),
            (cfg(0.0, 0.0, 0.3), None),
            (cfg(0.4, 0.6, 0.05), Some(&w)),
        ] {
            for check in gradient_check(&model, &x, Some(&mask), &t, weights, &c, 1e-4).unwrap() {
                assert!(check.rel_error < 1e-4, "seed {seed} {c:?}: {check:?}");
            }
        }
    }
}

#[test]
fn zeroed_network_outputs_one_half() {
    let (mut model, x, ..) = toy(1);
    for s in model.params_mut().slices_mut() {
        s.fill(0.0);
    }
    let z = model.predict(&x).unwrap();
    assert!(z.iter().all(|&v| v == 0.5));
}

#[test]
fn hand_computed_forward() {
    // One hidden unit on a 2x2x2 grid, running stats at identity.
    let grid = GridSpec::new([2, 2, 2], 1.0, [0.0; 3]).unwrap();
    let mut model = DedModel::new(grid, &[1], 0).unwrap();
    model.params_mut().weights[0] = array![[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]];
    let x = array![[3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]];
    let z = model.predict(&x).unwrap();
    let h = 2.0 / (1.0 + BN_EPS).sqrt();
    let mut expect = vec![0.5; 8];
    expect[0] = 1.0 / (1.0 + (-h).exp());
    expect[1] = 1.0 / (1.0 + h.exp());
    for (a, b) in z.iter().zip(expect) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn swr_gradient_properties() {
    let (mut model, x, t, ..) = toy(2);
    let grads = |model: &DedModel, lambda: f64| {
        let c = cfg(0.0, 0.0, lambda);
        let (z, cache) = model.forward_with_mask(&x, Mode::Train, None).unwrap();
        model.backward(&cache, &z, &t, None, &c).unwrap().0.weights[0].clone()
    };
    let g1 = grads(&model, 1.0);
    let g2 = grads(&model, 2.0);
    assert!(g1.iter().any(|v| *v != 0.0));
    for (a, b) in g1.iter().zip(&g2) {
        assert!((2.0 * a - b).abs() < 1e-12);
    }
    for mut row in model.params_mut().weights[0].rows_mut() {
        let c = row[0];
        row.fill(c);
    }
    assert_eq!(swr_penalty(&model), 0.0);
    assert!(grads(&model, 1.0).iter().all(|&v| v == 0.0));
}

#[test]
fn swr_counts_forward_pairs() {
    // A ramp along x with unit steps contributes one per x-pair.
    let grid = GridSpec::new([4, 3, 2], 1.0, [0.0; 3]).unwrap();
    let mut model = DedModel::new(grid, &[1], 0).unwrap();
    let ramp = Array1::from_iter((0..24).map(|i| (i % 4) as f64));
    model.params_mut().weights[0].row_mut(0).assign(&ramp);
    assert_eq!(swr_penalty(&model), (3 * 3 * 2) as f64);
}

#[test]
fn laplacian_smoothing_lowers_swr() {
    let (mut model, ..) = toy(5);
    let before = swr_penalty(&model);
    let grid = *model.grid();
    let w = model.params().weights[0].clone();
    for (r, mut row) in model.params_mut().weights[0].rows_mut().into_iter().enumerate() {
        for v in (0..grid.len()).map(|i| grid.voxel(i)) {
            let nbrs: Vec<_> = grid.neighbors6(v).collect();
            let avg = nbrs.iter().map(|n| w[[r, grid.index(*n)]]).sum::<f64>() / nbrs.len() as f64;
            row[grid.index(v)] = avg;
        }
    }
    assert!(swr_penalty(&model) < before);
}

#[test]
fn wdice_identities() {
    let x = array![0.2, 0.0, 0.9, 1.0];
    let w = array![1.0, 2.0, 3.0, 0.5];
    assert!((wdice(x.view(), x.view(), Some(w.view())) - 1.0).abs() < 1e-15);
    let y = array![0.0, 1.0, 0.0, 0.0];
    assert_eq!(wdice(x.view(), y.view(), Some(w.view())), 0.0);
}

#[test]
fn stale_cache_rejected() {
    let (mut model, x, t, ..) = toy(3);
    let (z, cache) = model.forward_with_mask(&x, Mode::Train, None).unwrap();
    model.params_mut().b_dec[0][0] += 1.0;
    let err = model.backward(&cache, &z, &t, None, &LossConfig::default());
    assert!(matches!(err, Err(Error::StaleCache)));
}

#[test]
fn adam_steps() {
    let (model, ..) = toy(4);
    let mut params = model.params().clone();
    let start = params.clone();
    let mut grads = DedParams::zeros_like(&params);
    let mut state = AdamState::new(&params, AdamConfig::default());
    adam_step(&mut params, &grads, &mut state).unwrap();
    assert_eq!(params, start);
    assert_eq!(state.step, 1);

    for s in grads.slices_mut() {
        s.fill(0.25);
    }
    let mut state = AdamState::new(&params, AdamConfig::default());
    adam_step(&mut params, &grads, &mut state).unwrap();
    adam_step(&mut params, &grads, &mut state).unwrap();

    // Scalar reference for two steps with g = 0.25.
    let (lr, b1, b2, eps) = (1e-3, 0.9, 0.999, 1e-8);
    let (mut m, mut v, mut delta) = (0.0, 0.0, 0.0);
    for t in 1..=2 {
        m = b1 * m + (1.0 - b1) * 0.25;
        v = b2 * v + (1.0 - b2) * 0.0625;
        let mhat = m / (1.0 - f64::powi(b1, t));
        let vhat = v / (1.0 - f64::powi(b2, t));
        delta += lr * mhat / (vhat.sqrt() + eps);
    }
    for (p, s) in params.to_vec().iter().zip(start.to_vec()) {
        assert!((s - p - delta).abs() < 1e-15);
    }
    assert!((delta - 2e-3).abs() < 1e-9);
}

fn ball_pair(grid: GridSpec, r: f64, shift: f64) -> TrainPair {
    let y = OccupancyVolume::from_fn(grid, |v| {
        let p = grid.world_of(v);
        ((p.x - shift).powi(2) + p.y.powi(2) + p.z.powi(2)).sqrt() <= r
    });
    let x = OccupancyVolume::from_fn(grid, |v| y.get(v) && v[2] == grid.dims[2] / 2);
    (x, y)
}

#[test]
fn zero_epochs_returns_initialization() {
    let grid = GridSpec::centered(6, 1.0).unwrap();
    let data = vec![ball_pair(grid, 2.0, 0.0), ball_pair(grid, 1.5, 0.5)];
    let cfg = TrainConfig {
        hidden: vec![4],
        epochs: 0,
        seed: 9,
        output_prior: false,
        ..TrainConfig::default()
    };
    let (model, log) = train(&data, &[], &cfg).unwrap();
    assert!(log.is_empty());
    assert_eq!(model, DedModel::new(grid, &[4], 9).unwrap());
}

#[test]
fn training_is_deterministic_and_overfits() {
    let grid = GridSpec::centered(8, 1.0).unwrap();
    let data = vec![ball_pair(grid, 2.5, 0.0)];
    let cfg = TrainConfig {
        hidden: vec![8],
        epochs: 500,
        batch_size: 1,
        seed: 3,
        loss: LossConfig {
            input_mask_prob: 0.0,
            ..LossConfig::default()
        },
        ..TrainConfig::default()
    };
    let (a, log) = train(&data, &data, &cfg).unwrap();
    let (b, _) = train(&data, &data, &cfg).unwrap();
    assert_eq!(a.params().to_vec(), b.params().to_vec());
    let (field, bin) = infer(&a, &data[0].0).unwrap();
    assert!(field.data().iter().all(|&p| p > 0.0 && p < 1.0));
    assert_eq!(field.threshold(0.5), bin);
    let d = crate::eval::dice(&bin, &data[0].1).unwrap();
    assert!(d > 0.95, "training dice {d}");
    assert_eq!(log.last().unwrap().val_dice, Some(d));
}

#[test]
fn decoder_is_encoder_transpose() {
    let (mut model, ..) = toy(6);
    model.params_mut().weights[0][[2, 7]] = 42.0;
    assert_eq!(model.decoder_weight(0)[[7, 2]], 42.0);
    assert_eq!(model.decoder_weight(0), model.encoder_weight(0).t());
}

#[test]
fn checkpoint_roundtrip() {
    let grid = GridSpec::centered(6, 1.0).unwrap();
    let data = vec![ball_pair(grid, 2.0, 0.0), ball_pair(grid, 1.5, 0.5), ball_pair(grid, 2.2, -0.5)];
    let cfg = TrainConfig {
        hidden: vec![6, 3],
        epochs: 3,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let (model, _) = train(&data, &[], &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(&model, &cfg.loss, cfg.seed, dir.path()).unwrap();
    let (back, header) = load_checkpoint(dir.path()).unwrap();
    assert_eq!(header.layer_sizes, vec![216, 6, 3]);
    assert_eq!(back.layer_sizes(), model.layer_sizes());
    for (a, b) in back.params().to_vec().iter().zip(model.params().to_vec()) {
        assert_eq!(*a, b as f32 as f64);
    }
    let (pa, _) = infer(&model, &data[0].0).unwrap();
    let (pb, _) = infer(&back, &data[0].0).unwrap();
    for (a, b) in pa.data().iter().zip(pb.data()) {
        assert!((a - b).abs() < 1e-4);
    }
    std::fs::write(dir.path().join("model.raw"), [0u8; 8]).unwrap();
    assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format(_))));
}
