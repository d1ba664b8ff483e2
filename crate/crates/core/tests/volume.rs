mod common;

use atrium_recon::mesh::TriMesh;
use atrium_recon::volume::{
    boundary_distance_sq, boundary_weight_mask, extract_boundary, gaussian_kernel, gaussian_smooth, marching_cubes,
    mean_shape, signed_distance_transform, voxelize,
};
use atrium_recon::{GridSpec, OccupancyVolume, ScalarField};
use nalgebra::Point3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn volume_strategy(max: usize) -> impl Strategy<Value = OccupancyVolume> {
    (any::<u64>(), 0.1f64..0.9).prop_map(move |(seed, p)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = common::random_dims(&mut rng, max);
        common::random_volume(&mut rng, dims, p)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_matches_definition(vol in volume_strategy(7)) {
        let got: Vec<_> = extract_boundary(&vol).voxels.into_iter().collect();
        let mut expect = common::boundary(&vol);
        expect.sort();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn distance_transform_is_exact(vol in volume_strategy(8)) {
        prop_assume!(vol.count() > 0 && vol.count() < vol.grid().len());
        let oracle = common::sq_dist_to(vol.grid(), &common::boundary(&vol));
        prop_assert_eq!(boundary_distance_sq(&vol).unwrap(), oracle.clone());
        let sdt = signed_distance_transform(&vol).unwrap();
        for ((&s, &o), &inside) in sdt.data().iter().zip(&oracle).zip(vol.data()) {
            prop_assert_eq!(s, if inside { o.sqrt() } else { -o.sqrt() });
        }
    }

    #[test]
    fn weight_mask_peaks_on_boundary(vol in volume_strategy(8), alpha in 0.5f64..20.0) {
        prop_assume!(vol.count() > 0 && vol.count() < vol.grid().len());
        let w = boundary_weight_mask(&vol, alpha, 1.5).unwrap();
        let b = extract_boundary(&vol);
        let grid = *vol.grid();
        for (i, &x) in w.data().iter().enumerate() {
            prop_assert!(x > 0.0 && x <= 1.0 + alpha + 1e-12);
            if b.contains(&grid.voxel(i)) {
                prop_assert_eq!(x, 1.0 + alpha);
            }
        }
    }

    #[test]
    fn smoothing_preserves_constants(c in -5.0f64..5.0, sigma in 0.0f64..3.0) {
        let grid = GridSpec::new([5, 6, 7], 1.0, [0.0; 3]).unwrap();
        let out = gaussian_smooth(&ScalarField::filled(grid, c), sigma).unwrap();
        for &v in out.data() {
            prop_assert!((v - c).abs() < 1e-12);
        }
    }
}

#[test]
fn gaussian_kernel_is_normalized_and_symmetric() {
    for sigma in [0.5, 1.0, 1.5, 2.7] {
        let k = gaussian_kernel(sigma);
        assert_eq!(k.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }
    assert_eq!(gaussian_kernel(0.0), vec![1.0]);
}

#[test]
fn voxelized_cuboid_holds_exactly_the_enclosed_centers() {
    let grid = GridSpec::centered(10, 1.0).unwrap();
    let (lo, hi) = ([-2.3, -1.1, -3.7], [1.9, 2.6, 0.4]);
    let vol = voxelize(&TriMesh::cuboid(lo, hi), &grid).unwrap();
    let expect = OccupancyVolume::from_fn(grid, |v| {
        let p = grid.world_of(v);
        (0..3).all(|a| p[a] > lo[a] && p[a] < hi[a])
    });
    assert_eq!(vol, expect);
}

#[test]
fn voxelized_sphere_matches_center_test_away_from_the_surface() {
    let grid = GridSpec::centered(16, 1.0).unwrap();
    let r = 5.3;
    let mesh = TriMesh::icosphere(Point3::new(0.2, -0.3, 0.1), r, 4);
    let vol = voxelize(&mesh, &grid).unwrap();
    for i in 0..grid.len() {
        let v = grid.voxel(i);
        let d = (grid.world_of(v) - Point3::new(0.2, -0.3, 0.1)).norm();
        if (d - r).abs() > 0.1 {
            assert_eq!(vol.get(v), d < r, "voxel {v:?} at distance {d}");
        }
    }
}

#[test]
fn marching_cubes_sphere_is_closed_with_accurate_volume() {
    let grid = GridSpec::centered(24, 1.0).unwrap();
    let r = 8.0;
    let field = ScalarField::from_fn(grid, |v| r - grid.world_of(v).coords.norm());
    let mesh = marching_cubes(&field, 0.0).unwrap();
    assert!(mesh.is_closed());
    assert_eq!(mesh.euler_characteristic(), 2);
    let exact = 4.0 / 3.0 * std::f64::consts::PI * r.powi(3);
    assert!((mesh.signed_volume() - exact).abs() / exact < 0.02);
}

#[test]
fn marching_cubes_random_volumes_are_closed() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let dims = common::random_dims(&mut rng, 7);
        let vol = common::random_volume(&mut rng, dims, 0.5);
        // Padding keeps every surface away from the grid faces.
        let [nx, ny, nz] = dims;
        let grid = GridSpec::new([nx + 2, ny + 2, nz + 2], 1.0, [0.0; 3]).unwrap();
        let padded = OccupancyVolume::from_fn(grid, |v| {
            v.iter().all(|&c| c >= 1) && v[0] <= nx && v[1] <= ny && v[2] <= nz && vol.get([v[0] - 1, v[1] - 1, v[2] - 1])
        });
        let mesh = marching_cubes(&padded.to_field(), 0.5).unwrap();
        assert_eq!(mesh.boundary_edge_count(), 0);
        if padded.count() > 0 {
            assert!(mesh.signed_volume() > 0.0);
        }
    }
}

#[test]
fn mean_shape_of_copies_is_the_shape() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vol = common::random_volume(&mut rng, [6, 5, 4], 0.5);
    let (mean, bin) = mean_shape(&[vol.clone(), vol.clone(), vol.clone()]).unwrap();
    assert_eq!(bin, vol);
    assert!(mean.data().iter().all(|&m| m == 0.0 || m == 1.0));
}

#[test]
fn mean_shape_majority_vote() {
    let grid = GridSpec::centered(3, 1.0).unwrap();
    let a = OccupancyVolume::from_fn(grid, |v| v[0] == 0);
    let b = OccupancyVolume::from_fn(grid, |v| v[0] <= 1);
    let (mean, bin) = mean_shape(&[a, b]).unwrap();
    assert_eq!(mean.get([1, 0, 0]), 0.5);
    assert!(bin.get([1, 0, 0]) && bin.get([0, 2, 2]) && !bin.get([2, 0, 0]));
}

#[test]
fn degenerate_volumes_are_rejected() {
    let grid = GridSpec::centered(4, 1.0).unwrap();
    assert!(signed_distance_transform(&OccupancyVolume::empty(grid)).is_err());
    assert!(signed_distance_transform(&OccupancyVolume::empty(grid).complement()).is_err());
    assert!(mean_shape(&[]).is_err());
}
