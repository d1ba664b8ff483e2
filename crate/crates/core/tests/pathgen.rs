mod common;

use std::collections::VecDeque;

use atrium_recon::pathgen::{
    augment_path, build_graph, compose_path, dijkstra, dijkstra_with_cost, path_to_volume, AugmentConfig, PathCloud,
    PathSection, DEFAULT_ALPHAS,
};
use atrium_recon::shapegen::{generate_dataset, MvnSpec};
use atrium_recon::{Error, GridSpec, OccupancyVolume, Voxel};
use nalgebra::Point3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn adjacent(a: Voxel, b: Voxel) -> bool {
    common::sq_dist(a, b) == 1.0
}

fn hops(vol: &OccupancyVolume, s: Voxel, t: Voxel) -> usize {
    let grid = *vol.grid();
    let mut dist = vec![usize::MAX; grid.len()];
    let mut queue = VecDeque::from([s]);
    dist[grid.index(s)] = 0;
    while let Some(v) = queue.pop_front() {
        for n in grid.neighbors6(v) {
            if vol.get(n) && dist[grid.index(n)] == usize::MAX {
                dist[grid.index(n)] = dist[grid.index(v)] + 1;
                queue.push_back(n);
            }
        }
    }
    dist[grid.index(t)]
}

/// A connected interior, two of its voxels and an alpha.
fn routing_case() -> impl Strategy<Value = (OccupancyVolume, Voxel, Voxel, f64)> {
    (any::<u64>(), prop::sample::select(vec![0.0, 0.3, 1.0, 2.5, 4.0])).prop_filter_map("too small", |(seed, alpha)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [0; 3].map(|_| rng.random_range(2..=4));
        let vol = common::largest_component(&common::random_volume(&mut rng, dims, 0.65));
        let nodes: Vec<_> = vol.occupied().collect();
        if nodes.len() < 2 || nodes.len() == vol.grid().len() {
            return None;
        }
        let s = nodes[rng.random_range(0..nodes.len())];
        let t = nodes[rng.random_range(0..nodes.len())];
        Some((vol, s, t, alpha))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dijkstra_is_optimal((vol, s, t, alpha) in routing_case()) {
        let graph = build_graph(&vol, alpha).unwrap();
        let (path, cost) = dijkstra_with_cost(&graph, s, t).unwrap();
        prop_assert_eq!(cost, common::brute_shortest_cost(&graph, s, t));
        prop_assert_eq!(graph.path_cost(&path), cost);
        prop_assert_eq!(path[0], s);
        prop_assert_eq!(*path.last().unwrap(), t);
        for w in path.windows(2) {
            prop_assert!(adjacent(w[0], w[1]) && vol.get(w[0]) && vol.get(w[1]));
        }
    }

    #[test]
    fn unweighted_routes_have_fewest_hops((vol, s, t, _) in routing_case()) {
        let path = dijkstra(&build_graph(&vol, 0.0).unwrap(), s, t).unwrap();
        prop_assert_eq!(path.len() - 1, hops(&vol, s, t));
    }

    #[test]
    fn node_weights_decrease_with_depth((vol, _, _, alpha) in routing_case()) {
        prop_assume!(alpha > 0.0);
        let graph = build_graph(&vol, alpha).unwrap();
        let nodes: Vec<_> = vol.occupied().collect();
        for &a in &nodes {
            prop_assert!(graph.node_weight(a).unwrap() >= 1.0);
            for &b in &nodes {
                if graph.depth(a).unwrap() > graph.depth(b).unwrap() {
                    prop_assert!(graph.node_weight(a).unwrap() < graph.node_weight(b).unwrap());
                }
            }
        }
    }

    #[test]
    fn csv_roundtrip(coords in prop::collection::vec([-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3], 0..20)) {
        let sections = coords.iter().enumerate().map(|(i, _)| [PathSection::SeptumToLS, PathSection::Augmented][i % 2]).collect();
        let path = PathCloud { points: coords.iter().map(|c| Point3::from(*c)).collect(), sections };
        prop_assert_eq!(PathCloud::parse_csv(&path.to_csv()).unwrap(), path);
    }
}

#[test]
fn graph_rejects_bad_inputs() {
    let grid = GridSpec::centered(5, 1.0).unwrap();
    let two = OccupancyVolume::from_fn(grid, |v| v[1] == 2 && v[2] == 2 && (v[0] == 0 || v[0] == 4));
    assert!(matches!(build_graph(&two, 1.0), Err(Error::DisconnectedInterior(2))));
    let one = OccupancyVolume::from_fn(grid, |v| v == [2, 2, 2]);
    assert!(build_graph(&one, 1.0).is_err());
    let bar = OccupancyVolume::from_fn(grid, |v| v[1] == 2 && v[2] == 2);
    assert!(build_graph(&bar, -1.0).is_err());
    assert!(build_graph(&bar, f64::NAN).is_err());
    let g = build_graph(&bar, 1.0).unwrap();
    assert!(dijkstra(&g, [0, 2, 2], [0, 0, 0]).is_err());
}

#[test]
fn composed_paths_are_connected_walks_through_the_interior() {
    let grid = GridSpec::centered(24, 5.0).unwrap();
    for s in generate_dataset(&MvnSpec::default(), &grid, 4, 21).unwrap() {
        let vol = &s.atrium.volume;
        let path = compose_path(vol, &s.atrium.landmarks, DEFAULT_ALPHAS).unwrap();
        let voxels: Vec<_> = path.points.iter().map(|p| grid.voxel_containing(p).unwrap()).collect();
        assert!(voxels.iter().all(|&v| vol.get(v)));
        for w in voxels.windows(2) {
            assert!(adjacent(w[0], w[1]));
        }
        let order: Vec<usize> = path
            .sections
            .iter()
            .map(|s| PathSection::LEGS.iter().position(|l| l == s).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*order.last().unwrap(), 3);
    }
}

#[test]
fn augmentation_is_seeded_and_stays_near_the_path() {
    let grid = GridSpec::centered(24, 5.0).unwrap();
    let s = &generate_dataset(&MvnSpec::default(), &grid, 1, 3).unwrap()[0];
    let vol = &s.atrium.volume;
    let base = compose_path(vol, &s.atrium.landmarks, DEFAULT_ALPHAS).unwrap();
    let cfg = AugmentConfig::default();
    let run = |seed| augment_path(&base, vol, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let a = run(1);
    assert_eq!(a, run(1));
    assert_ne!(a, run(2));
    assert_eq!(a.points[..base.len()], base.points[..]);
    let extra = a.len() - base.len();
    assert!(extra > 0 && extra <= cfg.n * base.len());
    assert!(a.sections[base.len()..].iter().all(|&s| s == PathSection::Augmented));
    let none = AugmentConfig { n: 0, ..cfg };
    assert_eq!(augment_path(&base, vol, &none, &mut ChaCha8Rng::seed_from_u64(1)).unwrap(), base);
    assert!(augment_path(&base, vol, &AugmentConfig { s_f: 1.5, ..cfg }, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
}

#[test]
fn path_volume_counts_points_outside_the_grid() {
    let grid = GridSpec::centered(4, 1.0).unwrap();
    let path = PathCloud {
        points: vec![Point3::new(0.5, 0.5, 0.5), Point3::new(0.6, 0.6, 0.6), Point3::new(50.0, 0.0, 0.0)],
        sections: vec![PathSection::SeptumToLS; 3],
    };
    let (vol, dropped) = path_to_volume(&path, &grid);
    assert_eq!(dropped, 1);
    assert_eq!(vol.count(), 1);
}

#[test]
fn malformed_csv_is_a_format_error() {
    for text in [
        "",
        "x,y,z\n",
        "x_mm,y_mm,z_mm,section\n1,2,3\n",
        "x_mm,y_mm,z_mm,section\n1,2,nan,SeptumToLS\n",
        "x_mm,y_mm,z_mm,section\n1,2,3,Nowhere\n",
    ] {
        assert!(matches!(PathCloud::parse_csv(text), Err(Error::Format(_))), "{text:?}");
    }
}
