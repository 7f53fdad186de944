use knnrgg::geometry::{sample_poisson, Point, PointSet, Rect};
use knnrgg::knn::{brute_force_knn, build_knn_graph, build_knn_graph_with_cell_size};
use proptest::prelude::*;

fn lattice(side: usize) -> PointSet {
    let points = (0..side * side)
        .map(|i| Point::new((i % side) as f64, (i / side) as f64))
        .collect();
    PointSet::from_points(points, Rect::new(0.0, side as f64, 0.0, side as f64).unwrap()).unwrap()
}

#[test]
fn edge_sets_nest_in_k() {
    for seed in 0..20 {
        let ps = sample_poisson(Rect::centered_square(15.0), 1.0, seed).unwrap();
        let full = build_knn_graph(&ps, 12);
        for k in 0..12 {
            let a = full.truncated(k).edge_set();
            let b = full.truncated(k + 1).edge_set();
            assert!(a.is_subset(&b), "seed {seed}, k {k}");
            assert_eq!(full.truncated(k).edge_set(), build_knn_graph(&ps, k).edge_set());
        }
    }
}

#[test]
fn undirected_edges_symmetrise_out_lists() {
    let ps = sample_poisson(Rect::centered_square(20.0), 1.0, 4).unwrap();
    let g = build_knn_graph(&ps, 5);
    for &(u, v) in &g.undirected_edges {
        assert!(u < v);
        let out = |a: u32, b: u32| g.out_neighbours[a as usize].contains(&b);
        assert!(out(u, v) || out(v, u));
    }
    for (u, nb) in g.out_neighbours.iter().enumerate() {
        for &v in nb {
            assert!(g.has_edge(u as u32, v) && g.has_edge(v, u as u32));
        }
    }
}

#[test]
fn lattice_ties_match_oracle() {
    let ps = lattice(12);
    for k in [1, 3, 4, 8, 12, 20] {
        let fast = build_knn_graph(&ps, k);
        let slow = brute_force_knn(&ps, k);
        assert_eq!(fast.out_neighbours, slow.out_neighbours, "k = {k}");
    }
}

#[test]
fn fewer_points_than_k() {
    let ps = sample_poisson(Rect::centered_square(2.0), 1.0, 1).unwrap();
    let g = build_knn_graph(&ps, 50);
    for nb in &g.out_neighbours {
        assert_eq!(nb.len(), ps.len() - 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cell_size_does_not_matter(seed in 0u64..1000, k in 1usize..15, cell in 0.05f64..40.0) {
        let ps = sample_poisson(Rect::new(-3.0, 9.0, 0.0, 5.0).unwrap(), 2.0, seed).unwrap();
        let g = build_knn_graph_with_cell_size(&ps, k, cell);
        let oracle = brute_force_knn(&ps, k);
        prop_assert_eq!(&g.out_neighbours, &oracle.out_neighbours);
        prop_assert_eq!(&g.undirected_edges, &oracle.undirected_edges);
    }

    #[test]
    fn duplicated_points_match_oracle(
        raw in proptest::collection::vec((0u8..6, 0u8..6), 1..80),
        k in 1usize..10,
    ) {
        let pts: Vec<Point> = raw.iter().map(|&(x, y)| Point::new(f64::from(x) * 0.5, f64::from(y) * 0.5)).collect();
        let ps = PointSet::from_points(pts, Rect::new(0.0, 3.0, 0.0, 3.0).unwrap()).unwrap();
        prop_assert_eq!(build_knn_graph(&ps, k).out_neighbours, brute_force_knn(&ps, k).out_neighbours);
    }
}
