use std::collections::BTreeSet;

use knnrgg::bounds::{type_a_probability_bound, type_b_probability_bound};
use knnrgg::configuration::{
    certified_disc_seed, is_feasible, is_type_a_default, is_type_b, label_configuration, sample_consistent,
    Certifier, CellId, Configuration, Label, Tiling,
};
use knnrgg::experiment::wilson_interval;
use knnrgg::geometry::{poisson_variate, sample_poisson};
use knnrgg::knn::build_knn_graph;
use knnrgg::rng::{derive_seed, derived_stream};
use rand::Rng as _;

fn raise(config: &mut Configuration, id: CellId, rng: &mut knnrgg::rng::Rng) {
    let (k, n) = (config.tiling.k, config.tiling.n);
    let current = match config.labels[id] {
        Label::Finite(j) => j,
        Label::Infinite => return,
    };
    if rng.random_bool(0.2) {
        config.labels[id] = Label::Infinite;
        return;
    }
    let up: Vec<u32> = (current + 1..=3 * n).filter(|&j| is_feasible(Label::Finite(j), k, n)).collect();
    if !up.is_empty() {
        config.labels[id] = Label::Finite(up[rng.random_range(0..up.len())]);
    }
}

/// Graph edges between cells of `a` and cells of `b` in one consistent sample.
fn crossing_edges(config: &Configuration, a: &BTreeSet<CellId>, b: &BTreeSet<CellId>, seed: u64) -> usize {
    let mut rng = derived_stream(seed, "consistent", 0);
    let ps = sample_consistent(config, &mut rng).unwrap();
    let t = &config.tiling;
    let g = build_knn_graph(&ps, t.k as usize);
    g.undirected_edges
        .iter()
        .filter(|&&(u, v)| {
            let (cu, cv) = (t.cell_of(&ps.points[u as usize]), t.cell_of(&ps.points[v as usize]));
            (a.contains(&cu) && b.contains(&cv)) || (a.contains(&cv) && b.contains(&cu))
        })
        .count()
}

#[test]
fn exterior_augmentation_keeps_certified_pairs() {
    let tiling = Tiling::new(8, 4, 64).unwrap();
    let (seed_config, t_cells, _) = certified_disc_seed(&tiling).unwrap();
    let cert = Certifier::new(tiling);
    let reaches = cert.reaches(&seed_config);
    let mut rng = derived_stream(9, "augment", 0);
    let outside: Vec<CellId> = seed_config.non_empty_cells().filter(|c| !t_cells.contains(c)).collect();
    let mut checked = 0;
    for round in 0..40u64 {
        let s1 = *t_cells.iter().nth(rng.random_range(0..t_cells.len())).unwrap();
        let s2 = outside[rng.random_range(0..outside.len())];
        assert!(cert.no_edge(&seed_config, s1, s2));
        let ball = reaches[s1] + 2.5 * std::f64::consts::SQRT_2;
        let mut augmented = seed_config.clone();
        for id in 0..tiling.cell_count() {
            if tiling.center_distance(s1, id) / tiling.ell() > ball && rng.random_bool(0.3) {
                raise(&mut augmented, id, &mut rng);
            }
        }
        assert!(cert.no_edge(&augmented, s1, s2), "round {round}: pair ({s1}, {s2})");
        let (a, b) = (BTreeSet::from([s1]), BTreeSet::from([s2]));
        assert_eq!(crossing_edges(&augmented, &a, &b, round), 0, "round {round}");
        checked += 1;
    }
    assert_eq!(checked, 40);
}

#[test]
fn bad_configuration_frequencies_respect_bounds() {
    let eps = 0.4;
    for (m, n, k) in [(2, 8, 300), (2, 8, 1024)] {
        let tiling = Tiling::new(m, n, k).unwrap();
        let trials = 300u64;
        let (mut a, mut b) = (0u64, 0u64);
        for t in 0..trials {
            let ps = sample_poisson(tiling.region(), 1.0, derive_seed(4, "bad", t)).unwrap();
            let c = label_configuration(&ps, &tiling);
            a += u64::from(is_type_a_default(&c));
            b += u64::from(is_type_b(&c, eps));
        }
        let bound_a = type_a_probability_bound(m, n, k);
        let bound_b = type_b_probability_bound(m, n, k, eps);
        assert!(bound_a < 1.0, "type A bound is trivial at k = {k}");
        assert!(a as f64 / trials as f64 <= bound_a, "k={k}: {a}/{trials} vs {bound_a}");
        assert!((a + b) as f64 / trials as f64 <= bound_a + bound_b, "k={k}");
    }
}

#[test]
fn wilson_interval_covers_void_probability() {
    let area: f64 = 8.0;
    let truth = (-area).exp();
    let trials = 20_000u64;
    let covered = (0..200u64)
        .filter(|&rep| {
            let mut rng = derived_stream(17, "void", rep);
            let hits = (0..trials).filter(|_| poisson_variate(area, &mut rng) == 0).count() as u64;
            let (lo, hi) = wilson_interval(hits, trials);
            lo <= truth && truth <= hi
        })
        .count();
    assert!(covered >= 180, "coverage {covered}/200");
}
