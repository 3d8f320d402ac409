mod common;

use common::*;
use rand::Rng;
use synspace::embedding::Embedding;
use synspace::metrics::{
    local_neighborhood, sim_point_to_center, sim_point_to_local_center, sim_point_to_set,
    sim_point_to_subspace,
};
use synspace::{EmbeddingSet, MetricConfig, MetricKind, SemanticSpace};

fn fixture_4x3() -> (EmbeddingSet, Embedding) {
    let rows = vec![
        vec![1.0, 0.5, 0.25],
        vec![0.75, 1.0, -0.25],
        vec![0.5, -0.25, 0.75],
        vec![1.0, 0.25, 0.5],
    ];
    (
        EmbeddingSet::from_rows(3, rows, None).unwrap(),
        Embedding::new(vec![0.75, 0.5, 0.25]).unwrap(),
    )
}

#[test]
fn subspace_matches_eigen_oracle_and_frozen_value() {
    let (set, g) = fixture_4x3();
    let space = SemanticSpace::new(&set).unwrap();
    let got = sim_point_to_subspace(&g, &space, 2).unwrap();
    let g64: Vec<f64> = g.as_slice().iter().map(|&x| f64::from(x)).collect();
    let oracle = subspace_oracle(&rows_f64(&set), &g64, 2);
    assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
    // Computed once with numpy's SVD on the same inputs.
    assert!((got - 0.861_846_083_968_633_5).abs() < 1e-12, "{got}");
}

#[test]
fn subspace_matches_oracle_on_random_spaces() {
    let mut r = rng(41);
    for _ in 0..200 {
        let n = r.random_range(3..=12);
        let dim = r.random_range(3..=8);
        let set = clustered_set(&mut r, n, dim);
        let d = r.random_range(1..n.min(dim));
        let g = random_unit(&mut r, dim);
        let space = SemanticSpace::new(&set).unwrap();
        let got = sim_point_to_subspace(&g, &space, d).unwrap();
        let g64: Vec<f64> = g.as_slice().iter().map(|&x| f64::from(x)).collect();
        let oracle = subspace_oracle(&rows_f64(&set), &g64, d);
        assert!(
            (got - oracle).abs() < 1e-9,
            "n={n} d={d}: {got} vs {oracle}"
        );
    }
}

#[test]
fn full_rank_subspace_projects_onto_affine_hull() {
    // With d = n - 1 the affine hull of n points contains every member, so a
    // member projects onto itself.
    let mut r = rng(4);
    let set = clustered_set(&mut r, 4, 6);
    let space = SemanticSpace::new(&set).unwrap();
    let mu = space.mean().to_vec();
    for f in set.iter() {
        let want: f64 = f
            .as_slice()
            .iter()
            .zip(&mu)
            .map(|(a, b)| f64::from(*a) * b)
            .sum();
        assert!((sim_point_to_subspace(f, &space, 3).unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn subspace_degenerate_space_falls_back_to_center() {
    let set = EmbeddingSet::from_rows(2, vec![vec![0.6, 0.8]; 3], None).unwrap();
    let space = SemanticSpace::new(&set).unwrap();
    let g = Embedding::new(vec![1.0, 0.0]).unwrap();
    let center = sim_point_to_center(&g, &space).unwrap();
    assert!((sim_point_to_subspace(&g, &space, 1).unwrap() - center).abs() < 1e-12);
}

#[test]
fn boundary_identities_hold() {
    let mut r = rng(1000);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = r.random_range(1..=25);
        let dim = r.random_range(2..=16);
        let set = clustered_set(&mut r, n, dim);
        let g = random_unit(&mut r, dim);
        let space = SemanticSpace::new(&set).unwrap();
        let set_score = sim_point_to_set(&g, &space).unwrap();
        let center = sim_point_to_center(&g, &space).unwrap();
        worst = worst
            .max((sim_point_to_local_center(&g, &space, 1).unwrap() - set_score).abs())
            .max((sim_point_to_local_center(&g, &space, n).unwrap() - center).abs());
    }
    assert!(worst <= 1e-9, "max deviation {worst}");
}

#[test]
fn local_center_matches_brute_force() {
    let mut r = rng(12);
    for _ in 0..300 {
        let n = r.random_range(1..=15);
        let set = clustered_set(&mut r, n, 5);
        let g = random_unit(&mut r, 5);
        let k = r.random_range(1..=n + 2);
        let rows = rows_f64(&set);
        let g64: Vec<f64> = g.as_slice().iter().map(|&x| f64::from(x)).collect();
        // f* = first index of the maximum similarity to g.
        let sims: Vec<f64> = rows.iter().map(|f| dot64(f, &g64)).collect();
        let star = (0..n).fold(0, |b, i| if sims[i] > sims[b] { i } else { b });
        let mut order: Vec<usize> = (0..n).filter(|&j| j != star).collect();
        order.sort_by(|&a, &b| {
            dot64(&rows[b], &rows[star])
                .total_cmp(&dot64(&rows[a], &rows[star]))
                .then(a.cmp(&b))
        });
        let mut hood = vec![star];
        hood.extend(order.into_iter().take(k.min(n) - 1));
        let want = hood.iter().map(|&i| sims[i]).sum::<f64>() / hood.len() as f64;

        let space = SemanticSpace::new(&set).unwrap();
        let (got_star, got_hood) = local_neighborhood(&g, &space, k).unwrap();
        assert_eq!(got_star, star);
        assert_eq!(got_hood, hood);
        let got = sim_point_to_local_center(&g, &space, k).unwrap();
        assert!((got - want).abs() < 1e-9);
    }
}

#[test]
fn dispatch_agrees_with_free_functions() {
    let (set, g) = fixture_4x3();
    let g = Embedding::new(g.normalized().unwrap().as_slice().to_vec()).unwrap();
    let set = set.normalized().unwrap();
    let space = SemanticSpace::new(&set).unwrap();
    for kind in [
        MetricKind::Set,
        MetricKind::Center,
        MetricKind::Subspace,
        MetricKind::LocalCenter,
    ] {
        let cfg = MetricConfig {
            kind,
            neighborhood_n: 2,
            subspace_dims: Some(2),
            renormalize: false,
        };
        let prepared = SemanticSpace::prepared(&set, &cfg).unwrap();
        let want = match kind {
            MetricKind::Set => sim_point_to_set(&g, &space),
            MetricKind::Center => sim_point_to_center(&g, &space),
            MetricKind::Subspace => sim_point_to_subspace(&g, &space, 2),
            MetricKind::LocalCenter => sim_point_to_local_center(&g, &space, 2),
        }
        .unwrap();
        assert!(
            (prepared.score(&g, &cfg).unwrap() - want).abs() < 1e-12,
            "{kind:?}"
        );
    }
}
