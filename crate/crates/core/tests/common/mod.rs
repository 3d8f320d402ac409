//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the algorithms under test except
//! for building inputs.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use synspace::EmbeddingSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_f64(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

pub fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Unit vector near `center` (noise of norm `spread`), as f32.
pub fn around(rng: &mut ChaCha8Rng, center: &[f64], spread: f64) -> Vec<f32> {
    let z = unit_f64(&gaussian(rng, center.len()));
    let v: Vec<f64> = center.iter().zip(&z).map(|(c, e)| c + spread * e).collect();
    unit_f64(&v).into_iter().map(|x| x as f32).collect()
}

/// `n` unit vectors drawn from a few random clusters of random tightness.
pub fn clustered_set(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingSet {
    let clusters = rng.random_range(1..=3usize);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| unit_f64(&gaussian(rng, dim)))
        .collect();
    let rows = (0..n)
        .map(|_| {
            let c = &centers[rng.random_range(0..clusters)];
            let spread = rng.random_range(0.05..1.5);
            around(rng, c, spread)
        })
        .collect();
    EmbeddingSet::from_rows(dim, rows, None).unwrap()
}

/// Plain f64 cosine of two stored rows.
pub fn cos(a: &[f32], b: &[f32]) -> f64 {
    let ab: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum();
    let aa: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum();
    let bb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum();
    (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
}

/// One agglomeration step of the oracle: the two clusters joined and the
/// linkage similarity at which they joined.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleMerge {
    pub similarity: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Single-linkage agglomeration by exhaustive search: at every step join the
/// two clusters with the largest best cross-pair similarity.
pub fn single_linkage(sim: &[Vec<f64>]) -> Vec<OracleMerge> {
    let n = sim.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let link = clusters[a]
                    .iter()
                    .flat_map(|&i| clusters[b].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| sim[i][j])
                    .fold(f64::NEG_INFINITY, f64::max);
                if best.is_none_or(|(s, _, _)| link > s) {
                    best = Some((link, a, b));
                }
            }
        }
        let (s, a, b) = best.unwrap();
        let right = clusters.remove(b);
        let left = clusters[a].clone();
        clusters[a].extend(&right);
        clusters[a].sort_unstable();
        merges.push(OracleMerge {
            similarity: s,
            left,
            right,
        });
    }
    merges
}

/// Connected components of the graph on `0..n` with an edge wherever
/// `sim >= eps`, found by depth-first search. Sorted for comparison.
pub fn threshold_components(sim: &[Vec<f64>], eps: f64) -> Vec<Vec<usize>> {
    let n = sim.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = vec![];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..n {
                if !seen[j] && j != i && sim[i][j] >= eps {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort();
    out
}

/// Components from an explicit edge list over `0..n`, sorted.
pub fn edge_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![vec![false; n]; n];
    for &(i, j) in edges {
        adj[i][j] = true;
        adj[j][i] = true;
    }
    let sim: Vec<Vec<f64>> = adj
        .iter()
        .map(|row| row.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
        .collect();
    threshold_components(&sim, 0.5)
}

pub fn normalize_partition(mut p: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for c in &mut p {
        c.sort_unstable();
    }
    p.sort();
    p
}

pub fn rows_f64(set: &EmbeddingSet) -> Vec<Vec<f64>> {
    set.iter()
        .map(|e| e.as_slice().iter().map(|&x| f64::from(x)).collect())
        .collect()
}

pub fn mean_f64(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let mut m = vec![0.0; d];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    m.iter().map(|x| x / rows.len() as f64).collect()
}

pub fn dot64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `<proj(g), mu>` with `proj` the projection onto the affine span of the top
/// `d` eigenvectors of the sample covariance, via a dense symmetric
/// eigensolver.
pub fn subspace_oracle(rows: &[Vec<f64>], g: &[f64], d: usize) -> f64 {
    let n = rows.len();
    let dim = g.len();
    let mu = mean_f64(rows);
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mu).map(|(x, m)| x - m).collect();
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] += c[a] * c[b] / n as f64;
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let centered: Vec<f64> = g.iter().zip(&mu).map(|(x, m)| x - m).collect();
    let mut proj = mu.clone();
    for &k in &order[..d] {
        let u: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let c = dot64(&centered, &u);
        for (p, ui) in proj.iter_mut().zip(&u) {
            *p += c * ui;
        }
    }
    dot64(&proj, &mu)
}

/// Trace of the explicit D×D covariance matrix (1/n normalization).
pub fn covariance_trace(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len() as f64;
    let mu = mean_f64(rows);
    let dim = mu.len();
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for r in rows {
        let c = DMatrix::from_column_slice(
            dim,
            1,
            &r.iter().zip(&mu).map(|(x, m)| x - m).collect::<Vec<_>>(),
        );
        cov += &c * c.transpose() / n;
    }
    cov.trace()
}

/// Full similarity matrix read back from the graph under test (the oracle
/// works on the same numbers, so merge heights can be compared exactly).
pub fn graph_matrix(graph: &synspace::topology::SimilarityGraph) -> Vec<Vec<f64>> {
    let n = graph.n();
    (0..n)
        .map(|i| (0..n).map(|j| graph.similarity(i, j)).collect())
        .collect()
}

/// Compares the persistence merge sequence of `set` with exhaustive
/// single-linkage agglomeration.
pub fn check_persistence(set: &EmbeddingSet) -> Result<(), String> {
    use synspace::topology::{build_similarity_graph, persistence_0d};
    let graph = build_similarity_graph(set);
    let record = persistence_0d(&graph);
    let oracle = single_linkage(&graph_matrix(&graph));
    let n = set.len();
    if record.merges.len() != oracle.len() {
        return Err(format!(
            "{} merges, oracle {}",
            record.merges.len(),
            oracle.len()
        ));
    }
    if record.bars.len() != n {
        return Err(format!("{} bars for {n} points", record.bars.len()));
    }
    // Replay the merges and check that each joins exactly the oracle's clusters.
    let mut owner: Vec<usize> = (0..n).collect();
    for (step, (m, o)) in record.merges.iter().zip(&oracle).enumerate() {
        if m.epsilon != o.similarity {
            return Err(format!(
                "step {step}: epsilon {} vs oracle {}",
                m.epsilon, o.similarity
            ));
        }
        let cluster = |root: usize| -> Vec<usize> {
            let mut c: Vec<usize> = (0..n).filter(|&i| owner[i] == owner[root]).collect();
            c.sort_unstable();
            c
        };
        let (a, b) = (cluster(m.survivor), cluster(m.absorbed));
        if a == b {
            return Err(format!("step {step}: merge inside one cluster"));
        }
        let mut got = [a.clone(), b.clone()];
        got.sort();
        let mut want = [o.left.clone(), o.right.clone()];
        want.sort();
        if got != want {
            return Err(format!("step {step}: joined {got:?}, oracle {want:?}"));
        }
        if a.len() < b.len() {
            return Err(format!("step {step}: smaller component survived"));
        }
        let absorbed_owner = owner[m.absorbed];
        let survivor_owner = owner[m.survivor];
        for o in owner.iter_mut().filter(|o| **o == absorbed_owner) {
            *o = survivor_owner;
        }
    }
    Ok(())
}

/// For every threshold in `grid`, components of the Rips 1-skeleton (found
/// by search over the returned edges) must equal the merge-tree cut.
pub fn check_dendrogram(set: &EmbeddingSet, grid: &[f64]) -> Result<(), String> {
    use synspace::topology::{
        build_similarity_graph, components_at, persistence_0d, vr_complex_at,
    };
    let graph = build_similarity_graph(set);
    let record = persistence_0d(&graph);
    let n = set.len();
    for &eps in grid {
        let edges: Vec<(usize, usize)> = vr_complex_at(&graph, eps)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|e| (e.i, e.j))
            .collect();
        let from_edges = edge_components(n, &edges);
        let from_tree = normalize_partition(record.components_at(eps));
        if from_edges != from_tree {
            return Err(format!(
                "eps {eps}: skeleton {from_edges:?} vs tree {from_tree:?}"
            ));
        }
        if normalize_partition(components_at(&graph, eps)) != from_edges {
            return Err(format!("eps {eps}: components_at disagrees"));
        }
    }
    Ok(())
}

/// 50 evenly spaced thresholds over [-1, 1] plus every merge height.
pub fn epsilon_grid() -> Vec<f64> {
    (0..50).map(|i| -1.0 + 2.0 * i as f64 / 49.0).collect()
}

/// Uniformly random unit vector.
pub fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> synspace::embedding::Embedding {
    let v = unit_f64(&gaussian(rng, dim));
    synspace::embedding::Embedding::new(v.into_iter().map(|x| x as f32).collect()).unwrap()
}

/// A catalog of `k` classes and an episode of `m` views near one of them.
///
/// Class centers share a common direction, so like real text embeddings
/// their similarities differ by a few hundredths and the softmax at the
/// default temperature is not saturated.
pub fn random_episode(
    rng: &mut ChaCha8Rng,
    k: usize,
    dim: usize,
    m: usize,
) -> (synspace::ClassCatalog, EmbeddingSet) {
    use std::collections::HashMap;
    let shared = unit_f64(&gaussian(rng, dim));
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let own = unit_f64(&gaussian(rng, dim));
            unit_f64(
                &shared
                    .iter()
                    .zip(&own)
                    .map(|(s, o)| s + 0.2 * o)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let mut lexicons = synspace::textgen::LexiconMap::new();
    let mut provider = HashMap::new();
    for (c, center) in centers.iter().enumerate() {
        let rows = (0..12).map(|_| around(rng, center, 0.05)).collect();
        provider.insert(c, EmbeddingSet::from_rows(dim, rows, None).unwrap());
        let syn = (1..12).map(|i| format!("c{c} {i}")).collect::<Vec<_>>();
        lexicons.insert(
            c,
            synspace::ClassLexicon::new(format!("c{c}"), "toy", syn, Vec::<String>::new()).unwrap(),
        );
    }
    let metric = synspace::MetricConfig {
        neighborhood_n: 5,
        ..synspace::MetricConfig::default()
    };
    let catalog = synspace::build_catalog(
        &lexicons,
        &provider,
        synspace::TopologyConfig::default(),
        metric,
    )
    .unwrap();
    let target = rng.random_range(0..k);
    let spread = rng.random_range(0.02..0.15);
    let views = (0..m)
        .map(|_| around(rng, &centers[target], spread))
        .collect();
    (catalog, EmbeddingSet::from_rows(dim, views, None).unwrap())
}

/// Small random shifts, one per class.
pub fn random_shifts(rng: &mut ChaCha8Rng, k: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| gaussian(rng, dim).into_iter().map(|x| x * scale).collect())
        .collect()
}

/// Largest gap between the analytic gradient and central differences with
/// step `h`, relative to the largest finite-difference component.
pub fn gradient_relative_error(
    episode: &synspace::tta::TtaEpisode,
    shifts: &[Vec<f64>],
    h: f64,
) -> f64 {
    let analytic = episode.gradient(shifts).unwrap();
    let mut numeric = vec![vec![0.0; shifts[0].len()]; shifts.len()];
    for k in 0..shifts.len() {
        for d in 0..shifts[0].len() {
            let mut plus = shifts.to_vec();
            plus[k][d] += h;
            let mut minus = shifts.to_vec();
            minus[k][d] -= h;
            numeric[k][d] =
                (episode.loss(&plus).unwrap() - episode.loss(&minus).unwrap()) / (2.0 * h);
        }
    }
    let scale = numeric.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    let gap = analytic
        .iter()
        .flatten()
        .zip(numeric.iter().flatten())
        .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    if scale < 1e-9 {
        gap
    } else {
        gap / scale
    }
}
