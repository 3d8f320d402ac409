//! Input builders for the benchmarks: CLIP-sized random class spaces and
//! view stacks, seeded so every run measures the same data.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use synspace::textgen::LexiconMap;
use synspace::{
    build_catalog, ClassCatalog, ClassLexicon, EmbeddingSet, MetricConfig, TopologyConfig,
};

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn noisy(rng: &mut ChaCha8Rng, center: &[f64], spread: f64) -> Vec<f32> {
    let v = center
        .iter()
        .map(|c| c + spread * rng.sample::<f64, _>(StandardNormal) / (center.len() as f64).sqrt())
        .collect();
    unit(v).into_iter().map(|x| x as f32).collect()
}

fn direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    unit((0..dim).map(|_| rng.sample(StandardNormal)).collect())
}

/// `n` unit vectors around one random direction.
pub fn cluster(seed: u64, n: usize, dim: usize) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = direction(&mut rng, dim);
    let rows = (0..n).map(|_| noisy(&mut rng, &c, 0.4)).collect();
    EmbeddingSet::from_rows(dim, rows, None).expect("valid rows")
}

/// A catalog of `classes` classes with `texts` embeddings each, plus a stack
/// of `views` query views.
pub fn catalog_and_views(
    seed: u64,
    classes: usize,
    texts: usize,
    dim: usize,
    views: usize,
) -> (ClassCatalog, EmbeddingSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = direction(&mut rng, dim);
    let mut lexicons = LexiconMap::new();
    let mut provider = HashMap::new();
    let mut centers = Vec::new();
    for k in 0..classes {
        let own = direction(&mut rng, dim);
        let center = unit(shared.iter().zip(&own).map(|(s, o)| s + 0.3 * o).collect());
        let rows = (0..texts).map(|_| noisy(&mut rng, &center, 0.3)).collect();
        provider.insert(
            k,
            EmbeddingSet::from_rows(dim, rows, None).expect("valid rows"),
        );
        let synonyms = (1..texts)
            .map(|i| format!("class {k} name {i}"))
            .collect::<Vec<_>>();
        lexicons.insert(
            k,
            ClassLexicon::new(format!("class {k}"), "bench", synonyms, Vec::new())
                .expect("lexicon"),
        );
        centers.push(center);
    }
    let catalog = build_catalog(
        &lexicons,
        &provider,
        TopologyConfig::default(),
        MetricConfig::default(),
    )
    .expect("catalog builds");
    let target = &centers[rng.random_range(0..classes)];
    let rows = (0..views).map(|_| noisy(&mut rng, target, 0.5)).collect();
    (
        catalog,
        EmbeddingSet::from_rows(dim, rows, None).expect("valid rows"),
    )
}
