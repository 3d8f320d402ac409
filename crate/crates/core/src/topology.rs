//! Vietoris-Rips filtration over cosine similarity and 0-dimensional
//! persistent homology.
//!
//! The filtration is swept from similarity 1 downwards: every vertex is born
//! at 1 and edges enter in decreasing similarity. A bar dies at the
//! similarity of the edge that merged its component into a larger one, so
//! the merge list is exactly the single-linkage dendrogram in similarity
//! units and a bar's lifespan is `1 - death`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{clamp_similarity, dot, EmbeddingSet};
use crate::error::{Error, Result};

/// Default similarity threshold for core extraction.
pub const DEFAULT_EPSILON: f64 = 0.9;

/// Offset above the top merge when it is also the only gap candidate.
const TOP_GAP: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityEdge {
    pub i: usize,
    pub j: usize,
    pub similarity: f64,
}

/// Complete pairwise cosine-similarity graph, edges in `(i, j)` order with `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    edges: Vec<SimilarityEdge>,
}

impl SimilarityGraph {
    /// Builds a graph from explicit edges; every unordered pair must appear
    /// exactly once.
    pub fn from_edges(n: usize, mut edges: Vec<SimilarityEdge>) -> Result<Self> {
        if edges.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::invalid(
                "edges",
                format!("{} edges for {n} vertices", edges.len()),
            ));
        }
        for e in &mut edges {
            if e.i > e.j {
                std::mem::swap(&mut e.i, &mut e.j);
            }
            if e.i == e.j || e.j >= n {
                return Err(Error::invalid(
                    "edges",
                    format!("bad edge ({}, {})", e.i, e.j),
                ));
            }
            if !e.similarity.is_finite() {
                return Err(Error::invalid("edges", "non-finite similarity"));
            }
            e.similarity = clamp_similarity(e.similarity);
        }
        edges.sort_by_key(|e| (e.i, e.j));
        if edges
            .windows(2)
            .any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j))
        {
            return Err(Error::invalid("edges", "duplicate pair"));
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[SimilarityEdge] {
        &self.edges
    }

    fn edge_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        // rows 0..i hold (n-1) + (n-2) + ... + (n-i) edges
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// Similarity of a pair; `1.0` on the diagonal.
    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            self.edges[self.edge_index(i, j)].similarity
        }
    }

    /// Mean pairwise similarity inside `members`; `1.0` for a singleton.
    pub fn mean_internal_similarity(&self, members: &[usize]) -> f64 {
        if members.len() < 2 {
            return 1.0;
        }
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                sum += self.similarity(i, j);
                pairs += 1;
            }
        }
        sum / pairs as f64
    }
}

pub fn build_similarity_graph(set: &EmbeddingSet) -> SimilarityGraph {
    let items = set.items();
    let n = items.len();
    let edges = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..n).map(move |j| SimilarityEdge {
                i,
                j,
                similarity: clamp_similarity(dot(items[i].as_slice(), items[j].as_slice())),
            })
        })
        .collect();
    SimilarityGraph { n, edges }
}

/// The 1-skeleton of the Rips complex at `epsilon`: edges with similarity ≥ `epsilon`.
pub fn vr_complex_at(graph: &SimilarityGraph, epsilon: f64) -> Result<Vec<SimilarityEdge>> {
    if !(-1.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(
            "epsilon",
            format!("{epsilon} outside [-1, 1]"),
        ));
    }
    Ok(graph
        .edges
        .iter()
        .filter(|e| e.similarity >= epsilon)
        .copied()
        .collect())
}

/// Disjoint sets with union by size; ties keep the lower root.
#[derive(Clone, Debug)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`. Returns `(survivor, absorbed)` roots,
    /// or `None` if they were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> Option<(usize, usize)> {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return None;
        }
        let (survivor, absorbed) = match self.size[ra].cmp(&self.size[rb]) {
            Ordering::Greater => (ra, rb),
            Ordering::Less => (rb, ra),
            Ordering::Equal => (ra.min(rb), ra.max(rb)),
        };
        self.parent[absorbed] = survivor;
        self.size[survivor] += self.size[absorbed];
        Some((survivor, absorbed))
    }

    /// Groups `0..n` by root; groups sorted internally and by first member.
    pub(crate) fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for v in 0..n {
            let r = self.find(v);
            by_root[r].push(v);
        }
        let mut groups: Vec<Vec<usize>> = by_root.into_iter().filter(|g| !g.is_empty()).collect();
        groups.sort_by_key(|g| g[0]);
        groups
    }
}

/// One 0-dimensional persistence bar in similarity units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bar {
    pub birth: f64,
    /// `f64::NEG_INFINITY` for the essential class.
    pub death: f64,
    pub representative: usize,
}

impl Bar {
    pub fn is_essential(&self) -> bool {
        self.death == f64::NEG_INFINITY
    }

    pub fn lifespan(&self) -> f64 {
        self.birth - self.death
    }
}

/// A merge event of the filtration: `absorbed`'s component joins `survivor`'s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Merge {
    pub epsilon: f64,
    pub survivor: usize,
    pub absorbed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceRecord {
    pub n: usize,
    /// Finite bars in merge order, then the essential bar.
    pub bars: Vec<Bar>,
    /// Merges in order of decreasing similarity.
    pub merges: Vec<Merge>,
}

impl PersistenceRecord {
    /// Components obtained by cutting the merge tree at `epsilon`
    /// (replaying every merge with similarity ≥ `epsilon`).
    pub fn components_at(&self, epsilon: f64) -> Vec<Vec<usize>> {
        let mut sets = DisjointSets::new(self.n);
        for m in self.merges.iter().take_while(|m| m.epsilon >= epsilon) {
            sets.union(m.survivor, m.absorbed);
        }
        sets.groups()
    }

    /// The finite bar with the longest lifespan (the lowest-similarity merge).
    pub fn longest_finite_bar(&self) -> Option<&Bar> {
        self.bars
            .iter()
            .filter(|b| !b.is_essential())
            .max_by(|a, b| a.lifespan().total_cmp(&b.lifespan()))
    }

    /// Text dump: a `# merges` section with one `epsilon root_a root_b` line
    /// per merge, then a `# bars` section with `birth death representative`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# merges: epsilon survivor absorbed\n");
        for m in &self.merges {
            out.push_str(&format!("{} {} {}\n", m.epsilon, m.survivor, m.absorbed));
        }
        out.push_str("# bars: birth death representative\n");
        for b in &self.bars {
            let death = if b.is_essential() {
                "-inf".to_owned()
            } else {
                b.death.to_string()
            };
            out.push_str(&format!("{} {} {}\n", b.birth, death, b.representative));
        }
        out
    }
}

/// Edges sorted by decreasing similarity, ties by `(i, j)`.
fn filtration_order(graph: &SimilarityGraph) -> Vec<SimilarityEdge> {
    let mut edges = graph.edges.clone();
    edges.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| (a.i, a.j).cmp(&(b.i, b.j)))
    });
    edges
}

pub fn persistence_0d(graph: &SimilarityGraph) -> PersistenceRecord {
    let n = graph.n;
    let mut sets = DisjointSets::new(n);
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut bars = Vec::with_capacity(n);
    for edge in filtration_order(graph) {
        if let Some((survivor, absorbed)) = sets.union(edge.i, edge.j) {
            merges.push(Merge {
                epsilon: edge.similarity,
                survivor,
                absorbed,
            });
            bars.push(Bar {
                birth: 1.0,
                death: edge.similarity,
                representative: absorbed,
            });
            if merges.len() + 1 == n {
                break;
            }
        }
    }
    if n > 0 {
        bars.push(Bar {
            birth: 1.0,
            death: f64::NEG_INFINITY,
            representative: sets.find(0),
        });
    }
    PersistenceRecord { n, bars, merges }
}

/// How the core component's threshold is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreMode {
    #[default]
    FixedThreshold,
    AutoPersistence,
    /// No filtering: the whole set is the core. Used for ablations.
    Unfiltered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub mode: CoreMode,
    pub fixed_epsilon: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            mode: CoreMode::FixedThreshold,
            fixed_epsilon: DEFAULT_EPSILON,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == CoreMode::FixedThreshold && !(0.0..=1.0).contains(&self.fixed_epsilon) {
            return Err(Error::invalid(
                "fixed_epsilon",
                format!("{} outside [0, 1]", self.fixed_epsilon),
            ));
        }
        Ok(())
    }
}

/// The filtered semantic space: indices into the source set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreComponent {
    pub member_indices: Vec<usize>,
    pub epsilon_used: f64,
    pub mode: CoreMode,
}

/// Components of the Rips 1-skeleton at `epsilon`, each sorted, ordered by first member.
pub fn components_at(graph: &SimilarityGraph, epsilon: f64) -> Vec<Vec<usize>> {
    let mut sets = DisjointSets::new(graph.n);
    for e in graph.edges.iter().filter(|e| e.similarity >= epsilon) {
        sets.union(e.i, e.j);
    }
    sets.groups()
}

/// Picks the largest component; ties by higher mean internal similarity,
/// then by lower minimum index.
fn pick_largest(graph: &SimilarityGraph, components: Vec<Vec<usize>>) -> Vec<usize> {
    components
        .into_iter()
        .map(|c| {
            let mean = graph.mean_internal_similarity(&c);
            (c, mean)
        })
        .max_by(|(a, ma), (b, mb)| {
            a.len()
                .cmp(&b.len())
                .then_with(|| ma.total_cmp(mb))
                .then_with(|| b[0].cmp(&a[0]))
        })
        .map(|(c, _)| c)
        .unwrap_or_default()
}

/// Threshold just inside the gap above the longest-lived finite bar.
pub fn auto_epsilon(record: &PersistenceRecord) -> Option<f64> {
    let lowest = record.longest_finite_bar()?.death;
    let next_higher = record
        .merges
        .iter()
        .map(|m| m.epsilon)
        .filter(|&e| e > lowest)
        .min_by(f64::total_cmp);
    Some(match next_higher {
        Some(above) => 0.5 * (lowest + above),
        None => lowest + TOP_GAP,
    })
}

pub fn largest_component_in_graph(
    graph: &SimilarityGraph,
    config: &TopologyConfig,
) -> Result<CoreComponent> {
    config.validate()?;
    if graph.n == 0 {
        return Err(Error::EmptySet);
    }
    let (members, epsilon_used) = match config.mode {
        CoreMode::Unfiltered => ((0..graph.n).collect(), -1.0),
        CoreMode::FixedThreshold => {
            let comps = components_at(graph, config.fixed_epsilon);
            (pick_largest(graph, comps), config.fixed_epsilon)
        }
        CoreMode::AutoPersistence => {
            let record = persistence_0d(graph);
            match auto_epsilon(&record) {
                Some(eps) => (pick_largest(graph, components_at(graph, eps)), eps),
                None => (vec![0], 1.0),
            }
        }
    };
    Ok(CoreComponent {
        member_indices: members,
        epsilon_used,
        mode: config.mode,
    })
}

pub fn largest_component(set: &EmbeddingSet, config: &TopologyConfig) -> Result<CoreComponent> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    largest_component_in_graph(&build_similarity_graph(set), config)
}
