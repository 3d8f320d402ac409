//! Point-to-space similarity metrics between a query embedding and a
//! semantic space.
//!
//! Means are plain arithmetic means and are not re-normalized unless
//! [`MetricConfig::renormalize`] is set. Ties always resolve to the lowest
//! index.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::{dot, dot_f64, mean, Embedding, EmbeddingSet};
use crate::error::{Error, Result};

pub const DEFAULT_NEIGHBORHOOD: usize = 20;
pub const DEFAULT_SUBSPACE_DIMS: usize = 8;

/// Relative singular-value cutoff below which a direction counts as zero variance.
const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Set,
    Center,
    Subspace,
    #[default]
    LocalCenter,
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "set" => Ok(Self::Set),
            "center" => Ok(Self::Center),
            "subspace" => Ok(Self::Subspace),
            "local-center" | "local_center" => Ok(Self::LocalCenter),
            other => Err(Error::invalid(
                "metric",
                format!("unknown metric {other:?}"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    pub kind: MetricKind,
    /// Neighborhood size for the local-center metric.
    pub neighborhood_n: usize,
    /// Principal directions for the subspace metric; `None` = `min(8, |S|-1)`.
    pub subspace_dims: Option<usize>,
    /// Ablation only: unit-normalize means before the inner product.
    #[serde(default)]
    pub renormalize: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            kind: MetricKind::LocalCenter,
            neighborhood_n: DEFAULT_NEIGHBORHOOD,
            subspace_dims: None,
            renormalize: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neighborhood_n == 0 {
            return Err(Error::invalid("neighborhood_n", "must be at least 1"));
        }
        if self.subspace_dims == Some(0) {
            return Err(Error::invalid("subspace_dims", "must be at least 1"));
        }
        Ok(())
    }

    fn effective_dims(&self, space: &SemanticSpace) -> usize {
        let cap = space.dim().min(space.len().saturating_sub(1));
        self.subspace_dims.unwrap_or(DEFAULT_SUBSPACE_DIMS).min(cap)
    }
}

/// Principal directions of a centered space.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    /// Orthonormal rows, strongest direction first.
    pub directions: Vec<Vec<f64>>,
}

impl SubspaceBasis {
    /// Top-`dims` principal directions, or `None` when the space has no
    /// variance (all members identical).
    pub fn fit(space: &SemanticSpace, dims: usize) -> Option<Self> {
        let n = space.len();
        let d = space.dim();
        if n < 2 || dims == 0 {
            return None;
        }
        let mu = space.mean();
        let centered = DMatrix::from_fn(n, d, |r, c| {
            f64::from(space.members[r].as_slice()[c]) - mu[c]
        });
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.as_ref()?;
        let sv = &svd.singular_values;
        let largest = sv.iter().copied().fold(0.0f64, f64::max);
        if largest <= RANK_TOL {
            return None;
        }
        let mut order: Vec<usize> = (0..sv.len())
            .filter(|&i| sv[i] > RANK_TOL * largest.max(1.0))
            .collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
        order.truncate(dims);
        if order.is_empty() {
            return None;
        }
        let directions = order
            .into_iter()
            .map(|i| v_t.row(i).iter().copied().collect())
            .collect();
        Some(Self { directions })
    }

    /// `<proj(g), target>` where `proj(g)` is the projection of `g` onto the
    /// affine subspace through `mu` spanned by the basis.
    fn projected_dot(&self, g: &[f32], mu: &[f64], target: &[f64]) -> f64 {
        let mut acc: f64 = mu.iter().zip(target).map(|(a, b)| a * b).sum();
        for u in &self.directions {
            let coeff = dot_f64(g, u) - dot_f64_f64(mu, u);
            acc += coeff * dot_f64_f64(u, target);
        }
        acc
    }
}

fn dot_f64_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = dot_f64_f64(v, v).sqrt();
    if norm <= crate::embedding::ZERO_NORM {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}

/// The members of one filtered semantic space plus cached statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticSpace {
    dim: usize,
    members: Vec<Embedding>,
    mean: Vec<f64>,
    basis: Option<SubspaceBasis>,
}

impl SemanticSpace {
    pub fn new(set: &EmbeddingSet) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptySpace);
        }
        Ok(Self {
            dim: set.dim(),
            members: set.items().to_vec(),
            mean: mean(set.items(), set.dim()),
            basis: None,
        })
    }

    /// Builds the space and caches whatever `config` needs (the PCA basis).
    pub fn prepared(set: &EmbeddingSet, config: &MetricConfig) -> Result<Self> {
        let mut space = Self::new(set)?;
        if config.kind == MetricKind::Subspace {
            space.basis = SubspaceBasis::fit(&space, config.effective_dims(&space));
        }
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[Embedding] {
        &self.members
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn check(&self, g: &Embedding) -> Result<()> {
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: g.dim(),
            });
        }
        Ok(())
    }

    fn similarities(&self, g: &[f32]) -> Vec<f64> {
        self.members.iter().map(|f| dot(g, f.as_slice())).collect()
    }

    /// Scores `g` with the metric selected by `config`.
    pub fn score(&self, g: &Embedding, config: &MetricConfig) -> Result<f64> {
        match config.kind {
            MetricKind::Set => sim_point_to_set(g, self),
            MetricKind::Center => center_impl(g, self, config.renormalize),
            MetricKind::Subspace => {
                self.check(g)?;
                match &self.basis {
                    Some(b) => Ok(subspace_score(g, self, b, config.renormalize)),
                    None => center_impl(g, self, config.renormalize),
                }
            }
            MetricKind::LocalCenter => {
                local_center_impl(g, self, config.neighborhood_n, config.renormalize)
            }
        }
    }
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Similarity to the nearest member.
pub fn sim_point_to_set(g: &Embedding, space: &SemanticSpace) -> Result<f64> {
    space.check(g)?;
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    let sims = space.similarities(g.as_slice());
    Ok(sims[argmax_first(&sims)])
}

/// Inner product with the (unnormalized) centroid.
pub fn sim_point_to_center(g: &Embedding, space: &SemanticSpace) -> Result<f64> {
    center_impl(g, space, false)
}

fn center_impl(g: &Embedding, space: &SemanticSpace, renormalize: bool) -> Result<f64> {
    space.check(g)?;
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    Ok(if renormalize {
        dot_f64(g.as_slice(), &unit(&space.mean))
    } else {
        dot_f64(g.as_slice(), &space.mean)
    })
}

/// Projects `g` onto the affine principal subspace (top `dims` directions)
/// and takes the inner product of the projection with the space mean.
///
/// A space without variance (or a single member) falls back to
/// [`sim_point_to_center`]. `dims` is clamped to `min(D, |S| - 1)`.
pub fn sim_point_to_subspace(g: &Embedding, space: &SemanticSpace, dims: usize) -> Result<f64> {
    space.check(g)?;
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    if dims == 0 {
        return Err(Error::invalid("subspace_dims", "must be at least 1"));
    }
    let dims = dims.min(space.dim()).min(space.len().saturating_sub(1));
    match SubspaceBasis::fit(space, dims) {
        Some(basis) => Ok(subspace_score(g, space, &basis, false)),
        None => sim_point_to_center(g, space),
    }
}

fn subspace_score(
    g: &Embedding,
    space: &SemanticSpace,
    basis: &SubspaceBasis,
    renormalize: bool,
) -> f64 {
    if renormalize {
        basis.projected_dot(g.as_slice(), &space.mean, &unit(&space.mean))
    } else {
        basis.projected_dot(g.as_slice(), &space.mean, &space.mean)
    }
}

/// The best-matching member `f*` of `g` and its `n` nearest members
/// (by similarity to `f*`, `f*` first).
pub fn local_neighborhood(
    g: &Embedding,
    space: &SemanticSpace,
    n: usize,
) -> Result<(usize, Vec<usize>)> {
    space.check(g)?;
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    if n == 0 {
        return Err(Error::invalid("neighborhood_n", "must be at least 1"));
    }
    let sims = space.similarities(g.as_slice());
    Ok(neighborhood_from(space, &sims, n))
}

fn neighborhood_from(space: &SemanticSpace, sims_to_g: &[f64], n: usize) -> (usize, Vec<usize>) {
    let star = argmax_first(sims_to_g);
    let n = n.min(space.len());
    let mut neighbors = Vec::with_capacity(n);
    neighbors.push(star);
    if n > 1 {
        let anchor = space.members[star].as_slice();
        let mut others: Vec<(usize, f64)> = (0..space.len())
            .filter(|&j| j != star)
            .map(|j| (j, dot(anchor, space.members[j].as_slice())))
            .collect();
        let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if n - 1 < others.len() {
            others.select_nth_unstable_by(n - 1, order);
            others.truncate(n - 1);
        }
        others.sort_by(order);
        neighbors.extend(others.into_iter().map(|(j, _)| j));
    }
    (star, neighbors)
}

/// Inner product of `g` with the mean of the `n` members nearest to `g`'s
/// best match. `n` is clamped to `|S|`.
pub fn sim_point_to_local_center(g: &Embedding, space: &SemanticSpace, n: usize) -> Result<f64> {
    local_center_impl(g, space, n, false)
}

fn local_center_impl(
    g: &Embedding,
    space: &SemanticSpace,
    n: usize,
    renormalize: bool,
) -> Result<f64> {
    space.check(g)?;
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    if n == 0 {
        return Err(Error::invalid("neighborhood_n", "must be at least 1"));
    }
    let sims = space.similarities(g.as_slice());
    let (_, neighbors) = neighborhood_from(space, &sims, n);
    if renormalize {
        let m = mean(neighbors.iter().map(|&j| &space.members[j]), space.dim);
        return Ok(dot_f64(g.as_slice(), &unit(&m)));
    }
    // <g, mean(N)> = mean over N of <g, f>
    let total: f64 = neighbors.iter().map(|&j| sims[j]).sum();
    Ok(total / neighbors.len() as f64)
}
