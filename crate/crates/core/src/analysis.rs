//! Compactness diagnostics for embedding populations.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::csv_field;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::format::load_embeddings;

/// `1 - Tr(cov)` with the `1/n` covariance, i.e. one minus the mean squared
/// distance of the members to their centroid.
pub fn compactness(set: &EmbeddingSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = set.len() as f64;
    let mut mu = vec![0.0f64; set.dim()];
    for item in set {
        for (m, &v) in mu.iter_mut().zip(item.as_slice()) {
            *m += f64::from(v);
        }
    }
    mu.iter_mut().for_each(|m| *m /= n);
    let spread: f64 = set
        .iter()
        .map(|item| {
            item.as_slice()
                .iter()
                .zip(&mu)
                .map(|(&v, m)| (f64::from(v) - m).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(1.0 - spread / n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupCompactness {
    pub group_id: String,
    pub size: usize,
    pub compactness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactnessReport {
    pub per_group: Vec<GroupCompactness>,
    pub mean_compactness: f64,
}

impl CompactnessReport {
    pub fn from_groups(groups: &[(String, EmbeddingSet)]) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::EmptySet);
        }
        let per_group = groups
            .par_iter()
            .map(|(id, set)| {
                Ok(GroupCompactness {
                    group_id: id.clone(),
                    size: set.len(),
                    compactness: compactness(set)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mean_compactness =
            per_group.iter().map(|g| g.compactness).sum::<f64>() / per_group.len() as f64;
        Ok(Self {
            per_group,
            mean_compactness,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationComparison {
    pub a: CompactnessReport,
    pub b: Option<CompactnessReport>,
}

impl PopulationComparison {
    /// `group_id,population,size,compactness` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group_id,population,size,compactness\n");
        let pops = std::iter::once(("a", &self.a)).chain(self.b.as_ref().map(|b| ("b", b)));
        for (name, report) in pops {
            for g in &report.per_group {
                out.push_str(&format!(
                    "{},{name},{},{}\n",
                    csv_field(&g.group_id),
                    g.size,
                    g.compactness
                ));
            }
        }
        out
    }
}

/// Per-group compactness of two populations (for example image vs text
/// embeddings of the same clusters).
pub fn compare_populations(
    groups_a: &[(String, EmbeddingSet)],
    groups_b: &[(String, EmbeddingSet)],
) -> Result<PopulationComparison> {
    Ok(PopulationComparison {
        a: CompactnessReport::from_groups(groups_a)?,
        b: Some(CompactnessReport::from_groups(groups_b)?),
    })
}

/// Reads a group manifest: one `group_id,path` (or tab-separated) pair per
/// line, `#` comments allowed. Relative paths resolve against the manifest's
/// directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<(String, PathBuf)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, file) = line
            .split_once('\t')
            .or_else(|| line.split_once(','))
            .ok_or_else(|| Error::MalformedRecord {
                line: lineno + 1,
                reason: "expected `group_id,path`".into(),
            })?;
        entries.push((id.trim().to_owned(), base.join(file.trim())));
    }
    Ok(entries)
}

pub fn load_groups(manifest: impl AsRef<Path>) -> Result<Vec<(String, EmbeddingSet)>> {
    read_manifest(manifest)?
        .into_iter()
        .map(|(id, p)| Ok((id, load_embeddings(p)?)))
        .collect()
}
