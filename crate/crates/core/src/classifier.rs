//! Zero-shot prediction over a catalog of per-class semantic spaces.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::{Embedding, EmbeddingSet};
use crate::error::{Error, Result};
use crate::format::{encode, load_embeddings, write_atomic};
use crate::metrics::{MetricConfig, SemanticSpace};
use crate::textgen::{combine, ClassLexicon, LexiconMap};
use crate::topology::{largest_component, CoreComponent, TopologyConfig};

pub const CATALOG_FORMAT: u32 = 1;

/// Supplies the text embeddings of a class, in the order of its rendered texts.
pub trait EmbeddingProvider: Sync {
    fn embeddings(
        &self,
        class_id: usize,
        lexicon: &ClassLexicon,
        texts: &[String],
    ) -> Result<Option<EmbeddingSet>>;
}

/// Reads `<dir>/<class_id>.s3em`.
#[derive(Clone, Debug)]
pub struct DirectoryProvider {
    pub dir: PathBuf,
}

impl DirectoryProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, class_id: usize) -> PathBuf {
        self.dir.join(format!("{class_id}.s3em"))
    }
}

impl EmbeddingProvider for DirectoryProvider {
    fn embeddings(
        &self,
        class_id: usize,
        _: &ClassLexicon,
        _: &[String],
    ) -> Result<Option<EmbeddingSet>> {
        let path = self.path_for(class_id);
        if !path.exists() {
            return Ok(None);
        }
        load_embeddings(path).map(Some)
    }
}

impl EmbeddingProvider for HashMap<usize, EmbeddingSet> {
    fn embeddings(
        &self,
        class_id: usize,
        _: &ClassLexicon,
        _: &[String],
    ) -> Result<Option<EmbeddingSet>> {
        Ok(self.get(&class_id).cloned())
    }
}

/// One class of the catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class_id: usize,
    pub name: String,
    pub lexicon: ClassLexicon,
    pub texts: Vec<String>,
    /// Unit-normalized text embeddings, parallel to `texts`.
    pub embeddings: EmbeddingSet,
    pub core: CoreComponent,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    format: u32,
    input_hash: String,
    dim: usize,
    topology: TopologyConfig,
    metric: MetricConfig,
    classes: Vec<ClassEntry>,
}

/// Immutable set of classes with their filtered semantic spaces.
#[derive(Clone, Debug)]
pub struct ClassCatalog {
    dim: usize,
    topology: TopologyConfig,
    metric: MetricConfig,
    input_hash: String,
    classes: Vec<ClassEntry>,
    spaces: Vec<SemanticSpace>,
}

/// Result of scoring one query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_id: usize,
    pub scores: Vec<f64>,
}

/// Index of the maximum; ties resolve to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn build_catalog(
    lexicons: &LexiconMap,
    provider: &dyn EmbeddingProvider,
    topology: TopologyConfig,
    metric: MetricConfig,
) -> Result<ClassCatalog> {
    topology.validate()?;
    metric.validate()?;
    if lexicons.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    for (pos, &id) in lexicons.keys().enumerate() {
        if id != pos {
            return Err(Error::invalid(
                "lexicons",
                format!("class ids must be contiguous from 0, found {id} at position {pos}"),
            ));
        }
    }
    let built: Vec<(ClassEntry, Vec<u8>)> = lexicons
        .par_iter()
        .map(|(&class_id, lexicon)| {
            let texts = combine(class_id, lexicon)?.texts;
            let raw = provider
                .embeddings(class_id, lexicon, &texts)?
                .ok_or_else(|| Error::MissingEmbeddings {
                    class_id,
                    name: lexicon.class_name.clone(),
                })?;
            if raw.is_empty() {
                return Err(Error::MissingEmbeddings {
                    class_id,
                    name: lexicon.class_name.clone(),
                });
            }
            if raw.len() != texts.len() {
                return Err(Error::TextEmbeddingMismatch {
                    class_id,
                    name: lexicon.class_name.clone(),
                    texts: texts.len(),
                    embeddings: raw.len(),
                });
            }
            let raw_bytes = encode(&raw)?;
            let embeddings = raw.normalized()?;
            let core = largest_component(&embeddings, &topology)?;
            if core.member_indices.is_empty() {
                return Err(Error::EmptyCore {
                    class_id,
                    name: lexicon.class_name.clone(),
                });
            }
            let entry = ClassEntry {
                class_id,
                name: lexicon.class_name.clone(),
                lexicon: lexicon.clone(),
                texts,
                embeddings,
                core,
            };
            Ok((entry, raw_bytes))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&topology).expect("config serializes"));
    hasher.update(serde_json::to_vec(&metric).expect("config serializes"));
    for (entry, raw) in &built {
        hasher.update(serde_json::to_vec(&entry.lexicon).expect("lexicon serializes"));
        hasher.update(raw);
    }
    let input_hash = hex::encode(hasher.finalize());
    let classes = built.into_iter().map(|(e, _)| e).collect();
    ClassCatalog::assemble(classes, topology, metric, input_hash)
}

impl ClassCatalog {
    fn assemble(
        classes: Vec<ClassEntry>,
        topology: TopologyConfig,
        metric: MetricConfig,
        input_hash: String,
    ) -> Result<Self> {
        let first = classes.first().ok_or(Error::EmptyCatalog)?;
        let dim = first.embeddings.dim();
        for (pos, c) in classes.iter().enumerate() {
            if c.class_id != pos {
                return Err(Error::invalid(
                    "classes",
                    "class ids must be contiguous from 0",
                ));
            }
            if c.embeddings.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.embeddings.dim(),
                });
            }
            if c.core.member_indices.is_empty() {
                return Err(Error::EmptyCore {
                    class_id: c.class_id,
                    name: c.name.clone(),
                });
            }
            if c.core
                .member_indices
                .iter()
                .any(|&i| i >= c.embeddings.len())
            {
                return Err(Error::invalid(
                    "core",
                    format!("index out of range in class {pos}"),
                ));
            }
        }
        let spaces = classes
            .par_iter()
            .map(|c| SemanticSpace::prepared(&c.embeddings.subset(&c.core.member_indices), &metric))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dim,
            topology,
            metric,
            input_hash,
            classes,
            spaces,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ClassEntry] {
        &self.classes
    }

    pub fn spaces(&self) -> &[SemanticSpace] {
        &self.spaces
    }

    pub fn metric(&self) -> &MetricConfig {
        &self.metric
    }

    pub fn topology(&self) -> &TopologyConfig {
        &self.topology
    }

    /// SHA-256 over the lexicons, raw embeddings and configs the catalog was built from.
    pub fn input_hash(&self) -> &str {
        &self.input_hash
    }

    /// Same classes scored with a different metric.
    pub fn with_metric(&self, metric: MetricConfig) -> Result<Self> {
        metric.validate()?;
        Self::assemble(
            self.classes.clone(),
            self.topology,
            metric,
            self.input_hash.clone(),
        )
    }

    pub fn scores(&self, g: &Embedding) -> Result<Vec<f64>> {
        if g.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: g.dim(),
            });
        }
        self.spaces
            .iter()
            .map(|s| s.score(g, &self.metric))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            format: CATALOG_FORMAT,
            input_hash: self.input_hash.clone(),
            dim: self.dim,
            topology: self.topology,
            metric: self.metric,
            classes: self.classes.clone(),
        };
        let mut text = serde_json::to_string(&file).expect("catalog serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: CatalogFile = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        if file.format != CATALOG_FORMAT {
            return Err(Error::invalid(
                "format",
                format!("unsupported catalog format {}", file.format),
            ));
        }
        // re-run the embedding set invariants that serde bypasses
        let classes = file
            .classes
            .into_iter()
            .map(|mut c| {
                let (dim, items, labels) = c.embeddings.into_parts();
                let items = items
                    .into_iter()
                    .map(|e| Embedding::new(e.into_inner()))
                    .collect::<Result<Vec<_>>>()?;
                c.embeddings = EmbeddingSet::new(dim, items, labels)?;
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        let catalog = Self::assemble(classes, file.topology, file.metric, file.input_hash)?;
        if catalog.dim != file.dim {
            return Err(Error::DimensionMismatch {
                expected: file.dim,
                actual: catalog.dim,
            });
        }
        Ok(catalog)
    }
}

pub fn predict(g: &Embedding, catalog: &ClassCatalog) -> Result<Prediction> {
    let scores = catalog.scores(g)?;
    Ok(Prediction {
        class_id: argmax(&scores),
        scores,
    })
}

/// Checks that the predicted class survives positive affine rescaling of all scores.
pub fn argmax_invariance_check(catalog: &ClassCatalog, g: &Embedding) -> Result<bool> {
    let scores = catalog.scores(g)?;
    let base = argmax(&scores);
    let transforms = [
        (1.0, 0.0),
        (0.5, 0.0),
        (2.0, -3.0),
        (100.0, 7.5),
        (1e-3, 1.0),
    ];
    Ok(transforms.iter().all(|&(scale, shift)| {
        let moved: Vec<f64> = scores.iter().map(|s| scale * s + shift).collect();
        argmax(&moved) == base
    }))
}

/// Parses integer class labels from a query set.
pub fn query_labels(queries: &EmbeddingSet) -> Result<Vec<usize>> {
    let labels = queries
        .labels()
        .ok_or_else(|| Error::BadQueryLabel("<missing label block>".into()))?;
    labels
        .iter()
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| Error::BadQueryLabel(l.clone()))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub correct: usize,
    pub top1_accuracy: f64,
    /// Queries per true class.
    pub per_class_counts: Vec<usize>,
    /// `None` for classes without queries.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub predictions: Vec<usize>,
}

impl EvalReport {
    pub fn from_predictions(
        labels: &[usize],
        predictions: Vec<usize>,
        classes: usize,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyQuerySet);
        }
        let mut confusion = vec![vec![0usize; classes]; classes];
        for (&truth, &pred) in labels.iter().zip(&predictions) {
            confusion[truth][pred] += 1;
        }
        let per_class_counts: Vec<usize> = confusion.iter().map(|row| row.iter().sum()).collect();
        let correct = (0..classes).map(|k| confusion[k][k]).sum();
        let per_class_accuracy = (0..classes)
            .map(|k| {
                (per_class_counts[k] > 0)
                    .then(|| confusion[k][k] as f64 / per_class_counts[k] as f64)
            })
            .collect();
        Ok(Self {
            total: labels.len(),
            correct,
            top1_accuracy: correct as f64 / labels.len() as f64,
            per_class_counts,
            per_class_accuracy,
            confusion,
            predictions,
        })
    }

    /// One row per class: `class_id,name,queries,correct,accuracy`.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("class_id,name,queries,correct,accuracy\n");
        for (k, name) in names.iter().enumerate() {
            let acc = self.per_class_accuracy[k]
                .map(|a| a.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{k},{},{},{},{acc}\n",
                csv_field(name),
                self.per_class_counts[k],
                self.confusion[k][k]
            ));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Top-1 evaluation with explicit labels.
pub fn evaluate_labeled(
    queries: &EmbeddingSet,
    labels: &[usize],
    catalog: &ClassCatalog,
) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    if labels.len() != queries.len() {
        return Err(Error::invalid(
            "labels",
            format!("{} labels for {} queries", labels.len(), queries.len()),
        ));
    }
    check_labels(labels, catalog.len())?;
    let predictions = queries
        .items()
        .par_iter()
        .map(|g| predict(g, catalog).map(|p| p.class_id))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_predictions(labels, predictions, catalog.len())
}

/// Top-1 evaluation; labels come from the query set's label block.
pub fn evaluate(queries: &EmbeddingSet, catalog: &ClassCatalog) -> Result<EvalReport> {
    if queries.is_empty() {
        return Err(Error::EmptyQuerySet);
    }
    let labels = query_labels(queries)?;
    evaluate_labeled(queries, &labels, catalog)
}
