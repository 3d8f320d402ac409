//! Deterministic synthetic benchmark with known structure.
//!
//! Each class owns a text-embedding cloud made of a few tight sub-clusters
//! (one per synonym family) around a class direction; all class directions
//! share a common component so classes are separated but not orthogonal.
//! A fixed fraction of every class's texts is replaced by planted outliers
//! forming one hallucinated synonym family: all of a class's outliers sit
//! around the center of a single other, randomly chosen class. Queries and
//! adaptation episodes are noisy samples around the class directions.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{normalize, Embedding, EmbeddingSet};
use crate::error::{Error, Result};
use crate::format::{save_embeddings, write_atomic};
use crate::textgen::{combine, save_lexicon_cache, ClassLexicon, LexiconMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub classes: usize,
    pub synonyms_per_class: usize,
    pub outlier_rate: f64,
    pub queries: usize,
    pub dim: usize,
    pub subclusters: usize,
    pub episodes: usize,
    pub views: usize,
    /// Weight of the direction shared by all classes.
    pub shared_weight: f64,
    /// Offset of each sub-cluster center from its class center.
    pub subcluster_spread: f64,
    /// Norm of the per-text noise.
    pub text_noise: f64,
    /// Norm of the noise added to class centers to form queries.
    pub query_noise: f64,
    /// Norm of the noise added to a query to form an augmented view.
    pub view_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            classes: 5,
            synonyms_per_class: 40,
            outlier_rate: 0.1,
            queries: 500,
            dim: 64,
            subclusters: 4,
            episodes: 20,
            views: 16,
            shared_weight: 0.5,
            subcluster_spread: 0.15,
            text_noise: 0.12,
            query_noise: 2.5,
            view_noise: 0.6,
        }
    }
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid("synth config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.outlier_rate) {
            return Err(Error::InvalidRate(self.outlier_rate));
        }
        if self.classes < 2 {
            return Err(Error::invalid("classes", "need at least 2 classes"));
        }
        if self.synonyms_per_class == 0 || self.dim < 2 || self.subclusters == 0 {
            return Err(Error::invalid(
                "synth",
                "synonyms_per_class, subclusters must be positive and dim >= 2",
            ));
        }
        if self.episodes > 0 && self.views == 0 {
            return Err(Error::invalid("views", "episodes need at least one view"));
        }
        Ok(())
    }

    /// Planted outliers per class.
    pub fn outliers_per_class(&self) -> usize {
        (self.outlier_rate * self.synonyms_per_class as f64).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub class_id: usize,
    pub name: String,
    pub texts: usize,
    /// Indices (into the class's text embeddings) of planted outliers.
    pub outliers: Vec<usize>,
    /// The class the planted outliers actually describe.
    pub confused_with: usize,
}

/// Ground truth written next to the generated files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub classes: Vec<SynthClass>,
    pub query_counts: Vec<usize>,
    pub total_outliers: usize,
    pub episodes: usize,
}

#[derive(Clone, Debug)]
pub struct SynthBenchmark {
    pub lexicons: LexiconMap,
    pub embeddings: HashMap<usize, EmbeddingSet>,
    pub queries: EmbeddingSet,
    pub episodes: Vec<EmbeddingSet>,
    pub manifest: SynthManifest,
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn scaled_unit(v: &[f64], scale: f64) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x * scale / norm).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn noisy_unit(rng: &mut ChaCha8Rng, center: &[f64], noise: f64) -> Result<Embedding> {
    let z = scaled_unit(&gaussian(rng, center.len()), noise);
    let v: Vec<f32> = add(center, &z).iter().map(|&x| x as f32).collect();
    normalize(&v, center.len())
}

pub fn class_name(k: usize) -> String {
    format!("class_{k:02}")
}

pub fn generate(config: &SynthConfig) -> Result<SynthBenchmark> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dim;
    let shared = scaled_unit(&gaussian(&mut rng, dim), config.shared_weight);
    let centers: Vec<Vec<f64>> = (0..config.classes)
        .map(|_| {
            let own = scaled_unit(&gaussian(&mut rng, dim), 1.0);
            scaled_unit(&add(&own, &shared), 1.0)
        })
        .collect();

    let mut lexicons = LexiconMap::new();
    let mut embeddings = HashMap::new();
    let mut classes = Vec::new();
    let n_out = config.outliers_per_class();
    for (k, center) in centers.iter().enumerate() {
        let name = class_name(k);
        let synonyms: Vec<String> = (1..config.synonyms_per_class)
            .map(|j| format!("{name} variant {j:02}"))
            .collect();
        let lexicon = ClassLexicon::new(name.clone(), "synthetic", synonyms, Vec::new())?;
        let texts = combine(k, &lexicon)?.texts;
        let subcenters: Vec<Vec<f64>> = (0..config.subclusters)
            .map(|_| {
                add(
                    center,
                    &scaled_unit(&gaussian(&mut rng, dim), config.subcluster_spread),
                )
            })
            .collect();
        let mut slots: Vec<usize> = (0..texts.len()).collect();
        slots.shuffle(&mut rng);
        let mut outliers: Vec<usize> = slots[..n_out].to_vec();
        outliers.sort_unstable();
        let confused_with = (k + rng.random_range(1..config.classes)) % config.classes;
        let mut items = Vec::with_capacity(texts.len());
        for i in 0..texts.len() {
            let item = if outliers.binary_search(&i).is_ok() {
                noisy_unit(&mut rng, &centers[confused_with], config.text_noise)?
            } else {
                let sub = &subcenters[i % config.subclusters];
                noisy_unit(&mut rng, sub, config.text_noise)?
            };
            items.push(item);
        }
        let set = EmbeddingSet::new(dim, items, Some(texts.clone()))?;
        embeddings.insert(k, set);
        classes.push(SynthClass {
            class_id: k,
            name,
            texts: texts.len(),
            outliers,
            confused_with,
        });
        lexicons.insert(k, lexicon);
    }

    let mut query_items = Vec::with_capacity(config.queries);
    let mut query_labels = Vec::with_capacity(config.queries);
    let mut query_counts = vec![0usize; config.classes];
    for _ in 0..config.queries {
        let k = rng.random_range(0..config.classes);
        query_items.push(noisy_unit(&mut rng, &centers[k], config.query_noise)?);
        query_labels.push(k.to_string());
        query_counts[k] += 1;
    }
    let queries = EmbeddingSet::new(dim, query_items, Some(query_labels))?;

    let mut episodes = Vec::with_capacity(config.episodes);
    for _ in 0..config.episodes {
        let k = rng.random_range(0..config.classes);
        let original = noisy_unit(&mut rng, &centers[k], config.query_noise)?;
        let base = original.to_f64();
        let mut views = vec![original];
        let mut labels = vec![format!("original:{k}")];
        for v in 1..config.views {
            views.push(noisy_unit(&mut rng, &base, config.view_noise)?);
            labels.push(format!("augmented:{v}"));
        }
        episodes.push(EmbeddingSet::new(dim, views, Some(labels))?);
    }

    let manifest = SynthManifest {
        config: config.clone(),
        total_outliers: n_out * config.classes,
        classes,
        query_counts,
        episodes: episodes.len(),
    };
    Ok(SynthBenchmark {
        lexicons,
        embeddings,
        queries,
        episodes,
        manifest,
    })
}

impl SynthBenchmark {
    /// Writes `lexicon.json`, `embeddings/<k>.s3em`, `queries.s3em`,
    /// `episodes/episode_NNNN.s3em`, `groups.txt` and `manifest.json` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let emb_dir = dir.join("embeddings");
        let ep_dir = dir.join("episodes");
        for d in [dir, emb_dir.as_path(), ep_dir.as_path()] {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        save_lexicon_cache(&self.lexicons, dir.join("lexicon.json"))?;
        let mut groups = String::new();
        for k in 0..self.lexicons.len() {
            save_embeddings(&self.embeddings[&k], emb_dir.join(format!("{k}.s3em")))?;
            groups.push_str(&format!("{},embeddings/{k}.s3em\n", class_name(k)));
        }
        write_atomic(&dir.join("groups.txt"), groups.as_bytes())?;
        save_embeddings(&self.queries, dir.join("queries.s3em"))?;
        for (i, ep) in self.episodes.iter().enumerate() {
            save_embeddings(ep, ep_dir.join(format!("episode_{i:04}.s3em")))?;
        }
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join("manifest.json"), text.as_bytes())
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SynthManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_owned(),
        source,
    })
}
