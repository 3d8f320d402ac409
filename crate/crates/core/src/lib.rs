//! Zero-shot classification with synonymous semantic spaces.
//!
//! Each class is described by many text embeddings (synonyms combined with
//! visual descriptors) instead of a single prompt. The embeddings of a class
//! are filtered with 0-dimensional persistent homology over their cosine
//! Vietoris-Rips filtration, keeping the largest connected component, and a
//! query is assigned to the class whose filtered space it matches best under
//! a point-to-space metric. An optional test-time step shifts every class
//! space to lower the prediction entropy over augmented views.
//!
//! Module map:
//!
//! * [`embedding`] and [`format`]: vectors, kernels, and the `S3EM` file format
//! * [`textgen`] and [`llm`]: prompts, synonym × descriptor texts, LLM cache
//! * [`topology`]: similarity graph, Rips 1-skeleton, persistence, core extraction
//! * [`metrics`]: point-to-set, -center, -subspace and -local-center similarity
//! * [`classifier`]: catalogs, prediction and evaluation
//! * [`tta`]: entropy-minimizing shift adaptation
//! * [`analysis`]: compactness diagnostics
//! * [`synth`]: deterministic synthetic benchmark

pub mod analysis;
pub mod classifier;
pub mod config;
pub mod embedding;
pub mod error;
pub mod format;
pub mod llm;
pub mod metrics;
pub mod synth;
pub mod textgen;
pub mod topology;
pub mod tta;

pub use classifier::{build_catalog, evaluate, predict, ClassCatalog, EvalReport, Prediction};
pub use config::PipelineConfig;
pub use embedding::{cosine, normalize, Embedding, EmbeddingSet};
pub use error::{Error, Result};
pub use format::{load_embeddings, save_embeddings};
pub use metrics::{MetricConfig, MetricKind, SemanticSpace};
pub use textgen::{ClassLexicon, SynonymousTexts};
pub use topology::{CoreComponent, CoreMode, PersistenceRecord, TopologyConfig};
pub use tta::{TtaConfig, TtaEpisode};
