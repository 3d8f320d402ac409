//! Pipeline configuration: a TOML document whose values command-line flags
//! may override. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricConfig;
use crate::topology::TopologyConfig;
use crate::tta::TtaConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub lexicon: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub episodes: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub topology: TopologyConfig,
    pub metric: MetricConfig,
    pub tta: TtaConfig,
    /// Views used per adaptation episode, counting the original. `None`
    /// uses every row of each episode file.
    pub views: Option<usize>,
    pub paths: Paths,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.metric.validate()?;
        self.tta.validate()?;
        if self.views == Some(0) {
            return Err(Error::invalid("views", "must be at least 1"));
        }
        Ok(())
    }
}
