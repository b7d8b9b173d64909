use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::filters::Scenario;
use crate::pipeline::AnalysisConfig;

/// Everything a run needs beyond its inputs. Every field is optional in the
/// JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
    /// Monte Carlo trials per hypothesis for `simulate`.
    pub trials: usize,
    #[serde(flatten)]
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenarios: Scenario::ALL.to_vec(),
            seed: 0,
            trials: 100_000,
            analysis: AnalysisConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported config schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.scenarios.is_empty() {
            return Err(Error::Config("scenario set is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        self.analysis.validate()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    config.validate()?;
    Ok(config)
}
