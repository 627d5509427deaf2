use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use cinepipe_core::clients::{ModelEndpoint, RetryPolicy};
use cinepipe_core::storyboard::TieBreak;
use cinepipe_core::transition::TransitionParams;
use serde::{Deserialize, Serialize};

use crate::record::Stage;
use crate::PipelineError;

/// Which model id serves each role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub storyteller: String,
    pub cinematographer: String,
    /// Optional screenplay judges; when non-empty every screenplay is audited.
    pub judges: Vec<String>,
    pub t2i: String,
    /// Image-edit pool. Empty means every model the routing table can select.
    pub i2i: Vec<String>,
    pub flf2v: String,
    pub guided: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            storyteller: "mock-llm".into(),
            cinematographer: "mock-llm".into(),
            judges: vec![],
            t2i: "mock-t2i".into(),
            i2i: vec![],
            flf2v: "mock-flf2v".into(),
            guided: "mock-guided".into(),
        }
    }
}

/// Stages that pause for human approval once their artifacts exist.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub screenplay: bool,
    pub storyboard: bool,
    pub clips: bool,
    pub transitions: bool,
}

impl GateConfig {
    pub fn gated(&self) -> BTreeSet<Stage> {
        [
            (self.screenplay, Stage::Screenplay),
            (self.storyboard, Stage::Storyboard),
            (self.clips, Stage::Clips),
            (self.transitions, Stage::Transitions),
        ]
        .into_iter()
        .filter_map(|(on, s)| on.then_some(s))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub parallelism: usize,
    /// Models without a registered endpoint use deterministic mocks.
    pub mock: bool,
    pub taxonomy: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub tie_break: TieBreak,
    pub models: ModelConfig,
    pub gates: GateConfig,
    pub transition: TransitionParams,
    pub retry: RetryPolicy,
    pub endpoint: Vec<ModelEndpoint>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            parallelism: 4,
            mock: true,
            taxonomy: None,
            prompts: None,
            scores: None,
            tie_break: TieBreak::default(),
            models: ModelConfig::default(),
            gates: GateConfig::default(),
            transition: TransitionParams::default(),
            retry: RetryPolicy::default(),
            endpoint: vec![],
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.taxonomy, &mut cfg.prompts, &mut cfg.scores].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.parallelism == 0 {
            return Err(PipelineError::Config("parallelism must be at least 1".into()));
        }
        if self.retry.max_attempts == 0 {
            return Err(PipelineError::Config("retry.max_attempts must be at least 1".into()));
        }
        self.transition.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }
}
