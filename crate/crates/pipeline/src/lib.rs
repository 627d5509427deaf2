//! Staged, checkpointed orchestration of the generation pipeline, with a
//! batch runner, manifest export and the review HTTP API.

pub mod batch;
pub mod clients;
pub mod config;
pub mod manifest;
pub mod record;
pub mod runner;
pub mod server;
pub mod store;
pub mod tracker;

use cinepipe_core::clients::media::MediaError;
use cinepipe_core::clients::{ClientError, RegistryError, StoreError};
use cinepipe_core::prompts::PromptError;
use cinepipe_core::screenplay::ScreenplayError;
use cinepipe_core::storyboard::StoryboardError;
use cinepipe_core::taxonomy::TaxonomyError;
use cinepipe_core::transition::TransitionError;
use thiserror::Error;

pub use batch::{run_batch, BatchReport};
pub use config::PipelineConfig;
pub use manifest::{export_manifest, Manifest, ManifestEntry};
pub use record::{GateState, RunRecord, Stage};
pub use runner::{Pipeline, Rejection};
pub use store::RunStore;
pub use tracker::{SyntheticTracker, TrackSource};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("unknown run {0:?}")]
    UnknownRun(String),
    #[error("corrupt run record {0}")]
    CorruptRecord(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("{0}")]
    Invariant(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Screenplay(#[from] ScreenplayError),
    #[error(transparent)]
    Storyboard(#[from] StoryboardError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Store(#[from] StoreError),
}
