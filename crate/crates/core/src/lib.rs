//! Core building blocks for keyframe-first cinematic video generation.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`taxonomy`]: the control-signal vocabulary and exactly balanced plans over it.
//! - [`screenplay`]: scene records and chained `[shot init, movement, shot end]` triplets.
//! - [`storyboard`]: movement-family routing over an image-edit benchmark matrix and
//!   N+1 keyframe synthesis.
//! - [`clients`]: cached, retrying, provenance-recording access to generative services,
//!   with deterministic mock backends.
//! - [`transition`]: boundary truncation, Hermite trajectory bridging and control fields.
//! - [`eval`]: rating, accuracy, majority-vote and win-rate aggregation.

pub mod clients;
pub mod eval;
pub mod prompts;
pub mod screenplay;
pub mod storyboard;
pub mod taxonomy;
pub mod transition;
