//! Movement-family routing and N+1 keyframe synthesis.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clients::{ClientError, Digest, GenClient};
use crate::screenplay::Screenplay;
use crate::taxonomy::{Family, Taxonomy, TaxonomyError};

/// Benchmark scores shipped with the crate.
pub const SHIPPED_SCORES_TOML: &str = include_str!("../data/benchmark_scores.toml");

#[derive(Debug, Error)]
pub enum StoryboardError {
    #[error("malformed score matrix: {0}")]
    Parse(String),
    #[error("score matrix lists no models")]
    NoModels,
    #[error("duplicate model {0:?} in score matrix")]
    DuplicateModel(String),
    #[error("model {model:?} has no camera-adherence score for {family}")]
    MissingCell { model: String, family: Family },
    #[error("score {value} for {model:?} is outside [0, 10]")]
    OutOfRange { model: String, value: f64 },
    #[error("routing table has no entry for family {0}")]
    Unrouted(Family),
    #[error("no image-edit client for routed model {model:?} (family {family})")]
    MissingClient { model: String, family: Family },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Client(#[from] ClientError),
}

/// A mean rating with its spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Rating {
    pub mean: f64,
    pub sd: f64,
}

impl From<[f64; 2]> for Rating {
    fn from([mean, sd]: [f64; 2]) -> Self {
        Self { mean, sd }
    }
}

impl From<Rating> for [f64; 2] {
    fn from(r: Rating) -> Self {
        [r.mean, r.sd]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelScores {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
    pub camera_adherence: BTreeMap<Family, Rating>,
    pub scene_preservation: Rating,
    pub narration_adherence: Rating,
}

/// Per-model benchmark scores, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreMatrix {
    models: Vec<ModelScores>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreDocument {
    #[serde(default)]
    model: Vec<ModelScores>,
}

impl ScoreMatrix {
    pub fn new(models: Vec<ModelScores>) -> Result<Self, StoryboardError> {
        if models.is_empty() {
            return Err(StoryboardError::NoModels);
        }
        let mut seen = BTreeSet::new();
        for m in &models {
            if !seen.insert(m.id.as_str()) {
                return Err(StoryboardError::DuplicateModel(m.id.clone()));
            }
            for family in Family::ALL {
                if !m.camera_adherence.contains_key(&family) {
                    return Err(StoryboardError::MissingCell { model: m.id.clone(), family });
                }
            }
            let ratings = m.camera_adherence.values().chain([&m.scene_preservation, &m.narration_adherence]);
            for r in ratings {
                if !(0.0..=10.0).contains(&r.mean) || !(r.sd.is_finite() && r.sd >= 0.0) {
                    return Err(StoryboardError::OutOfRange { model: m.id.clone(), value: r.mean });
                }
            }
        }
        Ok(Self { models })
    }

    pub fn load(toml_text: &str) -> Result<Self, StoryboardError> {
        let doc: ScoreDocument = toml::from_str(toml_text).map_err(|e| StoryboardError::Parse(e.to_string()))?;
        Self::new(doc.model)
    }

    pub fn shipped() -> Self {
        Self::load(SHIPPED_SCORES_TOML).expect("shipped score matrix is valid")
    }

    pub fn models(&self) -> &[ModelScores] {
        &self.models
    }

    pub fn model(&self, id: &str) -> Option<&ModelScores> {
        self.models.iter().find(|m| m.id == id)
    }

    pub fn camera_adherence(&self, model: &str, family: Family) -> Option<f64> {
        self.model(model).map(|m| m.camera_adherence[&family].mean)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Higher scene preservation wins, then earlier declaration.
    #[default]
    ScenePreservation,
    DeclarationOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingTable {
    pub assignment: BTreeMap<Family, String>,
    /// Every model tied at the family maximum, best first.
    pub tie_break_trace: BTreeMap<Family, Vec<String>>,
}

impl RoutingTable {
    pub fn route(&self, family: Family) -> Result<&str, StoryboardError> {
        self.assignment.get(&family).map(String::as_str).ok_or(StoryboardError::Unrouted(family))
    }
}

pub fn family_of(movement: &str, taxonomy: &Taxonomy) -> Result<Family, StoryboardError> {
    Ok(taxonomy.family_of(movement)?)
}

pub fn build_routing(scores: &ScoreMatrix, policy: TieBreak) -> Result<RoutingTable, StoryboardError> {
    if scores.models.is_empty() {
        return Err(StoryboardError::NoModels);
    }
    let mut assignment = BTreeMap::new();
    let mut tie_break_trace = BTreeMap::new();
    for family in Family::ALL {
        let best = scores.models.iter().map(|m| m.camera_adherence[&family].mean).fold(f64::NEG_INFINITY, f64::max);
        let mut tied: Vec<(usize, &ModelScores)> =
            scores.models.iter().enumerate().filter(|(_, m)| m.camera_adherence[&family].mean == best).collect();
        if policy == TieBreak::ScenePreservation {
            // Stable sort keeps declaration order among equal preservation scores.
            tied.sort_by(|a, b| b.1.scene_preservation.mean.total_cmp(&a.1.scene_preservation.mean));
        }
        let trace: Vec<String> = tied.iter().map(|(_, m)| m.id.clone()).collect();
        assignment.insert(family, trace[0].clone());
        tie_break_trace.insert(family, trace);
    }
    Ok(RoutingTable { assignment, tie_break_trace })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyframe {
    pub image: Digest,
    pub model_id: String,
    pub prompt: String,
    pub seed: u64,
    /// The keyframe this one was edited from; `None` for the opening frame.
    pub source: Option<Digest>,
    pub movement: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Storyboard {
    pub keyframes: Vec<Keyframe>,
}

pub fn opening_prompt(screenplay: &Screenplay) -> String {
    format!("{}\n{}", screenplay.scene.scenario, screenplay.triplets[0].shot_init)
}

/// Resolves the image-edit client for every shot before anything is generated.
pub fn resolve_clients<'a>(
    screenplay: &Screenplay,
    routing: &RoutingTable,
    taxonomy: &Taxonomy,
    i2i_pool: &'a BTreeMap<String, GenClient>,
) -> Result<Vec<&'a GenClient>, StoryboardError> {
    screenplay
        .triplets
        .iter()
        .map(|t| {
            let family = family_of(&t.movement, taxonomy)?;
            let model = routing.route(family)?;
            i2i_pool.get(model).ok_or_else(|| StoryboardError::MissingClient { model: model.to_string(), family })
        })
        .collect()
}

/// Opening frame from text, then each later frame edited from its
/// predecessor toward the previous shot's end description.
pub fn generate_storyboard(
    screenplay: &Screenplay,
    routing: &RoutingTable,
    taxonomy: &Taxonomy,
    t2i: &GenClient,
    i2i_pool: &BTreeMap<String, GenClient>,
    seed: u64,
) -> Result<Storyboard, StoryboardError> {
    let editors = resolve_clients(screenplay, routing, taxonomy, i2i_pool)?;
    if screenplay.triplets.is_empty() {
        return Ok(Storyboard { keyframes: vec![] });
    }
    let prompt = opening_prompt(screenplay);
    let image = t2i.image_generate(&prompt, seed)?;
    let mut keyframes =
        vec![Keyframe { image, model_id: t2i.model_id().to_string(), prompt, seed, source: None, movement: None }];
    for (i, (triplet, editor)) in screenplay.triplets.iter().zip(editors).enumerate() {
        let source = keyframes[i].image.clone();
        let frame_seed = seed.wrapping_add(i as u64 + 1);
        let image = editor.image_edit(&source, &triplet.shot_end, frame_seed)?;
        keyframes.push(Keyframe {
            image,
            model_id: editor.model_id().to_string(),
            prompt: triplet.shot_end.clone(),
            seed: frame_seed,
            source: Some(source),
            movement: Some(triplet.movement.clone()),
        });
    }
    Ok(Storyboard { keyframes })
}
