//! Scene records, chained shot triplets and screenplay retrieval audits.
//!
//! The storyteller model turns control signals into a [`SceneRecord`]; the
//! cinematographer model translates each camera movement into a description
//! of the view at the end of the move. Triplets are chained so each shot
//! starts exactly where the previous one ended.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::clients::{ClientError, GenClient, LlmPrompt};
use crate::prompts::{render, PromptError, PromptSet};
use crate::taxonomy::{ControlSignals, Taxonomy};

/// Re-prompts allowed after the first malformed reply.
pub const DEFAULT_MAX_REPROMPTS: u32 = 3;

#[derive(Debug, Error)]
pub enum ScreenplayError {
    #[error("model output unusable after {attempts} attempt(s): {last}")]
    Unparseable { attempts: u32, last: String },
    #[error("scene record violates schema: {0}")]
    Schema(String),
    #[error("movement {0:?} is not in the taxonomy")]
    UnknownMovement(String),
    #[error("cinematographer returned no usable description after {0} attempt(s)")]
    EmptyReply(u32),
    #[error("chaining broken at shot {0}: shot init differs from previous shot end")]
    BrokenChain(usize),
    #[error("screenplay has {got} triplets for shot count {expected}")]
    Cardinality { got: usize, expected: usize },
    #[error("at least one judge is required")]
    NoJudges,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Client(#[from] ClientError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subject {
    pub identity: String,
    pub visual_attributes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectAction {
    pub subject_ref: String,
    pub verb_phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRecord {
    pub lighting: String,
    pub location: String,
    pub subjects: Vec<Subject>,
    pub actions: Vec<SubjectAction>,
    pub subject_positions: String,
    pub crowd_level: String,
    pub scenario: String,
}

/// Strips a surrounding markdown code fence, which models add unprompted.
fn unfence(text: &str) -> &str {
    let t = text.trim();
    if let Some(inner) = t.strip_prefix("```") {
        let inner = inner.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
        if let Some(body) = inner.trim_end().strip_suffix("```") {
            return body.trim();
        }
    }
    t
}

impl SceneRecord {
    /// Parses a storyteller reply. Only syntax and field names are checked here.
    pub fn parse(reply: &str) -> Result<Self, ScreenplayError> {
        serde_json::from_str(unfence(reply)).map_err(|e| ScreenplayError::Schema(e.to_string()))
    }

    /// Checks field contents against the conditioning signals.
    pub fn validate(&self, signals: &ControlSignals) -> Result<(), ScreenplayError> {
        let texts = [
            ("lighting", &self.lighting),
            ("location", &self.location),
            ("subject_positions", &self.subject_positions),
            ("crowd_level", &self.crowd_level),
            ("scenario", &self.scenario),
        ];
        for (name, value) in texts {
            if value.trim().is_empty() {
                return Err(ScreenplayError::Schema(format!("{name} is empty")));
            }
        }
        if !signals.subject_count.admits(self.subjects.len()) {
            return Err(ScreenplayError::Schema(format!(
                "{} subjects listed but subject count is {}",
                self.subjects.len(),
                signals.subject_count
            )));
        }
        for s in &self.subjects {
            if s.identity.trim().is_empty() || s.visual_attributes.trim().is_empty() {
                return Err(ScreenplayError::Schema("subject with empty identity or attributes".into()));
            }
        }
        if !self.subjects.is_empty() && self.actions.is_empty() {
            return Err(ScreenplayError::Schema("subjects listed without actions".into()));
        }
        for a in &self.actions {
            if !self.subjects.iter().any(|s| s.identity == a.subject_ref) {
                return Err(ScreenplayError::Schema(format!("action refers to unknown subject {:?}", a.subject_ref)));
            }
            if a.verb_phrase.trim().is_empty() {
                return Err(ScreenplayError::Schema("action with empty verb phrase".into()));
            }
        }
        Ok(())
    }

    /// The opening-shot description derived from the record.
    pub fn opening_view(&self) -> String {
        let mut out = format!("{}, {}. {}.", self.location, self.lighting, self.subject_positions);
        if !self.subjects.is_empty() {
            let who: Vec<String> =
                self.subjects.iter().map(|s| format!("{} ({})", s.identity, s.visual_attributes)).collect();
            out.push_str(&format!(" Subjects: {}.", who.join("; ")));
            let doing: Vec<String> =
                self.actions.iter().map(|a| format!("{} {}", a.subject_ref, a.verb_phrase)).collect();
            out.push_str(&format!(" Action: {}.", doing.join("; ")));
        }
        out.push_str(&format!(" Crowd: {}.", self.crowd_level));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotTriplet {
    pub shot_init: String,
    pub movement: String,
    pub shot_end: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Screenplay {
    pub signals: ControlSignals,
    pub scene: SceneRecord,
    pub triplets: Vec<ShotTriplet>,
}

impl Screenplay {
    /// Cardinality and exact-string chaining between consecutive shots.
    pub fn check(&self) -> Result<(), ScreenplayError> {
        if self.triplets.len() != self.signals.shot_count as usize {
            return Err(ScreenplayError::Cardinality {
                got: self.triplets.len(),
                expected: self.signals.shot_count as usize,
            });
        }
        for i in 1..self.triplets.len() {
            if self.triplets[i].shot_init != self.triplets[i - 1].shot_end {
                return Err(ScreenplayError::BrokenChain(i));
            }
        }
        Ok(())
    }

    /// Plain-text rendering handed to judges and reviewers.
    pub fn render_text(&self) -> String {
        let mut out = format!("Scenario: {}\n", self.scene.scenario);
        out.push_str(&format!("Location: {}\nLighting: {}\n", self.scene.location, self.scene.lighting));
        out.push_str(&format!("Positions: {}\nCrowd: {}\n", self.scene.subject_positions, self.scene.crowd_level));
        for (i, t) in self.triplets.iter().enumerate() {
            out.push_str(&format!(
                "Shot {}:\n  init: {}\n  movement: {}\n  end: {}\n",
                i + 1,
                t.shot_init,
                t.movement,
                t.shot_end
            ));
        }
        out
    }
}

/// One request/response pair kept for provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub role: String,
    pub model_id: String,
    pub prompt: String,
    pub response: String,
}

pub type Transcript = Vec<Exchange>;

/// Storyteller and cinematographer steps sharing a taxonomy and templates.
#[derive(Debug, Clone, Copy)]
pub struct Writer<'a> {
    pub taxonomy: &'a Taxonomy,
    pub prompts: &'a PromptSet,
    pub max_reprompts: u32,
}

fn ask_until<T>(
    client: &GenClient,
    role: &str,
    base: LlmPrompt,
    seed: u64,
    max_reprompts: u32,
    log: &mut Transcript,
    mut accept: impl FnMut(&str) -> Result<T, String>,
) -> Result<T, (u32, String)> {
    let mut prompt = base.clone();
    let mut last = String::new();
    for attempt in 0..=max_reprompts {
        let reply = client.llm_complete(&prompt, seed).map_err(|e| (attempt + 1, e.to_string()))?;
        log.push(Exchange {
            role: role.to_string(),
            model_id: client.model_id().to_string(),
            prompt: prompt.text.clone(),
            response: reply.clone(),
        });
        match accept(&reply) {
            Ok(v) => return Ok(v),
            Err(violation) => {
                log::debug!("{role} reply rejected (attempt {}): {violation}", attempt + 1);
                prompt.text = format!(
                    "{}\n\nYour previous reply was rejected: {violation}\nReply again (attempt {} of {}), following the required format exactly.",
                    base.text,
                    attempt + 2,
                    max_reprompts + 1
                );
                last = violation;
            }
        }
    }
    Err((max_reprompts + 1, last))
}

impl<'a> Writer<'a> {
    pub fn new(taxonomy: &'a Taxonomy, prompts: &'a PromptSet) -> Self {
        Self { taxonomy, prompts, max_reprompts: DEFAULT_MAX_REPROMPTS }
    }

    pub fn compose_scene(
        &self,
        signals: &ControlSignals,
        storyteller: &GenClient,
        seed: u64,
        log: &mut Transcript,
    ) -> Result<SceneRecord, ScreenplayError> {
        self.taxonomy.validate(signals).map_err(|e| ScreenplayError::Schema(e.to_string()))?;
        let vars = BTreeMap::from([
            ("genre", signals.genre.clone()),
            ("shot_count", signals.shot_count.to_string()),
            ("movements", signals.movements.join(", ")),
            ("subject_count", signals.subject_count.to_string()),
            ("dynamicity", signals.dynamicity.to_string()),
        ]);
        let prompt = LlmPrompt {
            role: "storyteller".into(),
            text: render(&self.prompts.storyteller, &vars)?,
            schema_hint: Some("scene_record".into()),
            context: json!({ "signals": signals }),
        };
        ask_until(storyteller, "storyteller", prompt, seed, self.max_reprompts, log, |reply| {
            let scene = SceneRecord::parse(reply).map_err(|e| e.to_string())?;
            scene.validate(signals).map_err(|e| e.to_string())?;
            Ok(scene)
        })
        .map_err(|(attempts, last)| ScreenplayError::Unparseable { attempts, last })
    }

    pub fn translate_movement(
        &self,
        init: &str,
        movement: &str,
        scene: &SceneRecord,
        cinematographer: &GenClient,
        seed: u64,
        log: &mut Transcript,
    ) -> Result<String, ScreenplayError> {
        let family =
            self.taxonomy.family_of(movement).map_err(|_| ScreenplayError::UnknownMovement(movement.to_string()))?;
        let vars = BTreeMap::from([
            ("init", init.to_string()),
            ("movement", movement.to_string()),
            ("location", scene.location.clone()),
            ("lighting", scene.lighting.clone()),
        ]);
        let prompt = LlmPrompt {
            role: "cinematographer".into(),
            text: render(&self.prompts.cinematographer, &vars)?,
            schema_hint: None,
            context: json!({ "init": init, "movement": movement, "family": family }),
        };
        ask_until(cinematographer, "cinematographer", prompt, seed, self.max_reprompts, log, |reply| {
            let view = reply.trim();
            if view.is_empty() {
                Err("empty reply".to_string())
            } else if view.trim_end_matches('.').eq_ignore_ascii_case(movement) {
                Err("reply only restates the movement name".to_string())
            } else {
                Ok(view.to_string())
            }
        })
        .map_err(|(attempts, _)| ScreenplayError::EmptyReply(attempts))
    }

    /// Chains one triplet per movement: each shot starts from the previous
    /// shot's end description, byte for byte.
    pub fn build_screenplay(
        &self,
        scene: &SceneRecord,
        signals: &ControlSignals,
        cinematographer: &GenClient,
        seed: u64,
        log: &mut Transcript,
    ) -> Result<Screenplay, ScreenplayError> {
        let mut triplets: Vec<ShotTriplet> = Vec::with_capacity(signals.movements.len());
        let mut init = scene.opening_view();
        for (i, movement) in signals.movements.iter().enumerate() {
            let end =
                self.translate_movement(&init, movement, scene, cinematographer, seed.wrapping_add(i as u64), log)?;
            triplets.push(ShotTriplet { shot_init: init, movement: movement.clone(), shot_end: end.clone() });
            init = end;
        }
        let screenplay = Screenplay { signals: signals.clone(), scene: scene.clone(), triplets };
        screenplay.check()?;
        Ok(screenplay)
    }
}

/// Control fields a judge must recover from screenplay text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditField {
    Genre,
    SubjectCount,
    Dynamicity,
    ShotCount,
}

impl AuditField {
    pub const ALL: [AuditField; 4] =
        [AuditField::Genre, AuditField::SubjectCount, AuditField::Dynamicity, AuditField::ShotCount];

    pub fn as_str(self) -> &'static str {
        match self {
            AuditField::Genre => "genre",
            AuditField::SubjectCount => "subject_count",
            AuditField::Dynamicity => "dynamicity",
            AuditField::ShotCount => "shot_count",
        }
    }
}

impl fmt::Display for AuditField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type FieldLabels = BTreeMap<AuditField, String>;

pub fn truth_labels(signals: &ControlSignals) -> FieldLabels {
    BTreeMap::from([
        (AuditField::Genre, signals.genre.clone()),
        (AuditField::SubjectCount, signals.subject_count.to_string()),
        (AuditField::Dynamicity, signals.dynamicity.to_string()),
        (AuditField::ShotCount, signals.shot_count.to_string()),
    ])
}

/// Parses a judge verdict; `None` means the judge abstains.
pub fn parse_verdict(reply: &str) -> Option<FieldLabels> {
    let v: serde_json::Value = serde_json::from_str(unfence(reply)).ok()?;
    let obj = v.as_object()?;
    AuditField::ALL
        .into_iter()
        .map(|f| {
            let label = match obj.get(f.as_str())? {
                serde_json::Value::String(s) => s.trim().to_lowercase(),
                serde_json::Value::Number(n) => n.to_string(),
                _ => return None,
            };
            Some((f, label))
        })
        .collect()
}

/// Every judge's verdict on one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleVotes {
    pub sample_id: String,
    pub truth: FieldLabels,
    /// One entry per judge, `None` when that judge abstained.
    pub votes: Vec<Option<FieldLabels>>,
}

impl SampleVotes {
    /// Unique plurality among cast votes equals the truth. Ties and
    /// all-abstain count as incorrect.
    pub fn majority_correct(&self, field: AuditField) -> bool {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for labels in self.votes.iter().flatten() {
            if let Some(l) = labels.get(&field) {
                *counts.entry(l.as_str()).or_default() += 1;
            }
        }
        let Some(&best) = counts.values().max() else { return false };
        let leaders: Vec<&str> = counts.iter().filter(|(_, &c)| c == best).map(|(l, _)| *l).collect();
        leaders.len() == 1 && Some(leaders[0]) == self.truth.get(&field).map(String::as_str)
    }

    fn judge_correct(&self, judge: usize, field: AuditField) -> bool {
        matches!(&self.votes[judge], Some(l) if l.get(&field) == self.truth.get(&field))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldScore {
    /// Fraction of samples whose majority label matched, in [0, 1].
    pub accuracy: f64,
    /// Population variance of per-judge accuracies.
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalAudit {
    pub per_field: BTreeMap<AuditField, FieldScore>,
    pub judge_count: usize,
    pub samples: usize,
    pub abstentions: usize,
}

impl RetrievalAudit {
    /// Aggregates recorded votes over samples. Every sample must carry the
    /// same number of judges.
    pub fn from_votes(samples: &[SampleVotes]) -> Result<Self, ScreenplayError> {
        let judge_count = samples.first().map_or(0, |s| s.votes.len());
        if judge_count == 0 || samples.iter().any(|s| s.votes.len() != judge_count) {
            return Err(ScreenplayError::NoJudges);
        }
        let n = samples.len() as f64;
        let per_field = AuditField::ALL
            .into_iter()
            .map(|field| {
                let accuracy = samples.iter().filter(|s| s.majority_correct(field)).count() as f64 / n;
                let per_judge: Vec<f64> = (0..judge_count)
                    .map(|j| samples.iter().filter(|s| s.judge_correct(j, field)).count() as f64 / n)
                    .collect();
                let mean = per_judge.iter().sum::<f64>() / judge_count as f64;
                let variance = per_judge.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / judge_count as f64;
                (field, FieldScore { accuracy, variance })
            })
            .collect();
        let abstentions = samples.iter().map(|s| s.votes.iter().filter(|v| v.is_none()).count()).sum();
        Ok(Self { per_field, judge_count, samples: samples.len(), abstentions })
    }
}

/// Asks every judge to recover the control signals from the screenplay text.
pub fn collect_votes(
    screenplay: &Screenplay,
    signals: &ControlSignals,
    judges: &[&GenClient],
    taxonomy: &Taxonomy,
    prompts: &PromptSet,
    seed: u64,
    log: &mut Transcript,
) -> Result<SampleVotes, ScreenplayError> {
    if judges.is_empty() {
        return Err(ScreenplayError::NoJudges);
    }
    let text = screenplay.render_text();
    let vars = BTreeMap::from([("screenplay", text.clone()), ("genres", taxonomy.genres().join(", "))]);
    let prompt = LlmPrompt {
        role: "judge".into(),
        text: render(&prompts.judge, &vars)?,
        schema_hint: Some("control_signals".into()),
        context: json!({ "screenplay": text, "genres": taxonomy.genres() }),
    };
    let mut votes = Vec::with_capacity(judges.len());
    for judge in judges {
        let verdict = match judge.llm_complete(&prompt, seed) {
            Ok(reply) => {
                log.push(Exchange {
                    role: "judge".into(),
                    model_id: judge.model_id().to_string(),
                    prompt: prompt.text.clone(),
                    response: reply.clone(),
                });
                parse_verdict(&reply)
            }
            Err(e) => {
                log::warn!("judge {} failed, abstaining: {e}", judge.model_id());
                None
            }
        };
        votes.push(verdict);
    }
    Ok(SampleVotes { sample_id: signals.sample_id.clone(), truth: truth_labels(signals), votes })
}

/// Single-sample audit: collect every judge's verdict and aggregate.
pub fn audit_screenplay(
    screenplay: &Screenplay,
    signals: &ControlSignals,
    judges: &[&GenClient],
    taxonomy: &Taxonomy,
    prompts: &PromptSet,
    seed: u64,
) -> Result<(RetrievalAudit, SampleVotes), ScreenplayError> {
    let mut log = Vec::new();
    let votes = collect_votes(screenplay, signals, judges, taxonomy, prompts, seed, &mut log)?;
    Ok((RetrievalAudit::from_votes(std::slice::from_ref(&votes))?, votes))
}
