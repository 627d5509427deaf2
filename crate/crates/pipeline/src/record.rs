use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use cinepipe_core::clients::Digest;
use cinepipe_core::screenplay::{SampleVotes, Screenplay};
use cinepipe_core::storyboard::Storyboard;
use cinepipe_core::taxonomy::ControlSignals;
use cinepipe_core::transition::CutList;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Planned,
    Screenplay,
    Storyboard,
    Clips,
    Transitions,
    Final,
    Failed,
}

impl Stage {
    pub const ORDER: [Stage; 6] =
        [Stage::Planned, Stage::Screenplay, Stage::Storyboard, Stage::Clips, Stage::Transitions, Stage::Final];

    pub fn next(self) -> Option<Stage> {
        let i = Self::ORDER.iter().position(|s| *s == self)?;
        Self::ORDER.get(i + 1).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Planned => "planned",
            Stage::Screenplay => "screenplay",
            Stage::Storyboard => "storyboard",
            Stage::Clips => "clips",
            Stage::Transitions => "transitions",
            Stage::Final => "final",
            Stage::Failed => "failed",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ORDER
            .into_iter()
            .chain([Stage::Failed])
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateState {
    Auto,
    AwaitingApproval,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenplayArtifact {
    pub screenplay: Screenplay,
    /// Every model exchange that produced the screenplay, as JSON.
    pub transcript: Digest,
    #[serde(default)]
    pub votes: Option<SampleVotes>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipArtifact {
    pub clip: Digest,
    pub frames: usize,
    pub model_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionArtifact {
    pub tracks: Digest,
    pub control_field: Digest,
    /// Retained boundary frames handed to the interpolator.
    pub first: Digest,
    pub last: Digest,
    pub clip: Digest,
    pub cut_a: usize,
    pub cut_b: usize,
    pub frames: usize,
    pub window: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalArtifact {
    pub cut_list: CutList,
    pub cut_list_ref: Digest,
    pub video: Digest,
    pub total_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    /// The stage that was being executed.
    pub stage: Stage,
    /// The last stage whose artifacts are intact.
    pub completed: Stage,
    pub message: String,
    pub at: DateTime<Utc>,
}

/// Checkpointed state of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub signals: ControlSignals,
    pub seed: u64,
    /// Last completed stage, or `Failed`.
    pub stage: Stage,
    #[serde(default)]
    pub failure: Option<Failure>,
    /// Gate state of every gated stage that has been reached.
    #[serde(default)]
    pub gates: BTreeMap<Stage, GateState>,
    #[serde(default)]
    pub revisions: BTreeMap<Stage, u32>,
    #[serde(default)]
    pub screenplay: Option<ScreenplayArtifact>,
    #[serde(default)]
    pub storyboard: Option<Storyboard>,
    #[serde(default)]
    pub clips: Vec<ClipArtifact>,
    #[serde(default)]
    pub transitions: Vec<TransitionArtifact>,
    #[serde(default)]
    pub output: Option<FinalArtifact>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl RunRecord {
    pub fn new(run_id: String, signals: ControlSignals, seed: u64) -> Self {
        let now = Utc::now();
        Self {
            run_id,
            signals,
            seed,
            stage: Stage::Planned,
            failure: None,
            gates: BTreeMap::new(),
            revisions: BTreeMap::new(),
            screenplay: None,
            storyboard: None,
            clips: vec![],
            transitions: vec![],
            output: None,
            created_at: now,
            updated_at: now,
        }
    }

    /// Last stage whose artifacts are complete, even after a failure.
    pub fn completed(&self) -> Stage {
        match (&self.stage, &self.failure) {
            (Stage::Failed, Some(f)) => f.completed,
            (s, _) => *s,
        }
    }

    pub fn gate(&self, stage: Stage) -> GateState {
        self.gates.get(&stage).copied().unwrap_or(GateState::Auto)
    }

    pub fn revision(&self, stage: Stage) -> u32 {
        self.revisions.get(&stage).copied().unwrap_or(0)
    }

    pub fn is_paused(&self) -> bool {
        matches!(self.gate(self.stage), GateState::AwaitingApproval | GateState::Rejected)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.transitions.iter().flat_map(|t| t.warnings.iter().cloned()).collect()
    }

    /// Drops artifacts of stages after `stage`.
    pub fn truncate_after(&mut self, stage: Stage) {
        if stage < Stage::Screenplay {
            self.screenplay = None;
        }
        if stage < Stage::Storyboard {
            self.storyboard = None;
        }
        if stage < Stage::Clips {
            self.clips.clear();
        }
        if stage < Stage::Transitions {
            self.transitions.clear();
        }
        if stage < Stage::Final {
            self.output = None;
        }
    }
}

/// One line of a run's append-only provenance log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub at: DateTime<Utc>,
    pub event: String,
    #[serde(default)]
    pub stage: Option<Stage>,
    #[serde(default)]
    pub detail: serde_json::Value,
}

impl RunEvent {
    pub fn new(event: &str, stage: Option<Stage>, detail: serde_json::Value) -> Self {
        Self { at: Utc::now(), event: event.to_string(), stage, detail }
    }
}
