use cinepipe_core::clients::Digest;
use cinepipe_core::screenplay::ShotTriplet;
use cinepipe_core::taxonomy::{balance_report, BalanceReport, ControlSignals, Taxonomy};
use serde::{Deserialize, Serialize};

use crate::record::Stage;
use crate::store::RunStore;
use crate::PipelineError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTransition {
    pub clip: Digest,
    pub control_field: Digest,
    pub cut_a: usize,
    pub cut_b: usize,
    pub frames: usize,
    pub window: usize,
}

/// One finished sample with everything needed to trace it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub run_id: String,
    pub signals: ControlSignals,
    pub seed: u64,
    pub scenario: String,
    pub triplets: Vec<ShotTriplet>,
    pub transcript: Digest,
    pub keyframes: Vec<Digest>,
    pub keyframe_models: Vec<String>,
    pub clips: Vec<Digest>,
    pub transitions: Vec<ManifestTransition>,
    pub video: Digest,
    pub cut_list: Digest,
    pub total_frames: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Category counts over the exported samples.
    pub balance: BalanceReport,
    /// Runs left out because they are not final.
    pub skipped: Vec<(String, Stage)>,
}

impl Manifest {
    pub fn to_jsonl(&self) -> String {
        self.entries.iter().map(|e| serde_json::to_string(e).expect("entry serializes") + "\n").collect()
    }
}

pub fn export_manifest(store: &RunStore, taxonomy: &Taxonomy) -> Result<Manifest, PipelineError> {
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for rec in store.list()? {
        let (Stage::Final, Some(sp), Some(sb), Some(out)) = (rec.stage, &rec.screenplay, &rec.storyboard, &rec.output)
        else {
            skipped.push((rec.run_id.clone(), rec.stage));
            continue;
        };
        entries.push(ManifestEntry {
            run_id: rec.run_id.clone(),
            signals: rec.signals.clone(),
            seed: rec.seed,
            scenario: sp.screenplay.scene.scenario.clone(),
            triplets: sp.screenplay.triplets.clone(),
            transcript: sp.transcript.clone(),
            keyframes: sb.keyframes.iter().map(|k| k.image.clone()).collect(),
            keyframe_models: sb.keyframes.iter().map(|k| k.model_id.clone()).collect(),
            clips: rec.clips.iter().map(|c| c.clip.clone()).collect(),
            transitions: rec
                .transitions
                .iter()
                .map(|t| ManifestTransition {
                    clip: t.clip.clone(),
                    control_field: t.control_field.clone(),
                    cut_a: t.cut_a,
                    cut_b: t.cut_b,
                    frames: t.frames,
                    window: t.window,
                })
                .collect(),
            video: out.video.clone(),
            cut_list: out.cut_list_ref.clone(),
            total_frames: out.total_frames,
            warnings: rec.warnings(),
        });
    }
    let signals: Vec<ControlSignals> = entries.iter().map(|e| e.signals.clone()).collect();
    Ok(Manifest { balance: balance_report(&signals, taxonomy), entries, skipped })
}
