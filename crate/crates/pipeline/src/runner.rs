use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use cinepipe_core::clients::media::Clip;
use cinepipe_core::clients::{Digest, GenClient, Provenance, TripletPrompt};
use cinepipe_core::prompts::PromptSet;
use cinepipe_core::screenplay::{collect_votes, ShotTriplet, Transcript, Writer};
use cinepipe_core::storyboard::{build_routing, generate_storyboard, resolve_clients, RoutingTable, ScoreMatrix};
use cinepipe_core::taxonomy::{ControlSignals, Taxonomy};
use cinepipe_core::transition::{plan_transition, stitch_sequence, ClipRef, Join, TransitionParams};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clients::{default_backend, BackendFactory, Clients};
use crate::config::PipelineConfig;
use crate::record::{
    ClipArtifact, Failure, FinalArtifact, GateState, RunEvent, RunRecord, ScreenplayArtifact, Stage, TransitionArtifact,
};
use crate::store::{valid_run_id, RunStore};
use crate::tracker::{SyntheticTracker, TrackSource};
use crate::PipelineError;

/// Reviewer feedback on a paused stage. `scenario` and `triplets` edit the
/// screenplay; `regenerate_keyframes` marks storyboard frames for redoing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rejection {
    pub scenario: Option<String>,
    pub triplets: Option<Vec<ShotTriplet>>,
    pub regenerate_keyframes: Vec<usize>,
    pub note: Option<String>,
}

impl Rejection {
    fn has_edits(&self) -> bool {
        self.scenario.is_some() || self.triplets.is_some() || !self.regenerate_keyframes.is_empty()
    }
}

fn seed_of(text: &str) -> u64 {
    let d = Digest::of(text.as_bytes());
    u64::from_str_radix(&d.as_str()[..16], 16).expect("hex digest")
}

/// Per-sample seed, independent of batch order.
pub fn run_seed(base: u64, run_id: &str) -> u64 {
    seed_of(&format!("{base}:{run_id}"))
}

pub fn stage_seed(run_seed: u64, stage: Stage, revision: u32) -> u64 {
    seed_of(&format!("{run_seed}:{stage}:{revision}"))
}

pub struct Pipeline {
    cfg: PipelineConfig,
    store: RunStore,
    taxonomy: Taxonomy,
    prompts: PromptSet,
    routing: RoutingTable,
    clients: Clients,
    tracker: Arc<dyn TrackSource>,
    gated: BTreeSet<Stage>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("root", &self.store.root()).finish_non_exhaustive()
    }
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, store: RunStore) -> Result<Self, PipelineError> {
        Self::with_parts(cfg, store, &default_backend, Arc::new(SyntheticTracker::default()))
    }

    pub fn with_parts(
        cfg: PipelineConfig,
        store: RunStore,
        backend_for: &BackendFactory,
        tracker: Arc<dyn TrackSource>,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let read = |p: &std::path::Path| {
            std::fs::read_to_string(p).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))
        };
        let taxonomy = match &cfg.taxonomy {
            Some(p) => Taxonomy::load(&read(p)?)?,
            None => Taxonomy::default_taxonomy(),
        };
        let prompts = match &cfg.prompts {
            Some(dir) => PromptSet::load_dir(dir)?,
            None => PromptSet::default(),
        };
        let scores = match &cfg.scores {
            Some(p) => ScoreMatrix::load(&read(p)?)?,
            None => ScoreMatrix::shipped(),
        };
        let routing = build_routing(&scores, cfg.tie_break)?;
        let clients = Clients::build(&cfg, store.cas(), &routing, backend_for)?;
        let gated = cfg.gates.gated();
        Ok(Self { cfg, store, taxonomy, prompts, routing, clients, tracker, gated, locks: Mutex::default() })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn routing(&self) -> &RoutingTable {
        &self.routing
    }

    pub fn clients(&self) -> &Clients {
        &self.clients
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        self.locks.lock().unwrap().entry(id.to_string()).or_default().clone()
    }

    fn event(&self, id: &str, event: &str, stage: Option<Stage>, detail: serde_json::Value) {
        if let Err(e) = self.store.append_event(id, &RunEvent::new(event, stage, detail)) {
            log::warn!("could not log {event} for {id}: {e}");
        }
    }

    /// Creates a record for every sample that has none yet. Returns the ids
    /// in input order; existing runs are left untouched.
    pub fn plan(&self, samples: &[ControlSignals]) -> Result<Vec<String>, PipelineError> {
        let mut seen = BTreeSet::new();
        for s in samples {
            if !valid_run_id(&s.sample_id) {
                return Err(PipelineError::BadRequest(format!("invalid sample id {:?}", s.sample_id)));
            }
            if !seen.insert(&s.sample_id) {
                return Err(PipelineError::BadRequest(format!("duplicate sample id {:?}", s.sample_id)));
            }
            self.taxonomy.validate(s)?;
        }
        for s in samples {
            let lock = self.lock(&s.sample_id);
            let _guard = lock.lock().unwrap();
            if self.store.exists(&s.sample_id) {
                continue;
            }
            let mut rec = RunRecord::new(s.sample_id.clone(), s.clone(), run_seed(self.cfg.seed, &s.sample_id));
            self.store.save(&mut rec)?;
            self.event(&rec.run_id, "planned", Some(Stage::Planned), json!({ "seed": rec.seed }));
        }
        Ok(samples.iter().map(|s| s.sample_id.clone()).collect())
    }

    pub fn load(&self, id: &str) -> Result<RunRecord, PipelineError> {
        self.store.load(id)
    }

    /// Advances a run until it is final, paused at a gate, or failed.
    pub fn run(&self, id: &str) -> Result<RunRecord, PipelineError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.store.load(id)?;
        self.advance(&mut rec)?;
        Ok(rec)
    }

    /// Like [`run`](Self::run), but first restores a failed run to its last
    /// completed stage. Completed artifacts are reused as they are.
    pub fn resume(&self, id: &str) -> Result<RunRecord, PipelineError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.store.load(id)?;
        if let (Stage::Failed, Some(failure)) = (rec.stage, rec.failure.take()) {
            rec.stage = failure.completed;
            self.store.save(&mut rec)?;
            self.event(id, "resumed", Some(failure.completed), json!({ "after": failure.message }));
        }
        self.advance(&mut rec)?;
        Ok(rec)
    }

    fn advance(&self, rec: &mut RunRecord) -> Result<(), PipelineError> {
        loop {
            if rec.stage == Stage::Failed || rec.is_paused() {
                return Ok(());
            }
            let Some(next) = rec.stage.next() else { return Ok(()) };
            log::info!("{}: running {next}", rec.run_id);
            match self.execute(next, rec) {
                Ok(()) => {
                    rec.stage = next;
                    if self.gated.contains(&next) {
                        rec.gates.insert(next, GateState::AwaitingApproval);
                    }
                    self.store.save(rec)?;
                    self.event(&rec.run_id, "stage_completed", Some(next), json!({ "revision": rec.revision(next) }));
                    if rec.is_paused() {
                        self.event(&rec.run_id, "awaiting_approval", Some(next), json!(null));
                    }
                }
                Err(e) => {
                    log::warn!("{}: {next} failed: {e}", rec.run_id);
                    let completed = rec.stage;
                    rec.truncate_after(completed);
                    rec.failure =
                        Some(Failure { stage: next, completed, message: e.to_string(), at: chrono::Utc::now() });
                    rec.stage = Stage::Failed;
                    self.store.save(rec)?;
                    self.event(&rec.run_id, "stage_failed", Some(next), json!({ "error": e.to_string() }));
                    return Ok(());
                }
            }
        }
    }

    fn paused_at(&self, rec: &RunRecord, stage: Stage, allowed: &[GateState]) -> Result<(), PipelineError> {
        if rec.stage != stage || !allowed.contains(&rec.gate(stage)) {
            return Err(PipelineError::Conflict(format!(
                "run {} is at {} (gate {:?}), not paused at {stage}",
                rec.run_id,
                rec.stage,
                rec.gate(rec.stage)
            )));
        }
        Ok(())
    }

    /// Opens the gate; the caller continues the run with [`run`](Self::run).
    pub fn approve(&self, id: &str, stage: Stage) -> Result<RunRecord, PipelineError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.store.load(id)?;
        self.paused_at(&rec, stage, &[GateState::AwaitingApproval])?;
        rec.gates.insert(stage, GateState::Approved);
        self.store.save(&mut rec)?;
        self.event(id, "approved", Some(stage), json!(null));
        Ok(rec)
    }

    /// Without edits the gate becomes `Rejected` until the stage is
    /// regenerated. Screenplay edits are applied in place, bump the revision
    /// and leave the gate awaiting approval of the edited text.
    pub fn reject(&self, id: &str, stage: Stage, rejection: Rejection) -> Result<RunRecord, PipelineError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.store.load(id)?;
        self.paused_at(&rec, stage, &[GateState::AwaitingApproval, GateState::Rejected])?;
        if !rejection.has_edits() {
            rec.gates.insert(stage, GateState::Rejected);
            self.store.save(&mut rec)?;
            self.event(id, "rejected", Some(stage), json!({ "note": rejection.note }));
            return Ok(rec);
        }
        let event = match stage {
            Stage::Screenplay if rejection.regenerate_keyframes.is_empty() => {
                self.edit_screenplay(&mut rec, &rejection)?;
                "edited"
            }
            Stage::Storyboard if rejection.scenario.is_none() && rejection.triplets.is_none() => {
                *rec.revisions.entry(stage).or_default() += 1;
                self.redo_keyframes(&mut rec, &rejection.regenerate_keyframes)?;
                "keyframes_regenerated"
            }
            _ => return Err(PipelineError::BadRequest(format!("these edits do not apply to {stage}"))),
        };
        if stage == Stage::Screenplay {
            *rec.revisions.entry(stage).or_default() += 1;
        }
        rec.gates.insert(stage, GateState::AwaitingApproval);
        self.store.save(&mut rec)?;
        let detail = json!({ "revision": rec.revision(stage), "edit": rejection });
        self.event(id, event, Some(stage), detail);
        Ok(rec)
    }

    fn edit_screenplay(&self, rec: &mut RunRecord, rejection: &Rejection) -> Result<(), PipelineError> {
        let art = rec.screenplay.as_mut().ok_or_else(|| PipelineError::Invariant("screenplay missing".into()))?;
        let mut edited = art.screenplay.clone();
        if let Some(s) = &rejection.scenario {
            if s.trim().is_empty() {
                return Err(PipelineError::BadRequest("scenario must not be empty".into()));
            }
            edited.scene.scenario = s.clone();
        }
        if let Some(t) = &rejection.triplets {
            edited.triplets = t.clone();
        }
        if edited.triplets.iter().map(|t| &t.movement).ne(rec.signals.movements.iter()) {
            return Err(PipelineError::BadRequest("edited triplets must keep the sampled movements".into()));
        }
        edited.check().map_err(|e| PipelineError::BadRequest(e.to_string()))?;
        art.screenplay = edited;
        art.votes = None;
        Ok(())
    }

    /// Redraws the earliest marked keyframe under the current revision seed,
    /// then every later one, since each frame is edited from its predecessor.
    /// Earlier keyframes are kept byte for byte.
    fn redo_keyframes(&self, rec: &mut RunRecord, marked: &[usize]) -> Result<(), PipelineError> {
        let seed = self.seed(rec, Stage::Storyboard);
        let sp =
            &rec.screenplay.as_ref().ok_or_else(|| PipelineError::Invariant("screenplay missing".into()))?.screenplay;
        let board = rec.storyboard.as_mut().ok_or_else(|| PipelineError::Invariant("storyboard missing".into()))?;
        let n = board.keyframes.len();
        if let Some(bad) = marked.iter().find(|&&k| k >= n) {
            return Err(PipelineError::BadRequest(format!("keyframe {bad} does not exist ({n} keyframes)")));
        }
        let from = *marked.iter().min().expect("non-empty");
        let editors = resolve_clients(sp, &self.routing, &self.taxonomy, &self.clients.i2i)?;
        for k in from..n {
            let kf_seed = seed.wrapping_add(k as u64);
            let kf = &mut board.keyframes[k];
            if k == 0 {
                kf.image = self.clients.t2i.image_generate(&kf.prompt, kf_seed)?;
            } else {
                let source = board.keyframes[k - 1].image.clone();
                let kf = &mut board.keyframes[k];
                kf.image = editors[k - 1].image_edit(&source, &kf.prompt, kf_seed)?;
                kf.source = Some(source);
            }
            board.keyframes[k].seed = kf_seed;
        }
        Ok(())
    }

    /// Discards the stage's artifacts and reruns it under a new revision seed.
    pub fn regenerate(&self, id: &str, stage: Stage) -> Result<RunRecord, PipelineError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap();
        let mut rec = self.store.load(id)?;
        self.paused_at(&rec, stage, &[GateState::AwaitingApproval, GateState::Rejected])?;
        let previous = Stage::ORDER[Stage::ORDER.iter().position(|s| *s == stage).expect("gated stage") - 1];
        *rec.revisions.entry(stage).or_default() += 1;
        rec.gates.remove(&stage);
        rec.truncate_after(previous);
        rec.stage = previous;
        self.store.save(&mut rec)?;
        self.event(id, "regenerate", Some(stage), json!({ "revision": rec.revision(stage) }));
        self.advance(&mut rec)?;
        Ok(rec)
    }

    fn seed(&self, rec: &RunRecord, stage: Stage) -> u64 {
        stage_seed(rec.seed, stage, rec.revision(stage))
    }

    fn execute(&self, stage: Stage, rec: &mut RunRecord) -> Result<(), PipelineError> {
        match stage {
            Stage::Screenplay => self.stage_screenplay(rec),
            Stage::Storyboard => self.stage_storyboard(rec),
            Stage::Clips => self.stage_clips(rec),
            Stage::Transitions => self.stage_transitions(rec),
            Stage::Final => self.stage_final(rec),
            Stage::Planned | Stage::Failed => Err(PipelineError::Invariant(format!("{stage} is not executable"))),
        }
    }

    fn put_json(&self, producer: &str, kind: &str, body: &[u8], inputs: Vec<Digest>) -> Result<Digest, PipelineError> {
        Ok(self.store.cas().put(body, &Provenance::local(producer, kind, body, inputs))?)
    }

    fn load_clip(&self, digest: &Digest) -> Result<Clip, PipelineError> {
        Ok(Clip::decode(&self.store.cas().get(digest)?)?)
    }

    fn stage_screenplay(&self, rec: &mut RunRecord) -> Result<(), PipelineError> {
        let seed = self.seed(rec, Stage::Screenplay);
        let writer = Writer::new(&self.taxonomy, &self.prompts);
        let mut log: Transcript = Vec::new();
        let c = &self.clients;
        let scene = writer.compose_scene(&rec.signals, &c.storyteller, seed, &mut log)?;
        let screenplay = writer.build_screenplay(&scene, &rec.signals, &c.cinematographer, seed, &mut log)?;
        let votes = if c.judges.is_empty() {
            None
        } else {
            let judges: Vec<&GenClient> = c.judges.iter().collect();
            Some(collect_votes(&screenplay, &rec.signals, &judges, &self.taxonomy, &self.prompts, seed, &mut log)?)
        };
        let body = serde_json::to_vec_pretty(&log).expect("transcript serializes");
        let transcript = self.put_json("screenplay", "transcript", &body, vec![])?;
        rec.screenplay = Some(ScreenplayArtifact { screenplay, transcript, votes });
        Ok(())
    }

    fn stage_storyboard(&self, rec: &mut RunRecord) -> Result<(), PipelineError> {
        let seed = self.seed(rec, Stage::Storyboard);
        let sp =
            &rec.screenplay.as_ref().ok_or_else(|| PipelineError::Invariant("screenplay missing".into()))?.screenplay;
        let c = &self.clients;
        let board = generate_storyboard(sp, &self.routing, &self.taxonomy, &c.t2i, &c.i2i, seed)?;
        if board.keyframes.len() != sp.triplets.len() + 1 {
            return Err(PipelineError::Invariant(format!(
                "{} keyframes for {} shots",
                board.keyframes.len(),
                sp.triplets.len()
            )));
        }
        rec.storyboard = Some(board);
        Ok(())
    }

    fn stage_clips(&self, rec: &mut RunRecord) -> Result<(), PipelineError> {
        let seed = self.seed(rec, Stage::Clips);
        let sp =
            &rec.screenplay.as_ref().ok_or_else(|| PipelineError::Invariant("screenplay missing".into()))?.screenplay;
        let kf =
            &rec.storyboard.as_ref().ok_or_else(|| PipelineError::Invariant("storyboard missing".into()))?.keyframes;
        let flf2v = &self.clients.flf2v;
        let mut clips = Vec::with_capacity(sp.triplets.len());
        for (i, t) in sp.triplets.iter().enumerate() {
            let prompt = TripletPrompt {
                shot_init: t.shot_init.clone(),
                movement: t.movement.clone(),
                shot_end: t.shot_end.clone(),
            };
            let clip_seed = seed.wrapping_add(i as u64);
            let clip = flf2v.video_flf2v(&kf[i].image, &kf[i + 1].image, &prompt, clip_seed)?;
            let frames = self.load_clip(&clip)?.len();
            clips.push(ClipArtifact { clip, frames, model_id: flf2v.model_id().to_string(), seed: clip_seed });
        }
        rec.clips = clips;
        Ok(())
    }

    fn stage_transitions(&self, rec: &mut RunRecord) -> Result<(), PipelineError> {
        let seed = self.seed(rec, Stage::Transitions);
        let mut out = Vec::with_capacity(rec.clips.len().saturating_sub(1));
        for (i, pair) in rec.clips.windows(2).enumerate() {
            let join_seed = seed.wrapping_add(i as u64);
            out.push(self.transition(&pair[0].clip, &pair[1].clip, join_seed)?);
        }
        rec.transitions = out;
        Ok(())
    }

    /// Tracks across one cut, plans the bridge and renders it.
    fn transition(&self, a_ref: &Digest, b_ref: &Digest, seed: u64) -> Result<TransitionArtifact, PipelineError> {
        let (a, b) = (self.load_clip(a_ref)?, self.load_clip(b_ref)?);
        let mut warnings = Vec::new();
        let cap = a.len().min(b.len()).saturating_sub(1);
        let params = TransitionParams { window: self.cfg.transition.window.min(cap), ..self.cfg.transition };
        if params.window < self.cfg.transition.window {
            warnings.push(format!(
                "scan window reduced from {} to {} for clips of {} and {} frames",
                self.cfg.transition.window,
                params.window,
                a.len(),
                b.len()
            ));
        }
        let track_seed = seed ^ seed_of(&format!("{a_ref}:{b_ref}"));
        let tracks = self.tracker.track(&a, &b, track_seed)?;
        let plan = plan_transition(&tracks, &params)?;
        warnings.extend(plan.warnings.iter().cloned());
        let tracks_ref =
            self.put_json("tracker", "tracks", tracks.to_json().as_bytes(), vec![a_ref.clone(), b_ref.clone()])?;
        let field_ref =
            self.put_json("planner", "control_field", plan.field.to_json().as_bytes(), vec![tracks_ref.clone()])?;
        let first_img = a.frame(a.len() - 1 - plan.cut_a)?.encode_ppm();
        let last_img = b.frame(plan.cut_b)?.encode_ppm();
        let first = self.put_json("trim", "frame", &first_img, vec![a_ref.clone()])?;
        let last = self.put_json("trim", "frame", &last_img, vec![b_ref.clone()])?;
        let clip = self.clients.guided.guided_interpolate(&first, &last, &field_ref, seed)?;
        let frames = self.load_clip(&clip)?.len();
        if frames != params.frames {
            return Err(PipelineError::Invariant(format!(
                "interpolator returned {frames} frames, expected {}",
                params.frames
            )));
        }
        Ok(TransitionArtifact {
            tracks: tracks_ref,
            control_field: field_ref,
            first,
            last,
            clip,
            cut_a: plan.cut_a,
            cut_b: plan.cut_b,
            frames,
            window: params.window,
            warnings,
        })
    }

    fn stage_final(&self, rec: &mut RunRecord) -> Result<(), PipelineError> {
        let clips: Vec<ClipRef> = rec.clips.iter().map(|c| ClipRef::new(c.clip.as_str(), c.frames)).collect();
        let joins: Vec<Join> = rec
            .transitions
            .iter()
            .map(|t| Join {
                cut_a: t.cut_a,
                cut_b: t.cut_b,
                transition: ClipRef::new(t.clip.as_str(), t.frames),
                frames: t.frames,
            })
            .collect();
        let cut_list = stitch_sequence(&clips, &joins)?;
        let mut sources: BTreeMap<String, Clip> = BTreeMap::new();
        let mut frames = Vec::with_capacity(cut_list.total_frames);
        let mut fps = 24;
        for cut in &cut_list.cuts {
            if !sources.contains_key(&cut.source) {
                let d: Digest = cut.source.parse()?;
                sources.insert(cut.source.clone(), self.load_clip(&d)?);
            }
            let src = &sources[&cut.source];
            fps = src.fps;
            for f in cut.start..=cut.end {
                frames.push(src.frame(f)?.clone());
            }
        }
        let video = Clip::new(fps, frames)?;
        if video.len() != cut_list.total_frames {
            return Err(PipelineError::Invariant("assembled length differs from the cut list".into()));
        }
        let inputs: Vec<Digest> = sources.keys().map(|k| k.parse()).collect::<Result<_, _>>()?;
        let list_body = serde_json::to_vec_pretty(&cut_list).expect("cut list serializes");
        let cut_list_ref = self.put_json("stitch", "cut_list", &list_body, inputs.clone())?;
        let video_ref = self.put_json("stitch", "video", &video.encode(), inputs)?;
        rec.output =
            Some(FinalArtifact { total_frames: cut_list.total_frames, cut_list, cut_list_ref, video: video_ref });
        Ok(())
    }
}
