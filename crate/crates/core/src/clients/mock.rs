//! Deterministic stand-ins for every generative service.
//!
//! All outputs are pure functions of `(payload, seed)` and the referenced input
//! artifacts. Images are solid fields with fiducial markers derived from the
//! request hash; clips are linear cross-fades between their boundary frames,
//! so pixel-level assertions work without any model.

use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use sha2::{Digest as _, Sha256};

use super::media::{Clip, Image};
use super::{Backend, BackendError, BackendOutput, GenKind, GenRequest, ModelEndpoint};

#[derive(Debug, Clone)]
pub struct MockBackend {
    pub width: u32,
    pub height: u32,
    /// Frames per first/last-frame clip.
    pub clip_frames: usize,
    pub fps: u32,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self { width: 64, height: 36, clip_frames: 48, fps: 24 }
    }
}

fn request_hash(request: &GenRequest) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(request.payload.to_string().as_bytes());
    h.update(request.seed.to_le_bytes());
    h.finalize().into()
}

fn text(bytes: String) -> BackendOutput {
    BackendOutput { bytes: bytes.into_bytes(), metadata: json!({ "mock": true }) }
}

fn pick<'a>(options: &[&'a str], h: &[u8; 32], slot: usize) -> &'a str {
    options[h[slot] as usize % options.len()]
}

fn location_for(genre: &str) -> &'static str {
    match genre {
        "documentary" => "a weathered fishing harbour at low tide",
        "drama" => "a cramped kitchen in an old apartment",
        "action" => "a rain-slicked rooftop above a neon city",
        "comedy" => "a cluttered suburban garage",
        "horror" => "a fog-bound chapel at the edge of a forest",
        "romance" => "a riverside promenade strung with paper lanterns",
        "fantasy" => "a moss-covered ruin beneath floating islands",
        "western" => "a dusty main street of a frontier town",
        "classic" => "a marble hotel lobby from the 1940s",
        "animals" => "a sunlit savanna waterhole",
        "sports" => "an empty floodlit stadium track",
        "science fiction" => "the observation deck of an orbital station",
        "war" => "a shell-cratered trench line at dawn",
        _ => "an open plaza",
    }
}

impl MockBackend {
    fn storyteller(&self, ctx: &Value, h: &[u8; 32]) -> String {
        let signals = &ctx["signals"];
        let genre = signals["genre"].as_str().unwrap_or("drama");
        let subjects = signals["subject_count"].as_str().unwrap_or("single");
        let dynamic = signals["dynamicity"].as_str() == Some("dynamic");
        let shots = signals["shot_count"].as_u64().unwrap_or(1);
        let n = match subjects {
            "zero" => 0,
            "single" => 1,
            _ => 2 + (h[0] % 2) as usize,
        };
        let identities = ["a tall rider", "an elderly guide", "a young courier"];
        let attributes = [
            "wearing a long grey coat and a wide-brimmed hat",
            "in a faded red scarf, silver hair tied back",
            "in a yellow rain jacket carrying a satchel",
        ];
        let verbs_still = ["stands watching the horizon", "waits beside a doorway", "sits on a low wall"];
        let verbs_moving = ["strides across the frame", "runs toward the camera", "gestures wildly while walking"];
        let subjects_json: Vec<Value> =
            (0..n).map(|i| json!({ "identity": identities[i], "visual_attributes": attributes[i] })).collect();
        let actions_json: Vec<Value> = (0..n)
            .map(|i| {
                let verb = if dynamic { verbs_moving[i] } else { verbs_still[i] };
                json!({ "subject_ref": identities[i], "verb_phrase": verb })
            })
            .collect();
        let who = match n {
            0 => "no people in view".to_string(),
            1 => format!("a single figure, {}", identities[0]),
            _ => format!("a group of {n} figures"),
        };
        let motion = if dynamic { "everything is in motion" } else { "the scene is motionless and still" };
        let shot_word = if shots == 1 { "shot" } else { "shots" };
        let lighting = pick(
            &[
                "low golden-hour sun from the left",
                "hard overhead noon light",
                "cold blue moonlight",
                "flickering practical lamps",
            ],
            h,
            1,
        );
        let scene = json!({
            "lighting": lighting,
            "location": location_for(genre),
            "subjects": subjects_json,
            "actions": actions_json,
            "subject_positions": if n == 0 { "the frame is empty of subjects; the architecture fills the center".to_string() } else { format!("{} holds the center third of the frame", identities[0]) },
            "crowd_level": match n { 0 => "deserted, no people", 1 => "sparse, one person", _ => "small group, a handful of people" },
            "scenario": format!(
                "A {genre} scene in {}: {who}; {motion}. The sequence unfolds across {shots} {shot_word}.",
                location_for(genre)
            ),
        });
        scene.to_string()
    }

    fn cinematographer(&self, ctx: &Value) -> String {
        let init = ctx["init"].as_str().unwrap_or_default();
        let movement = ctx["movement"].as_str().unwrap_or_default();
        let dir = movement.split_whitespace().nth(1).unwrap_or("");
        let view = match movement.split_whitespace().next().unwrap_or("") {
            "static" => "The camera holds still and the framing is unchanged".to_string(),
            "pan" => format!("The view has swung to the {dir}, revealing new surroundings on that side"),
            "tilt" => format!(
                "The view is angled {dir}, now showing what lies {}",
                if dir == "up" { "above" } else { "below" }
            ),
            "dolly" if dir == "in" => {
                "A tighter, closer framing with the subject filling the frame and the background out of focus"
                    .to_string()
            }
            "dolly" => "A wider framing after pulling back, revealing much more of the surroundings".to_string(),
            "truck" => format!("The camera has slid sideways to the {dir}, shifting the subject across the frame"),
            "pedestal" => format!(
                "The camera has moved {dir} vertically and sees the scene from a {} eye line",
                if dir == "up" { "higher" } else { "lower" }
            ),
            "zoom" if dir == "in" => "A magnified, tighter view of the frame center with compressed depth".to_string(),
            "zoom" => "A wider, de-magnified view bringing more of the scene into frame".to_string(),
            "crane" => format!(
                "A sweeping {} vantage point looking {} on the scene",
                if dir == "up" { "high" } else { "low" },
                if dir == "up" { "down" } else { "up" }
            ),
            "arc" => {
                format!("The camera has orbited to the {dir} around the subject, showing it from a new side angle")
            }
            _ => "The framing has changed".to_string(),
        };
        format!("{view}. Starting view: {init}")
    }

    fn judge(&self, ctx: &Value) -> String {
        let text = ctx["screenplay"].as_str().unwrap_or_default().to_lowercase();
        let labels = |key: &str| -> Vec<String> {
            ctx[key]
                .as_array()
                .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
                .unwrap_or_default()
        };
        let genre = labels("genres")
            .into_iter()
            .filter_map(|g| text.find(&format!("a {g} scene")).map(|pos| (pos, g)))
            .min()
            .map(|(_, g)| g)
            .unwrap_or_default();
        let subject_count = if text.contains("no people in view") {
            "zero"
        } else if text.contains("a single figure") {
            "single"
        } else {
            "multiple"
        };
        let dynamicity = if text.contains("motionless") { "static" } else { "dynamic" };
        let shot_count = text
            .split("across ")
            .nth(1)
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|n| n.parse::<u64>().ok())
            .unwrap_or(1);
        json!({
            "genre": genre,
            "subject_count": subject_count,
            "dynamicity": dynamicity,
            "shot_count": shot_count,
        })
        .to_string()
    }

    fn render(&self, h: &[u8; 32]) -> Image {
        let mut img = Image::filled(self.width, self.height, [h[0], h[1], h[2]]);
        self.fiducials(&mut img, h);
        img
    }

    fn fiducials(&self, img: &mut Image, h: &[u8; 32]) {
        let contrast = [h[0] ^ 0xff, h[1] ^ 0xff, h[2] ^ 0xff];
        let s = (self.height / 9).max(1);
        for (x, y) in [(0, 0), (self.width - s, 0), (0, self.height - s), (self.width - s, self.height - s)] {
            img.fill_rect(x, y, s, s, contrast);
        }
        let cx = h[3] as u32 % (self.width - s);
        let cy = h[4] as u32 % (self.height - s);
        img.fill_rect(cx, cy, s, s, [h[5], h[6], h[7]]);
    }

    fn decode(&self, bytes: &[u8]) -> Result<Image, BackendError> {
        Image::decode_ppm(bytes).map_err(|e| BackendError::Rejected(e.to_string()))
    }

    fn crossfade(&self, a: &Image, b: &Image, count: usize, include_ends: bool) -> Result<Vec<Image>, BackendError> {
        (0..count)
            .map(|i| {
                let t = if include_ends {
                    if count == 1 {
                        0.0
                    } else {
                        i as f64 / (count - 1) as f64
                    }
                } else {
                    (i + 1) as f64 / (count + 1) as f64
                };
                a.lerp(b, t).map_err(|e| BackendError::Rejected(e.to_string()))
            })
            .collect()
    }

    fn clip(&self, frames: Vec<Image>) -> Result<BackendOutput, BackendError> {
        let clip = Clip::new(self.fps, frames).map_err(|e| BackendError::Rejected(e.to_string()))?;
        Ok(BackendOutput { bytes: clip.encode(), metadata: json!({ "mock": true, "frames": clip.len() }) })
    }
}

impl Backend for MockBackend {
    fn call(
        &self,
        _endpoint: &ModelEndpoint,
        request: &GenRequest,
        inputs: &[Vec<u8>],
    ) -> Result<BackendOutput, BackendError> {
        let h = request_hash(request);
        let p = &request.payload;
        match request.kind {
            GenKind::Llm => {
                let ctx = &p["context"];
                let reply = match p["role"].as_str().unwrap_or_default() {
                    "storyteller" => self.storyteller(ctx, &h),
                    "cinematographer" => self.cinematographer(ctx),
                    "judge" => self.judge(ctx),
                    other => return Err(BackendError::Rejected(format!("mock has no role {other:?}"))),
                };
                Ok(text(reply))
            }
            GenKind::T2i => {
                Ok(BackendOutput { bytes: self.render(&h).encode_ppm(), metadata: json!({ "mock": true }) })
            }
            GenKind::I2i => {
                let source = self.decode(&inputs[0])?;
                let mut img = source.lerp(&self.render(&h), 0.5).map_err(|e| BackendError::Rejected(e.to_string()))?;
                self.fiducials(&mut img, &h);
                Ok(BackendOutput { bytes: img.encode_ppm(), metadata: json!({ "mock": true }) })
            }
            GenKind::Flf2v => {
                let (a, b) = (self.decode(&inputs[0])?, self.decode(&inputs[1])?);
                self.clip(self.crossfade(&a, &b, self.clip_frames, true)?)
            }
            GenKind::GuidedInterp => {
                let (a, b) = (self.decode(&inputs[0])?, self.decode(&inputs[1])?);
                let field: Value = serde_json::from_slice(&inputs[2])
                    .map_err(|e| BackendError::Rejected(format!("control field: {e}")))?;
                let frames = field["header"]["frames"]
                    .as_u64()
                    .filter(|&t| t >= 1)
                    .ok_or_else(|| BackendError::Rejected("control field lacks frame count".into()))?
                    as usize;
                let fw = field["header"]["width"].as_f64().unwrap_or(a.width as f64).max(1.0);
                let fh = field["header"]["height"].as_f64().unwrap_or(a.height as f64).max(1.0);
                let mut out = self.crossfade(&a, &b, frames, false)?;
                for traj in field["trajectories"].as_array().into_iter().flatten() {
                    for s in traj["samples"].as_array().into_iter().flatten() {
                        let (Some(i), Some(x), Some(y)) = (s["frame"].as_u64(), s["x"].as_f64(), s["y"].as_f64())
                        else {
                            continue;
                        };
                        if let Some(frame) = out.get_mut(i as usize) {
                            let px = (x / fw * (a.width - 1) as f64).round() as u32;
                            let py = (y / fh * (a.height - 1) as f64).round() as u32;
                            frame.set_pixel(px, py, [255, 255, 255]);
                        }
                    }
                }
                self.clip(out)
            }
        }
    }
}

/// Replies with fixed text, one per call; the last reply repeats.
#[derive(Debug)]
pub struct ScriptedBackend {
    replies: Vec<String>,
    next: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        let replies: Vec<String> = replies.into_iter().map(Into::into).collect();
        assert!(!replies.is_empty(), "scripted backend needs at least one reply");
        Self { replies, next: Mutex::new(0) }
    }

    pub fn calls(&self) -> usize {
        *self.next.lock().unwrap()
    }
}

impl Backend for ScriptedBackend {
    fn call(&self, _: &ModelEndpoint, _: &GenRequest, _: &[Vec<u8>]) -> Result<BackendOutput, BackendError> {
        let mut next = self.next.lock().unwrap();
        let reply = self.replies[(*next).min(self.replies.len() - 1)].clone();
        *next += 1;
        Ok(text(reply))
    }
}

/// Wraps a backend and fails a configurable number of calls first.
pub struct FaultInjector {
    inner: Arc<dyn Backend>,
    /// Failures still to inject; negative means fail forever.
    remaining: AtomicI64,
    calls: AtomicU64,
    error: BackendError,
}

impl FaultInjector {
    pub fn always(inner: Arc<dyn Backend>) -> Self {
        Self::with(inner, -1)
    }

    pub fn first(n: u32, inner: Arc<dyn Backend>) -> Self {
        Self::with(inner, n as i64)
    }

    fn with(inner: Arc<dyn Backend>, remaining: i64) -> Self {
        Self {
            inner,
            remaining: AtomicI64::new(remaining),
            calls: AtomicU64::new(0),
            error: BackendError::Http { status: 503, body: "injected failure".into() },
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    /// Stops injecting failures.
    pub fn heal(&self) {
        self.remaining.store(0, Ordering::SeqCst);
    }
}

impl Backend for FaultInjector {
    fn call(&self, ep: &ModelEndpoint, req: &GenRequest, inputs: &[Vec<u8>]) -> Result<BackendOutput, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let fail = self
            .remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |r| match r {
                r if r < 0 => Some(r),
                0 => None,
                r => Some(r - 1),
            })
            .is_ok();
        if fail {
            Err(self.error.clone())
        } else {
            self.inner.call(ep, req, inputs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clients::{ArtifactStore, GenClient, RetryPolicy, TripletPrompt};

    fn triplet() -> TripletPrompt {
        TripletPrompt { shot_init: "wide".into(), movement: "dolly in".into(), shot_end: "close".into() }
    }

    #[test]
    fn flf2v_clip_starts_and_ends_on_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let store = ArtifactStore::open(dir.path()).unwrap();
        let backend: Arc<dyn Backend> = Arc::new(MockBackend::default());
        let t2i = GenClient::new(
            ModelEndpoint::new("img", GenKind::T2i),
            backend.clone(),
            store.clone(),
            RetryPolicy::immediate(1),
        );
        let vid = GenClient::new(
            ModelEndpoint::new("vid", GenKind::Flf2v),
            backend,
            store.clone(),
            RetryPolicy::immediate(1),
        );
        let a = t2i.image_generate("first", 1).unwrap();
        let b = t2i.image_generate("last", 2).unwrap();
        let clip = Clip::decode(&store.get(&vid.video_flf2v(&a, &b, &triplet(), 0).unwrap()).unwrap()).unwrap();
        assert_eq!(clip.len(), 48);
        assert_eq!(clip.frames[0], Image::decode_ppm(&store.get(&a).unwrap()).unwrap());
        assert_eq!(clip.frames[47], Image::decode_ppm(&store.get(&b).unwrap()).unwrap());
    }

    #[test]
    fn mock_is_pure_in_payload_and_seed() {
        let m = MockBackend::default();
        let ep = ModelEndpoint::new("img", GenKind::T2i);
        let req = GenRequest { kind: GenKind::T2i, payload: json!({"prompt": "p"}), seed: 9 };
        assert_eq!(m.call(&ep, &req, &[]).unwrap(), m.call(&ep, &req, &[]).unwrap());
        let other = GenRequest { seed: 10, ..req.clone() };
        assert_ne!(m.call(&ep, &req, &[]).unwrap().bytes, m.call(&ep, &other, &[]).unwrap().bytes);
    }

    #[test]
    fn guided_interp_emits_header_frame_count() {
        let m = MockBackend::default();
        let ep = ModelEndpoint::new("interp", GenKind::GuidedInterp);
        let a = m.render(&[1; 32]).encode_ppm();
        let b = m.render(&[2; 32]).encode_ppm();
        let field = json!({"header": {"frames": 5, "width": 64, "height": 36}, "trajectories": []}).to_string();
        let req = GenRequest { kind: GenKind::GuidedInterp, payload: json!({}), seed: 0 };
        let out = m.call(&ep, &req, &[a, b, field.into_bytes()]).unwrap();
        assert_eq!(Clip::decode(&out.bytes).unwrap().len(), 5);
    }
}
