use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{TransitionError, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    #[serde(rename = "f")]
    pub frame: i64,
    pub x: f64,
    pub y: f64,
    #[serde(default = "visible_default")]
    pub visible: bool,
}

fn visible_default() -> bool {
    true
}

impl TrackSample {
    pub fn new(frame: i64, x: f64, y: f64) -> Self {
        Self { frame, x, y, visible: true }
    }

    pub fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTrack {
    #[serde(rename = "id")]
    pub point_id: u32,
    #[serde(rename = "frames")]
    pub samples: Vec<TrackSample>,
}

impl PointTrack {
    pub fn sample_at(&self, frame: i64) -> Option<&TrackSample> {
        self.samples.binary_search_by_key(&frame, |s| s.frame).ok().map(|i| &self.samples[i])
    }

    /// Position at `frame` when the point is visible there.
    pub fn visible_at(&self, frame: i64) -> Option<Vec2> {
        self.sample_at(frame).filter(|s| s.visible).map(TrackSample::pos)
    }
}

/// Frame geometry and clip lengths shared by a merged track set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackMeta {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub clip_a_len: usize,
    pub clip_b_len: usize,
}

/// Tracks on the merged timeline: clip A spans frames `-(clip_a_len-1)..=0`,
/// clip B spans `0..=clip_b_len-1`, and frame 0 is the shared keyframe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackSet {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub clip_a_len: usize,
    pub clip_b_len: usize,
    #[serde(rename = "points")]
    pub tracks: Vec<PointTrack>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackDocument {
    width: u32,
    height: u32,
    fps: f64,
    clip_a_len: usize,
    clip_b_len: usize,
    points: Vec<PointTrack>,
}

impl TrackSet {
    pub fn new(meta: TrackMeta, tracks: Vec<PointTrack>) -> Result<Self, TransitionError> {
        let TrackMeta { width, height, fps, clip_a_len, clip_b_len } = meta;
        if width == 0 || height == 0 {
            return Err(TransitionError::Invalid("frame size must be positive".into()));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(TransitionError::Invalid(format!("fps must be positive, got {fps}")));
        }
        if clip_a_len == 0 || clip_b_len == 0 {
            return Err(TransitionError::Invalid("clip lengths must be positive".into()));
        }
        let lo = -(clip_a_len as i64 - 1);
        let hi = clip_b_len as i64 - 1;
        let mut ids = BTreeSet::new();
        for t in &tracks {
            let id = t.point_id;
            if !ids.insert(id) {
                return Err(TransitionError::DuplicatePoint(id));
            }
            if t.samples.windows(2).any(|w| w[0].frame >= w[1].frame) {
                return Err(TransitionError::NonMonotone(id));
            }
            for s in &t.samples {
                if !(lo..=hi).contains(&s.frame) {
                    return Err(TransitionError::FrameOutOfRange { id, frame: s.frame });
                }
                let finite = s.x.is_finite() && s.y.is_finite();
                let inside = (0.0..=width as f64).contains(&s.x) && (0.0..=height as f64).contains(&s.y);
                if !finite || (s.visible && !inside) {
                    return Err(TransitionError::OutOfBounds { id, frame: s.frame, x: s.x, y: s.y, width, height });
                }
            }
            if t.sample_at(0).is_none() {
                return Err(TransitionError::MissingAnchor(id));
            }
        }
        Ok(Self { width, height, fps, clip_a_len, clip_b_len, tracks })
    }

    pub fn meta(&self) -> TrackMeta {
        TrackMeta {
            width: self.width,
            height: self.height,
            fps: self.fps,
            clip_a_len: self.clip_a_len,
            clip_b_len: self.clip_b_len,
        }
    }

    pub fn track(&self, id: u32) -> Option<&PointTrack> {
        self.tracks.iter().find(|t| t.point_id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("track set serializes")
    }
}

/// Parses and validates a track exchange document.
pub fn ingest_tracks(document: &str) -> Result<TrackSet, TransitionError> {
    let doc: TrackDocument = serde_json::from_str(document).map_err(|e| TransitionError::Parse(e.to_string()))?;
    let meta = TrackMeta {
        width: doc.width,
        height: doc.height,
        fps: doc.fps,
        clip_a_len: doc.clip_a_len,
        clip_b_len: doc.clip_b_len,
    };
    TrackSet::new(meta, doc.points)
}

/// Tracker output in one direction; frame 0 is the anchor and frames count
/// away from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTrack {
    pub point_id: u32,
    pub samples: Vec<TrackSample>,
}

/// Joins backward tracks (run on reversed clip A) and forward tracks (run on
/// clip B). Ids seen in only one direction are dropped with a warning.
pub fn merge_bidirectional(
    back: &[RawTrack],
    fwd: &[RawTrack],
    meta: TrackMeta,
    epsilon: f64,
) -> Result<(TrackSet, Vec<String>), TransitionError> {
    let mut warnings = Vec::new();
    let fwd_by_id: BTreeMap<u32, &RawTrack> = fwd.iter().map(|t| (t.point_id, t)).collect();
    let back_ids: BTreeSet<u32> = back.iter().map(|t| t.point_id).collect();
    for id in fwd_by_id.keys().filter(|id| !back_ids.contains(id)) {
        warnings.push(format!("point {id} tracked forward only; dropped"));
    }
    let mut merged = Vec::new();
    for b in back {
        let id = b.point_id;
        let Some(f) = fwd_by_id.get(&id) else {
            warnings.push(format!("point {id} tracked backward only; dropped"));
            continue;
        };
        let anchor_b = b.samples.iter().find(|s| s.frame == 0).ok_or(TransitionError::MissingAnchor(id))?;
        let anchor_f = f.samples.iter().find(|s| s.frame == 0).ok_or(TransitionError::MissingAnchor(id))?;
        let distance = (anchor_b.pos() - anchor_f.pos()).norm();
        if distance > epsilon {
            return Err(TransitionError::AnchorMismatch { id, distance });
        }
        let mut samples: Vec<TrackSample> =
            b.samples.iter().rev().map(|s| TrackSample { frame: -s.frame, ..*s }).collect();
        samples.extend(f.samples.iter().filter(|s| s.frame > 0).copied());
        merged.push(PointTrack { point_id: id, samples });
    }
    Ok((TrackSet::new(meta, merged)?, warnings))
}

/// Recovers the backward-direction tracks from a merged set.
pub fn reverse_clip_a(ts: &TrackSet) -> Vec<RawTrack> {
    ts.tracks
        .iter()
        .map(|t| RawTrack {
            point_id: t.point_id,
            samples: t
                .samples
                .iter()
                .rev()
                .filter(|s| s.frame <= 0)
                .map(|s| TrackSample { frame: -s.frame, ..*s })
                .collect(),
        })
        .collect()
}
