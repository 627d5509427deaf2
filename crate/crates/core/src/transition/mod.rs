//! Seamless transitions between consecutive clips that share a keyframe.
//!
//! Point tracks from both clips are merged on a single timeline whose frame 0
//! is the shared keyframe (clip A occupies negative frames). Near-static
//! frames at the boundary are truncated, a boundary state is estimated on
//! each side, and a cubic Hermite path per point bridges the two states.

mod boundary;
mod field;
mod hermite;
mod stitch;
mod synth;
mod tracks;
mod truncation;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boundary::{estimate_boundary_state, BoundaryEstimate};
pub use field::{build_control_field, farthest_point_order, ControlField, FieldHeader, FieldSample, Trajectory};
pub use hermite::{hermite_eval, hermite_position, hermite_velocity, CompositePath};
pub use stitch::{stitch_sequence, stitch_timeline, ClipRef, Cut, CutList, Join};
pub use synth::{synth_tracks, GroundTruth, MotionProfile, SynthSpec, Synthesized};
pub use tracks::{
    ingest_tracks, merge_bidirectional, reverse_clip_a, PointTrack, RawTrack, TrackMeta, TrackSample, TrackSet,
};
pub use truncation::{detect_truncation, median_displacement, motion_threshold, Truncation};

/// Upper bound on the truncation scan window.
pub const MAX_WINDOW: usize = 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error("malformed track document: {0}")]
    Parse(String),
    #[error("invalid track document: {0}")]
    Invalid(String),
    #[error("point {0} has no sample at the anchor frame")]
    MissingAnchor(u32),
    #[error("point {id} frame {frame}: position ({x}, {y}) outside the {width}x{height} frame")]
    OutOfBounds { id: u32, frame: i64, x: f64, y: f64, width: u32, height: u32 },
    #[error("point {0}: frames are not strictly increasing")]
    NonMonotone(u32),
    #[error("point {id}: frame {frame} lies outside the clip range")]
    FrameOutOfRange { id: u32, frame: i64 },
    #[error("duplicate point id {0}")]
    DuplicatePoint(u32),
    #[error("point {id}: anchor positions differ by {distance:.3}px between directions")]
    AnchorMismatch { id: u32, distance: f64 },
    #[error("invalid transition parameters: {0}")]
    Params(String),
    #[error("scan window {window} exceeds the available {available} frame(s) on a side")]
    WindowTooLarge { window: usize, available: usize },
    #[error("no visible points at frame {frame}")]
    NoVisiblePoints { frame: i64 },
    #[error("normalized time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("no point has a boundary state on both sides")]
    NoEligiblePoints,
    #[error("clip {clip:?} has {got} frame(s), expected {expected}")]
    LengthMismatch { clip: String, got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Position and normalized-time tangent at one end of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryState {
    pub p: Vec2,
    /// Pixels per unit of normalized time: per-frame velocity times `frames`.
    pub v: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransitionParams {
    /// Frames scanned outward from the anchor on each side.
    pub window: usize,
    /// Median displacement, in pixels, below which a frame counts as frozen.
    pub tau: f64,
    pub k_fit: usize,
    /// Transition length in frames.
    pub frames: usize,
    /// Control points handed to the interpolator.
    pub points: usize,
}

impl Default for TransitionParams {
    fn default() -> Self {
        Self { window: MAX_WINDOW, tau: 1.0, k_fit: 5, frames: 16, points: 16 }
    }
}

impl TransitionParams {
    pub fn validate(&self) -> Result<(), TransitionError> {
        let fail = |m: String| Err(TransitionError::Params(m));
        if !(1..=MAX_WINDOW).contains(&self.window) {
            return fail(format!("window must be in 1..={MAX_WINDOW}, got {}", self.window));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if self.k_fit < 2 {
            return fail(format!("k_fit must be at least 2, got {}", self.k_fit));
        }
        if self.frames < 2 {
            return fail(format!("frames must be at least 2, got {}", self.frames));
        }
        if self.points < 1 {
            return fail("points must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionPlan {
    pub cut_a: usize,
    pub cut_b: usize,
    /// Per point: state at the end of clip A and at the start of clip B.
    pub states: BTreeMap<u32, (BoundaryState, BoundaryState)>,
    pub field: ControlField,
    pub warnings: Vec<String>,
}

/// Truncation, boundary estimation on both sides, then the control field.
pub fn plan_transition(ts: &TrackSet, params: &TransitionParams) -> Result<TransitionPlan, TransitionError> {
    params.validate()?;
    let trunc = detect_truncation(ts, params)?;
    let mut warnings = trunc.warnings.clone();
    let cuts = (trunc.cut_a, trunc.cut_b);
    let a = estimate_boundary_state(ts, Side::A, cuts, params)?;
    let b = estimate_boundary_state(ts, Side::B, cuts, params)?;
    warnings.extend(a.warnings);
    warnings.extend(b.warnings);
    let states: BTreeMap<u32, (BoundaryState, BoundaryState)> =
        a.states.iter().filter_map(|(id, sa)| b.states.get(id).map(|sb| (*id, (*sa, *sb)))).collect();
    let anchors: BTreeMap<u32, Vec2> =
        ts.tracks.iter().filter_map(|t| t.sample_at(0).filter(|s| s.visible).map(|s| (t.point_id, s.pos()))).collect();
    let (field, field_warnings) = build_control_field(&states, &anchors, params, ts.width, ts.height)?;
    warnings.extend(field_warnings);
    Ok(TransitionPlan { cut_a: trunc.cut_a, cut_b: trunc.cut_b, states, field, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_bounds() {
        assert!(TransitionParams::default().validate().is_ok());
        for bad in [
            TransitionParams { window: 31, ..Default::default() },
            TransitionParams { window: 0, ..Default::default() },
            TransitionParams { tau: 0.0, ..Default::default() },
            TransitionParams { k_fit: 1, ..Default::default() },
            TransitionParams { frames: 1, ..Default::default() },
            TransitionParams { points: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    fn spec(stall_a: usize, stall_b: usize) -> SynthSpec {
        SynthSpec {
            a: MotionProfile { stall: stall_a, ..MotionProfile::moving(Vec2::new(3.0, 0.0)) },
            b: MotionProfile { stall: stall_b, ..MotionProfile::moving(Vec2::new(0.0, -3.0)) },
            ..SynthSpec::default()
        }
    }

    #[test]
    fn plan_recovers_generator_stalls() {
        let out = synth_tracks(&spec(7, 4), 11);
        let params = TransitionParams { tau: 0.5, ..Default::default() };
        let plan = plan_transition(&out.tracks, &params).unwrap();
        assert_eq!((plan.cut_a, plan.cut_b), (7, 4));
        assert_eq!(plan.field.trajectories.len(), params.points.min(out.tracks.tracks.len()));
        for t in &plan.field.trajectories {
            assert_eq!(t.samples.len(), params.frames);
        }
    }

    #[test]
    fn plan_without_stalls_cuts_nothing() {
        let out = synth_tracks(&spec(0, 0), 2);
        let plan = plan_transition(&out.tracks, &TransitionParams::default()).unwrap();
        assert_eq!((plan.cut_a, plan.cut_b), (0, 0));
        assert!(plan.warnings.is_empty(), "{:?}", plan.warnings);
    }

    #[test]
    fn plan_is_deterministic() {
        let out = synth_tracks(&spec(3, 9), 5);
        let p = TransitionParams::default();
        assert_eq!(plan_transition(&out.tracks, &p).unwrap(), plan_transition(&out.tracks, &p).unwrap());
    }
}
