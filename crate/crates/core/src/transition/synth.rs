use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PointTrack, TrackMeta, TrackSample, TrackSet, Vec2};

/// Motion of every point on one side of the anchor.
///
/// Moving outward from the anchor, displacement stays at zero (plus jitter)
/// for `stall` frames, jumps to `floor`, then grows at `velocity` per frame
/// after an `ease` ramp. `floor - jitter` must exceed the truncation
/// threshold for `stall` to be the recoverable cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    /// Timeline-direction velocity in pixels per frame once up to speed.
    pub velocity: Vec2,
    pub stall: usize,
    pub ease: usize,
    pub floor: f64,
    pub jitter: f64,
}

impl MotionProfile {
    pub fn moving(velocity: Vec2) -> Self {
        Self { velocity, stall: 0, ease: 0, floor: 2.0, jitter: 0.2 }
    }

    fn displacement(&self, offset: usize) -> f64 {
        if offset <= self.stall {
            return 0.0;
        }
        let u = offset - self.stall;
        let eased: f64 =
            (2..=u).map(|k| if self.ease == 0 { 1.0 } else { ((k - 1) as f64 / self.ease as f64).min(1.0) }).sum();
        self.floor + self.velocity.norm() * eased
    }

    fn direction(&self) -> Vec2 {
        let n = self.velocity.norm();
        if n == 0.0 {
            Vec2::new(1.0, 0.0)
        } else {
            self.velocity * (1.0 / n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub clip_a_len: usize,
    pub clip_b_len: usize,
    pub n_points: usize,
    pub a: MotionProfile,
    pub b: MotionProfile,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            fps: 24.0,
            clip_a_len: 48,
            clip_b_len: 48,
            n_points: 24,
            a: MotionProfile::moving(Vec2::new(3.0, 0.0)),
            b: MotionProfile::moving(Vec2::new(3.0, 0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub stall_a: usize,
    pub stall_b: usize,
    pub velocity_a: Vec2,
    pub velocity_b: Vec2,
}

impl GroundTruth {
    /// Expected cuts under a scan window of `window` frames.
    pub fn cuts(&self, window: usize) -> (usize, usize) {
        (self.stall_a.min(window), self.stall_b.min(window))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub tracks: TrackSet,
    pub truth: GroundTruth,
}

/// Deterministic synthetic tracks realising `spec`. Points start in the
/// central half of the frame; samples that leave the frame are marked
/// invisible and clamped.
pub fn synth_tracks(spec: &SynthSpec, seed: u64) -> Synthesized {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.width as f64, spec.height as f64);
    let dir_a = spec.a.direction();
    let dir_b = spec.b.direction();
    let mut tracks = Vec::with_capacity(spec.n_points);
    for id in 0..spec.n_points as u32 {
        let anchor = Vec2::new(rng.random_range(0.25 * w..0.75 * w), rng.random_range(0.25 * h..0.75 * h));
        let mut samples = Vec::with_capacity(spec.clip_a_len + spec.clip_b_len - 1);
        let jitter = |amp: f64, rng: &mut ChaCha8Rng| {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let r = amp * rng.random::<f64>();
            Vec2::new(r * angle.cos(), r * angle.sin())
        };
        let mut push = |frame: i64, pos: Vec2| {
            let visible = (0.0..=w).contains(&pos.x) && (0.0..=h).contains(&pos.y);
            samples.push(TrackSample { frame, x: pos.x.clamp(0.0, w), y: pos.y.clamp(0.0, h), visible });
        };
        for offset in (1..spec.clip_a_len).rev() {
            let pos = anchor - dir_a * spec.a.displacement(offset) + jitter(spec.a.jitter, &mut rng);
            push(-(offset as i64), pos);
        }
        push(0, anchor);
        for offset in 1..spec.clip_b_len {
            let pos = anchor + dir_b * spec.b.displacement(offset) + jitter(spec.b.jitter, &mut rng);
            push(offset as i64, pos);
        }
        tracks.push(PointTrack { point_id: id, samples });
    }
    let meta = TrackMeta {
        width: spec.width,
        height: spec.height,
        fps: spec.fps,
        clip_a_len: spec.clip_a_len,
        clip_b_len: spec.clip_b_len,
    };
    Synthesized {
        tracks: TrackSet::new(meta, tracks).expect("synthetic tracks are valid"),
        truth: GroundTruth {
            stall_a: spec.a.stall,
            stall_b: spec.b.stall,
            velocity_a: spec.a.velocity,
            velocity_b: spec.b.velocity,
        },
    }
}
