use cinepipe_core::clients::media::Clip;
use cinepipe_core::transition::{synth_tracks, MotionProfile, SynthSpec, TrackSet, TransitionError, Vec2};

/// Dense point tracking across a cut: backward through clip A and forward
/// through clip B from the shared anchor frame.
pub trait TrackSource: Send + Sync {
    fn track(&self, a: &Clip, b: &Clip, seed: u64) -> Result<TrackSet, TransitionError>;
}

/// Deterministic stand-in for a learned tracker. Motion direction and
/// terminal stalls are drawn from `seed`; geometry follows the clips.
#[derive(Debug, Clone)]
pub struct SyntheticTracker {
    pub points: usize,
    /// Largest terminal stall, in frames, on either side.
    pub max_stall: usize,
}

impl Default for SyntheticTracker {
    fn default() -> Self {
        Self { points: 24, max_stall: 6 }
    }
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SyntheticTracker {
    fn profile(&self, state: &mut u64, speed: f64, stall_cap: usize) -> MotionProfile {
        let angle = (splitmix(state) % 3600) as f64 / 3600.0 * std::f64::consts::TAU;
        let stall = (splitmix(state) % (self.max_stall as u64 + 1)) as usize;
        MotionProfile {
            stall: stall.min(stall_cap),
            ..MotionProfile::moving(Vec2::new(speed * angle.cos(), speed * angle.sin()))
        }
    }
}

impl TrackSource for SyntheticTracker {
    fn track(&self, a: &Clip, b: &Clip, seed: u64) -> Result<TrackSet, TransitionError> {
        if a.width != b.width || a.height != b.height {
            return Err(TransitionError::Invalid(format!(
                "clip sizes differ: {}x{} vs {}x{}",
                a.width, a.height, b.width, b.height
            )));
        }
        let mut state = seed;
        let speed = 0.25 * a.width.min(a.height) as f64 / a.len().max(b.len()).max(1) as f64;
        let pa = self.profile(&mut state, speed, a.len().saturating_sub(2));
        let pb = self.profile(&mut state, speed, b.len().saturating_sub(2));
        let point_seed = splitmix(&mut state);
        let spec = SynthSpec {
            width: a.width,
            height: a.height,
            fps: a.fps as f64,
            clip_a_len: a.len(),
            clip_b_len: b.len(),
            n_points: self.points,
            a: pa,
            b: pb,
        };
        Ok(synth_tracks(&spec, point_seed).tracks)
    }
}
