use serde::{Deserialize, Serialize};

use super::{Side, TrackSet, TransitionError, TransitionParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    /// Frames removed from the end of clip A.
    pub cut_a: usize,
    /// Frames removed from the start of clip B.
    pub cut_b: usize,
    pub warnings: Vec<String>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Median, over points visible at both the anchor and `frame`, of the
/// distance travelled from the anchor.
pub fn median_displacement(ts: &TrackSet, frame: i64) -> Result<f64, TransitionError> {
    let mut d: Vec<f64> =
        ts.tracks.iter().filter_map(|t| Some((t.visible_at(frame)? - t.visible_at(0)?).norm())).collect();
    if d.is_empty() {
        return Err(TransitionError::NoVisiblePoints { frame });
    }
    Ok(median(&mut d))
}

/// Motion threshold in the clip's own pixels; `tau` is stated for 720 rows.
pub fn motion_threshold(ts: &TrackSet, params: &TransitionParams) -> f64 {
    params.tau * f64::from(ts.height) / 720.0
}

fn scan(
    ts: &TrackSet,
    side: Side,
    params: &TransitionParams,
    warnings: &mut Vec<String>,
) -> Result<usize, TransitionError> {
    let threshold = motion_threshold(ts, params);
    for offset in 1..=params.window {
        let frame = match side {
            Side::A => -(offset as i64),
            Side::B => offset as i64,
        };
        if median_displacement(ts, frame)? >= threshold {
            return Ok(offset - 1);
        }
    }
    warnings.push(format!(
        "clip {side}: all {} scanned frames are below the motion threshold; truncating the full window",
        params.window
    ));
    Ok(params.window)
}

/// Counts frozen frames on each side, scanning outward from the anchor.
pub fn detect_truncation(ts: &TrackSet, params: &TransitionParams) -> Result<Truncation, TransitionError> {
    params.validate()?;
    let available = ts.clip_a_len.min(ts.clip_b_len).saturating_sub(1);
    if params.window > available {
        return Err(TransitionError::WindowTooLarge { window: params.window, available });
    }
    let mut warnings = Vec::new();
    let cut_a = scan(ts, Side::A, params, &mut warnings)?;
    let cut_b = scan(ts, Side::B, params, &mut warnings)?;
    Ok(Truncation { cut_a, cut_b, warnings })
}
