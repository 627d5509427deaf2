use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BoundaryState, Side, TrackSet, TransitionError, TransitionParams, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEstimate {
    pub states: BTreeMap<u32, BoundaryState>,
    pub warnings: Vec<String>,
}

/// Least-squares slope of `values` against `frames`.
fn slope(frames: &[f64], values: &[f64]) -> f64 {
    let n = frames.len() as f64;
    let mf = frames.iter().sum::<f64>() / n;
    let mv = values.iter().sum::<f64>() / n;
    let num: f64 = frames.iter().zip(values).map(|(f, v)| (f - mf) * (v - mv)).sum();
    let den: f64 = frames.iter().map(|f| (f - mf).powi(2)).sum();
    num / den
}

/// Boundary state of every usable point on one side after truncation.
///
/// The position is taken at the retained frame nearest the anchor; the
/// velocity is a linear fit over the `k_fit` visible samples nearest that
/// frame inside the clip, scaled to normalized transition time.
pub fn estimate_boundary_state(
    ts: &TrackSet,
    side: Side,
    cuts: (usize, usize),
    params: &TransitionParams,
) -> Result<BoundaryEstimate, TransitionError> {
    params.validate()?;
    let (boundary, frames): (i64, Vec<i64>) = match side {
        Side::A => {
            if cuts.0 >= ts.clip_a_len {
                return Err(TransitionError::Invalid(format!("cut_a {} leaves clip A empty", cuts.0)));
            }
            let b = -(cuts.0 as i64);
            (b, (-(ts.clip_a_len as i64 - 1)..=b).rev().collect())
        }
        Side::B => {
            if cuts.1 >= ts.clip_b_len {
                return Err(TransitionError::Invalid(format!("cut_b {} leaves clip B empty", cuts.1)));
            }
            let b = cuts.1 as i64;
            (b, (b..ts.clip_b_len as i64).collect())
        }
    };
    let mut states = BTreeMap::new();
    let mut warnings = Vec::new();
    for track in &ts.tracks {
        let id = track.point_id;
        if track.visible_at(0).is_none() {
            warnings.push(format!("point {id} is not visible at the anchor; dropped"));
            continue;
        }
        let Some(p) = track.visible_at(boundary) else {
            warnings.push(format!("point {id} is not visible at the clip {side} boundary frame {boundary}; excluded"));
            continue;
        };
        let fit: Vec<(i64, Vec2)> =
            frames.iter().filter_map(|&f| track.visible_at(f).map(|pos| (f, pos))).take(params.k_fit).collect();
        if fit.len() < params.k_fit {
            warnings.push(format!(
                "point {id} has {} visible sample(s) in clip {side}, fewer than k_fit = {}; excluded",
                fit.len(),
                params.k_fit
            ));
            continue;
        }
        let fs: Vec<f64> = fit.iter().map(|(f, _)| *f as f64).collect();
        let xs: Vec<f64> = fit.iter().map(|(_, p)| p.x).collect();
        let ys: Vec<f64> = fit.iter().map(|(_, p)| p.y).collect();
        let per_frame = Vec2::new(slope(&fs, &xs), slope(&fs, &ys));
        states.insert(id, BoundaryState { p, v: per_frame * params.frames as f64 });
    }
    Ok(BoundaryEstimate { states, warnings })
}
