use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{hermite_eval, BoundaryState, TransitionError, TransitionParams, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub frames: usize,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSample {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub point_id: u32,
    pub samples: Vec<FieldSample>,
}

/// Dense per-frame point trajectories for a guided interpolator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlField {
    pub header: FieldHeader,
    pub trajectories: Vec<Trajectory>,
}

impl ControlField {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("control field serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TransitionError> {
        let field: ControlField = serde_json::from_str(text).map_err(|e| TransitionError::Parse(e.to_string()))?;
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<(), TransitionError> {
        let FieldHeader { frames, width, height } = self.header;
        if frames < 2 || width == 0 || height == 0 {
            return Err(TransitionError::Invalid("control field header out of range".into()));
        }
        for t in &self.trajectories {
            if t.samples.len() != frames {
                return Err(TransitionError::Invalid(format!(
                    "trajectory {} has {} samples, expected {frames}",
                    t.point_id,
                    t.samples.len()
                )));
            }
            for (i, s) in t.samples.iter().enumerate() {
                let inside = (0.0..=width as f64).contains(&s.x) && (0.0..=height as f64).contains(&s.y);
                if s.frame != i || !inside {
                    return Err(TransitionError::Invalid(format!("trajectory {} sample {i} is invalid", t.point_id)));
                }
            }
        }
        Ok(())
    }
}

/// Greedy farthest-point ordering of up to `k` points, seeded with the
/// lowest id. Ties go to the lower id.
pub fn farthest_point_order(points: &BTreeMap<u32, Vec2>, k: usize) -> Vec<u32> {
    let ids: Vec<u32> = points.keys().copied().collect();
    let mut chosen = Vec::new();
    if ids.is_empty() || k == 0 {
        return chosen;
    }
    let mut nearest: Vec<f64> = vec![f64::INFINITY; ids.len()];
    let mut next = 0usize;
    while chosen.len() < k.min(ids.len()) {
        chosen.push(ids[next]);
        let c = points[&ids[next]];
        for (i, id) in ids.iter().enumerate() {
            nearest[i] = nearest[i].min((points[id] - c).norm());
        }
        let mut best = -1.0;
        for (i, &d) in nearest.iter().enumerate() {
            if d > best {
                best = d;
                next = i;
            }
        }
    }
    chosen
}

/// Samples the Hermite path of up to `params.points` spatially spread points
/// at `params.frames` evenly spaced times, clamping to the frame.
pub fn build_control_field(
    states: &BTreeMap<u32, (BoundaryState, BoundaryState)>,
    anchors: &BTreeMap<u32, Vec2>,
    params: &TransitionParams,
    width: u32,
    height: u32,
) -> Result<(ControlField, Vec<String>), TransitionError> {
    params.validate()?;
    let eligible: BTreeMap<u32, Vec2> =
        anchors.iter().filter(|(id, _)| states.contains_key(id)).map(|(id, p)| (*id, *p)).collect();
    if eligible.is_empty() {
        return Err(TransitionError::NoEligiblePoints);
    }
    let mut selected = farthest_point_order(&eligible, params.points);
    selected.sort_unstable();
    let mut warnings = Vec::new();
    let last = (params.frames - 1) as f64;
    let trajectories = selected
        .into_iter()
        .map(|id| {
            let (s0, s1) = &states[&id];
            let mut clamped = false;
            let samples = (0..params.frames)
                .map(|i| {
                    let p = hermite_eval(s0, s1, i as f64 / last);
                    let x = p.x.clamp(0.0, width as f64);
                    let y = p.y.clamp(0.0, height as f64);
                    clamped |= x != p.x || y != p.y;
                    FieldSample { frame: i, x, y }
                })
                .collect();
            if clamped {
                warnings.push(format!("point {id} trajectory leaves the frame; clamped"));
            }
            Trajectory { point_id: id, samples }
        })
        .collect();
    let field = ControlField { header: FieldHeader { frames: params.frames, width, height }, trajectories };
    Ok((field, warnings))
}
