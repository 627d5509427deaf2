use serde::{Deserialize, Serialize};

use super::{TransitionError, TransitionPlan};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipRef {
    pub id: String,
    pub len: usize,
}

impl ClipRef {
    pub fn new(id: impl Into<String>, len: usize) -> Self {
        Self { id: id.into(), len }
    }
}

/// One contiguous range of source frames placed on the output timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub source: String,
    /// First source frame, inclusive.
    pub start: usize,
    /// Last source frame, inclusive.
    pub end: usize,
    pub timeline_start: usize,
}

impl Cut {
    pub fn frame_count(&self) -> usize {
        self.end + 1 - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutList {
    pub cuts: Vec<Cut>,
    pub total_frames: usize,
}

/// How two consecutive clips are joined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Join {
    pub cut_a: usize,
    pub cut_b: usize,
    pub transition: ClipRef,
    /// Transition length the plan was built for.
    pub frames: usize,
}

impl Join {
    pub fn from_plan(plan: &TransitionPlan, transition: ClipRef) -> Self {
        Self { cut_a: plan.cut_a, cut_b: plan.cut_b, transition, frames: plan.field.header.frames }
    }
}

/// Edit list for `clips[0], join[0], clips[1], …` with frame-accurate trims.
pub fn stitch_sequence(clips: &[ClipRef], joins: &[Join]) -> Result<CutList, TransitionError> {
    if clips.is_empty() || joins.len() + 1 != clips.len() {
        return Err(TransitionError::Invalid(format!(
            "{} clip(s) need {} join(s), got {}",
            clips.len(),
            clips.len().saturating_sub(1),
            joins.len()
        )));
    }
    let mut cuts = Vec::with_capacity(clips.len() + joins.len());
    let mut cursor = 0;
    let mut place = |source: &str, start: usize, end: usize, cuts: &mut Vec<Cut>| {
        cuts.push(Cut { source: source.to_string(), start, end, timeline_start: cursor });
        cursor += end + 1 - start;
    };
    for (i, clip) in clips.iter().enumerate() {
        let head = if i > 0 { joins[i - 1].cut_b } else { 0 };
        let tail = joins.get(i).map_or(0, |j| j.cut_a);
        if head + tail >= clip.len {
            return Err(TransitionError::LengthMismatch {
                clip: clip.id.clone(),
                got: clip.len,
                expected: head + tail + 1,
            });
        }
        place(&clip.id, head, clip.len - 1 - tail, &mut cuts);
        if let Some(join) = joins.get(i) {
            if join.transition.len != join.frames {
                return Err(TransitionError::LengthMismatch {
                    clip: join.transition.id.clone(),
                    got: join.transition.len,
                    expected: join.frames,
                });
            }
            place(&join.transition.id, 0, join.frames - 1, &mut cuts);
        }
    }
    Ok(CutList { cuts, total_frames: cursor })
}

pub fn stitch_timeline(
    plan: &TransitionPlan,
    clip_a: &ClipRef,
    transition: &ClipRef,
    clip_b: &ClipRef,
) -> Result<CutList, TransitionError> {
    stitch_sequence(&[clip_a.clone(), clip_b.clone()], &[Join::from_plan(plan, transition.clone())])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn join(cut_a: usize, cut_b: usize, t: usize) -> Join {
        Join { cut_a, cut_b, transition: ClipRef::new("t", t), frames: 16 }
    }

    #[test]
    fn formula_example() {
        let list = stitch_sequence(&[ClipRef::new("a", 60), ClipRef::new("b", 60)], &[join(5, 3, 16)]).unwrap();
        assert_eq!(list.total_frames, 128);
        assert_eq!((list.cuts[0].start, list.cuts[0].end), (0, 54));
        assert_eq!((list.cuts[1].timeline_start, list.cuts[1].frame_count()), (55, 16));
        assert_eq!((list.cuts[2].start, list.cuts[2].end, list.cuts[2].timeline_start), (3, 59, 71));
    }

    #[test]
    fn zero_cuts_is_insertion() {
        let list = stitch_sequence(&[ClipRef::new("a", 40), ClipRef::new("b", 50)], &[join(0, 0, 16)]).unwrap();
        assert_eq!(list.total_frames, 40 + 16 + 50);
    }

    #[test]
    fn wrong_transition_length() {
        let err = stitch_sequence(&[ClipRef::new("a", 40), ClipRef::new("b", 50)], &[join(0, 0, 15)]).unwrap_err();
        assert!(matches!(err, TransitionError::LengthMismatch { got: 15, expected: 16, .. }));
    }

    #[test]
    fn middle_clip_trimmed_both_ends() {
        let clips = [ClipRef::new("a", 30), ClipRef::new("b", 30), ClipRef::new("c", 30)];
        let list = stitch_sequence(&clips, &[join(2, 4, 16), join(6, 1, 16)]).unwrap();
        assert_eq!((list.cuts[2].start, list.cuts[2].end), (4, 23));
        assert_eq!(list.total_frames, 90 - 2 - 4 - 6 - 1 + 32);
        assert!(stitch_sequence(&clips, &[join(2, 4, 16)]).is_err());
        assert!(stitch_sequence(&clips, &[join(2, 20, 16), join(10, 1, 16)]).is_err());
    }
}
