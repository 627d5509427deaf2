use super::{BoundaryState, TransitionError, Vec2};

fn coefficients(s0: &BoundaryState, s1: &BoundaryState) -> (Vec2, Vec2) {
    let a = s0.p * 2.0 + s0.v - s1.p * 2.0 + s1.v;
    let b = s0.p * -3.0 - s0.v * 2.0 + s1.p * 3.0 - s1.v;
    (a, b)
}

/// Cubic Hermite polynomial evaluated at any `t`, including outside [0, 1].
pub fn hermite_eval(s0: &BoundaryState, s1: &BoundaryState, t: f64) -> Vec2 {
    let (a, b) = coefficients(s0, s1);
    // Horner form: ((a t + b) t + v0) t + p0.
    ((a * t + b) * t + s0.v) * t + s0.p
}

pub fn hermite_position(s0: &BoundaryState, s1: &BoundaryState, t: f64) -> Result<Vec2, TransitionError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(TransitionError::TimeOutOfRange(t));
    }
    Ok(hermite_eval(s0, s1, t))
}

/// Derivative with respect to normalized time.
pub fn hermite_velocity(s0: &BoundaryState, s1: &BoundaryState, t: f64) -> Vec2 {
    let (a, b) = coefficients(s0, s1);
    (a * (3.0 * t) + b * 2.0) * t + s0.v
}

/// Clip A's linear tail, the Hermite bridge spanning `span` frames, then
/// clip B's linear head, parameterised by frames since the end of clip A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositePath {
    pub s0: BoundaryState,
    pub s1: BoundaryState,
    pub span: f64,
}

impl CompositePath {
    pub fn position(&self, frame: f64) -> Vec2 {
        if frame < 0.0 {
            self.s0.p + self.s0.v * (frame / self.span)
        } else if frame <= self.span {
            hermite_eval(&self.s0, &self.s1, frame / self.span)
        } else {
            self.s1.p + self.s1.v * ((frame - self.span) / self.span)
        }
    }

    /// One-sided velocity in pixels per frame; `left` selects the limit from
    /// below at a junction.
    pub fn velocity(&self, frame: f64, left: bool) -> Vec2 {
        let in_a = frame < 0.0 || (frame == 0.0 && left);
        let in_b = frame > self.span || (frame == self.span && !left);
        if in_a {
            self.s0.v * (1.0 / self.span)
        } else if in_b {
            self.s1.v * (1.0 / self.span)
        } else {
            hermite_velocity(&self.s0, &self.s1, frame / self.span) * (1.0 / self.span)
        }
    }
}
