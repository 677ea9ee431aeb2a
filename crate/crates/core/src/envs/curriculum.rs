//! Noise-scale curriculum: ramps alpha from 0 up to the target level so the
//! student starts on nearly clean observations and ends on the full noise.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumShape {
    Linear,
    Constant,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurriculumSchedule {
    pub alpha_target: f64,
    pub ramp_steps: u64,
    pub shape: CurriculumShape,
}

impl CurriculumSchedule {
    pub fn constant(alpha_target: f64) -> Self {
        CurriculumSchedule {
            alpha_target,
            ramp_steps: 0,
            shape: CurriculumShape::Constant,
        }
    }

    pub fn linear(alpha_target: f64, ramp_steps: u64) -> Self {
        CurriculumSchedule {
            alpha_target,
            ramp_steps,
            shape: CurriculumShape::Linear,
        }
    }

    pub fn alpha_at(&self, k: u64) -> f64 {
        curriculum_alpha(self, k)
    }

    /// True when the schedule actually varies over time.
    pub fn is_ramping(&self) -> bool {
        self.shape == CurriculumShape::Linear && self.ramp_steps > 0 && self.alpha_target > 0.0
    }
}

/// Noise scale at training step `k`: `alpha_target * min(1, k / ramp_steps)`
/// for the linear shape, `alpha_target` for the constant shape.
pub fn curriculum_alpha(sched: &CurriculumSchedule, k: u64) -> f64 {
    match sched.shape {
        CurriculumShape::Constant => sched.alpha_target,
        CurriculumShape::Linear => {
            if k >= sched.ramp_steps {
                sched.alpha_target
            } else {
                // ramp_steps > 0 here since k >= 0 handled the degenerate case
                sched.alpha_target * (k as f64 / sched.ramp_steps as f64)
            }
        }
    }
}
