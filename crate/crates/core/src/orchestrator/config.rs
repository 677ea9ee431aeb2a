//! Fully-resolved experiment configuration with per-module sections.
//! Unknown keys are rejected at deserialization; every invariant is checked
//! by [`ExperimentConfig::validate`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{CurriculumSchedule, CurriculumShape, EnvKind, EnvSpec};
use crate::numcore::Activation;
use crate::student::LossMode;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    L2tRl,
    L2tIrl,
    TwoStageBc,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::L2tRl => "l2t_rl",
            Algorithm::L2tIrl => "l2t_irl",
            Algorithm::TwoStageBc => "two_stage_bc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub total_steps: u64,
    pub warmup_steps: u64,
    pub eval_interval: u64,
    pub eval_episodes: u32,
    pub log_interval: u64,
    pub replay_capacity: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            algorithm: Algorithm::L2tRl,
            seed: 0,
            total_steps: 100_000,
            warmup_steps: 1000,
            eval_interval: 5000,
            eval_episodes: 5,
            log_interval: 100,
            replay_capacity: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSection {
    pub name: EnvKind,
    pub alpha: f64,
}

impl Default for EnvSection {
    fn default() -> Self {
        EnvSection {
            name: EnvKind::Pendulum,
            alpha: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumSection {
    pub shape: CurriculumShape,
    /// Steps to ramp alpha from 0 to the target; resolved to 30% of
    /// total_steps when absent.
    pub ramp_steps: Option<u64>,
}

impl Default for CurriculumSection {
    fn default() -> Self {
        CurriculumSection {
            shape: CurriculumShape::Linear,
            ramp_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherSection {
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub entropy_temp: f64,
    pub hidden: Vec<usize>,
    pub activation: ActivationName,
}

impl Default for TeacherSection {
    fn default() -> Self {
        TeacherSection {
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            batch_size: 256,
            entropy_temp: 0.2,
            hidden: vec![64, 64],
            activation: ActivationName::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Tanh,
    Relu,
}

impl From<ActivationName> for Activation {
    fn from(a: ActivationName) -> Activation {
        match a {
            ActivationName::Tanh => Activation::Tanh,
            ActivationName::Relu => Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudentSection {
    pub loss_mode: LossMode,
    pub lr: f64,
}

impl Default for StudentSection {
    fn default() -> Self {
        StudentSection {
            loss_mode: LossMode::Combined,
            lr: 3e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrlSection {
    pub psi_coeff: f64,
    pub eta: f64,
    pub output_bound: f64,
    pub demo_path: Option<String>,
}

impl Default for IrlSection {
    fn default() -> Self {
        IrlSection {
            psi_coeff: 0.1,
            eta: 3e-4,
            output_bound: 10.0,
            demo_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoStageSection {
    /// Checkpoint of the frozen teacher that labels the student's states.
    pub teacher_checkpoint: Option<String>,
}

impl Default for TwoStageSection {
    fn default() -> Self {
        TwoStageSection {
            teacher_checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub env: EnvSection,
    pub curriculum: CurriculumSection,
    pub teacher: TeacherSection,
    pub student: StudentSection,
    pub irl: IrlSection,
    pub two_stage: TwoStageSection,
}

impl ExperimentConfig {
    /// Fills derived defaults (the curriculum ramp length) so that the config
    /// is a fixed point of resolve-then-reparse.
    pub fn resolve(mut self) -> Self {
        if self.curriculum.ramp_steps.is_none() {
            self.curriculum.ramp_steps = Some(3 * self.experiment.total_steps / 10);
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.env.alpha < 0.0 {
            return Err(invalid("env.alpha", "must be >= 0"));
        }
        if self.experiment.total_steps < self.experiment.warmup_steps {
            return Err(invalid(
                "experiment.total_steps",
                "must be >= experiment.warmup_steps",
            ));
        }
        if self.experiment.eval_episodes < 1 {
            return Err(invalid("experiment.eval_episodes", "must be >= 1"));
        }
        if self.experiment.eval_interval == 0 {
            return Err(invalid("experiment.eval_interval", "must be >= 1"));
        }
        if self.experiment.log_interval == 0 {
            return Err(invalid("experiment.log_interval", "must be >= 1"));
        }
        if self.experiment.replay_capacity == 0 {
            return Err(invalid("experiment.replay_capacity", "must be >= 1"));
        }
        if self.teacher.batch_size == 0 {
            return Err(invalid("teacher.batch_size", "must be >= 1"));
        }
        if !(self.teacher.gamma > 0.0 && self.teacher.gamma <= 1.0) {
            return Err(invalid("teacher.gamma", "must be in (0, 1]"));
        }
        if !(self.teacher.tau > 0.0 && self.teacher.tau <= 1.0) {
            return Err(invalid("teacher.tau", "must be in (0, 1]"));
        }
        if self.teacher.lr <= 0.0 {
            return Err(invalid("teacher.lr", "must be > 0"));
        }
        if self.teacher.entropy_temp < 0.0 {
            return Err(invalid("teacher.entropy_temp", "must be >= 0"));
        }
        if self.teacher.hidden.is_empty() || self.teacher.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("teacher.hidden", "must be non-empty positive dims"));
        }
        if self.student.lr <= 0.0 {
            return Err(invalid("student.lr", "must be > 0"));
        }
        if self.irl.psi_coeff < 0.0 {
            return Err(invalid("irl.psi_coeff", "must be >= 0"));
        }
        if self.irl.eta <= 0.0 {
            return Err(invalid("irl.eta", "must be > 0"));
        }
        if self.irl.output_bound <= 0.0 {
            return Err(invalid("irl.output_bound", "must be > 0"));
        }
        Ok(())
    }

    pub fn env_spec(&self) -> EnvSpec {
        EnvSpec::for_kind(self.env.name)
    }

    /// The noise schedule the student trains under. Evaluation always uses
    /// the target alpha regardless of this schedule's current value.
    pub fn curriculum_schedule(&self) -> CurriculumSchedule {
        match self.curriculum.shape {
            CurriculumShape::Constant => CurriculumSchedule::constant(self.env.alpha),
            CurriculumShape::Linear => CurriculumSchedule::linear(
                self.env.alpha,
                self.curriculum
                    .ramp_steps
                    .unwrap_or(3 * self.experiment.total_steps / 10),
            ),
        }
    }

    pub fn activation(&self) -> Activation {
        self.teacher.activation.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_spec_values() {
        let cfg = ExperimentConfig::default().resolve();
        assert_eq!(cfg.env.alpha, 0.4);
        assert_eq!(cfg.teacher.batch_size, 256);
        assert_eq!(cfg.teacher.gamma, 0.99);
        assert_eq!(cfg.teacher.hidden, vec![64, 64]);
        assert_eq!(cfg.curriculum.ramp_steps, Some(30_000));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn negative_alpha_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.env.alpha = -1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn warmup_cannot_exceed_total() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.total_steps = 10;
        cfg.experiment.warmup_steps = 20;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn resolve_is_idempotent() {
        let cfg = ExperimentConfig::default().resolve();
        let again = cfg.clone().resolve();
        assert_eq!(cfg, again);
    }
}
