//! Experiment orchestration: configuration, the single-loop trainers, the
//! evaluation protocol, metrics records, and ablation verdicts.

pub mod config;
pub mod eval;
pub mod metrics;
pub mod trainer;
pub mod verdict;

pub use config::{Algorithm, ConfigError, ExperimentConfig};
pub use eval::{derive_seed, evaluate, EvalPolicy, EvalStats};
pub use metrics::{EvalRecord, MetricsLog, Record, Summary};
pub use trainer::{
    build_student, build_teacher, train_l2t_irl, train_l2t_rl, train_two_stage_bc, StepAccounting,
    TrainError, TrainOutput,
};
pub use verdict::{ablation_verdict, improvement_verdict};
