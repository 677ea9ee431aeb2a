//! Single-loop trainers. One iteration = one teacher environment step plus
//! (after warmup) one critic update, one actor update, one target update,
//! and one student update on the same minibatch. The student variant trains
//! purely from the buffer: its environment-step counter stays at zero. The
//! two-stage baseline is the conventional alternative where a fresh student
//! collects its own steps against a frozen teacher.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::envs::{self, EnvSpec, FeatureMap};
use crate::irl::{student_reward_update, teacher_reward_update, PairBatch, RewardModel};
use crate::numcore::Tape;
use crate::replay::{ExpertBuffer, MiniBatch, ReplayBuffer, ReplayError, Transition};
use crate::student::StudentAgent;
use crate::teacher::{TeacherAgent, TeacherHyper};

use super::config::{Algorithm, ConfigError, ExperimentConfig};
use super::eval::{derive_seed, evaluate, EvalPolicy, EvalStats};
use super::metrics::{EvalRecord, IrlUpdateRecord, MetricsLog, Record, Summary, UpdateRecord};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("environment error: {0}")]
    Env(#[from] envs::EnvError),
    #[error("replay error: {0}")]
    Replay(#[from] ReplayError),
    #[error("non-finite {what} at step {step}; diagnostic checkpoint written if a directory was provided")]
    NonFinite { step: u64, what: String },
    #[error("expert demonstrations are empty")]
    EmptyDemos,
    #[error("demo dims (state {state}, action {action}) do not match env '{env}'")]
    DemoDims {
        state: usize,
        action: usize,
        env: String,
    },
    #[error("algorithm '{found}' does not match this trainer (expected {expected})")]
    WrongAlgorithm {
        expected: &'static str,
        found: &'static str,
    },
    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] crate::numcore::checkpoint::CheckpointError),
}

/// Environment-interaction accounting, split by which agent caused the step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepAccounting {
    pub teacher_env_steps: u64,
    pub student_env_steps: u64,
}

pub struct TrainOutput {
    pub teacher: TeacherAgent,
    pub student: StudentAgent,
    /// Teacher snapshot at its best evaluation return (the final teacher if
    /// no evaluation ever ran).
    pub best_teacher: TeacherAgent,
    pub reward_models: Option<(RewardModel, RewardModel)>,
    pub accounting: StepAccounting,
    pub summary: Summary,
}

struct EvalTracker {
    eval_count: u64,
    best_teacher_return: Option<f64>,
    best_student_return: Option<f64>,
    final_teacher_return: Option<f64>,
    final_student_return: Option<f64>,
}

impl EvalTracker {
    fn new() -> Self {
        EvalTracker {
            eval_count: 0,
            best_teacher_return: None,
            best_student_return: None,
            final_teacher_return: None,
            final_student_return: None,
        }
    }

    fn observe(&mut self, teacher: f64, student: f64) -> bool {
        self.eval_count += 1;
        self.final_teacher_return = Some(teacher);
        self.final_student_return = Some(student);
        let teacher_improved = self.best_teacher_return.map_or(true, |b| teacher > b);
        if teacher_improved {
            self.best_teacher_return = Some(teacher);
        }
        if self.best_student_return.map_or(true, |b| student > b) {
            self.best_student_return = Some(student);
        }
        teacher_improved
    }

    fn summary(&self, accounting: StepAccounting, updates: u64) -> Summary {
        Summary {
            best_teacher_return: self.best_teacher_return.unwrap_or(f64::NEG_INFINITY),
            best_student_return: self.best_student_return.unwrap_or(f64::NEG_INFINITY),
            final_teacher_return: self.final_teacher_return.unwrap_or(f64::NEG_INFINITY),
            final_student_return: self.final_student_return.unwrap_or(f64::NEG_INFINITY),
            teacher_env_steps: accounting.teacher_env_steps,
            student_env_steps: accounting.student_env_steps,
            updates,
        }
    }
}

/// Constructs a teacher with the architecture the given config implies;
/// used by the trainers and by checkpoint loaders.
pub fn build_teacher<R: Rng>(cfg: &ExperimentConfig, spec: &EnvSpec, rng: &mut R) -> TeacherAgent {
    TeacherAgent::new(
        &TeacherHyper {
            features: FeatureMap::for_kind(spec.name),
            action_dim: spec.action_dim,
            action_low: spec.action_low,
            action_high: spec.action_high,
            hidden: &cfg.teacher.hidden,
            activation: cfg.activation(),
            gamma: cfg.teacher.gamma,
            tau: cfg.teacher.tau,
            entropy_temp: cfg.teacher.entropy_temp,
            learning_rate: cfg.teacher.lr,
        },
        rng,
    )
}

/// Student counterpart of [`build_teacher`].
pub fn build_student<R: Rng>(cfg: &ExperimentConfig, spec: &EnvSpec, rng: &mut R) -> StudentAgent {
    StudentAgent::new(
        FeatureMap::for_kind(spec.name),
        spec.action_dim,
        &cfg.teacher.hidden,
        cfg.activation(),
        cfg.student.loss_mode,
        cfg.student.lr,
        rng,
    )
}

fn random_action<R: Rng>(spec: &EnvSpec, rng: &mut R) -> Vec<f64> {
    (0..spec.action_dim)
        .map(|_| rng.random_range(spec.action_low..=spec.action_high))
        .collect()
}

fn ensure_finite(
    value: f64,
    what: &str,
    step: u64,
    diag: Option<&Path>,
    teacher: &TeacherAgent,
    student: &StudentAgent,
) -> Result<(), TrainError> {
    if value.is_finite() {
        return Ok(());
    }
    if let Some(dir) = diag {
        let _ = std::fs::create_dir_all(dir);
        let _ = teacher.save_checkpoint(&dir.join("diagnostic_teacher.ckpt"));
        let _ = student.save_checkpoint(&dir.join("diagnostic_student.ckpt"));
    }
    Err(TrainError::NonFinite {
        step,
        what: what.to_string(),
    })
}

const TEACHER_EVAL_SALT: u64 = 0x7EAC;
const STUDENT_EVAL_SALT: u64 = 0x57CD;

fn run_evaluation(
    cfg: &ExperimentConfig,
    spec: &EnvSpec,
    teacher: &TeacherAgent,
    student: &StudentAgent,
    eval_index: u64,
) -> (EvalStats, EvalStats) {
    let episodes = cfg.experiment.eval_episodes;
    let seed = cfg.experiment.seed;
    let teacher_stats = evaluate(
        &EvalPolicy::Teacher(teacher),
        spec,
        0.0,
        episodes,
        derive_seed(seed, TEACHER_EVAL_SALT + eval_index),
    );
    // The student is always evaluated at the target noise level, no matter
    // where the curriculum currently sits.
    let student_stats = evaluate(
        &EvalPolicy::Student(student),
        spec,
        cfg.env.alpha,
        episodes,
        derive_seed(seed, STUDENT_EVAL_SALT + eval_index),
    );
    (teacher_stats, student_stats)
}

/// Learn-to-teach with environment rewards: soft actor-critic teacher and a
/// buffer-only student updated on the same minibatch each iteration.
pub fn train_l2t_rl(
    cfg: &ExperimentConfig,
    metrics: &mut MetricsLog,
    diagnostic_dir: Option<&Path>,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let cfg = cfg.clone().resolve();
    if cfg.experiment.algorithm != Algorithm::L2tRl {
        return Err(TrainError::WrongAlgorithm {
            expected: "l2t_rl",
            found: cfg.experiment.algorithm.name(),
        });
    }
    train_rl_like(&cfg, None, metrics, diagnostic_dir)
}

/// Learn-to-teach from demonstrations: the critic is trained against the
/// estimated reward (the environment reward is never read by any update),
/// and both reward models ascend the expert-vs-policy gap each iteration.
pub fn train_l2t_irl(
    cfg: &ExperimentConfig,
    demos: &ExpertBuffer,
    metrics: &mut MetricsLog,
    diagnostic_dir: Option<&Path>,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let cfg = cfg.clone().resolve();
    if cfg.experiment.algorithm != Algorithm::L2tIrl {
        return Err(TrainError::WrongAlgorithm {
            expected: "l2t_irl",
            found: cfg.experiment.algorithm.name(),
        });
    }
    if demos.is_empty() {
        return Err(TrainError::EmptyDemos);
    }
    let spec = cfg.env_spec();
    if demos.state_dim != spec.state_dim || demos.action_dim != spec.action_dim {
        return Err(TrainError::DemoDims {
            state: demos.state_dim,
            action: demos.action_dim,
            env: spec.name.name().to_string(),
        });
    }
    train_rl_like(&cfg, Some(demos), metrics, diagnostic_dir)
}

/// Shared single-loop body for the RL and IRL variants; `demos` switches the
/// reward source and enables the reward-model updates.
fn train_rl_like(
    cfg: &ExperimentConfig,
    demos: Option<&ExpertBuffer>,
    metrics: &mut MetricsLog,
    diag: Option<&Path>,
) -> Result<TrainOutput, TrainError> {
    let spec = cfg.env_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.experiment.seed);
    let mut teacher = build_teacher(cfg, &spec, &mut rng);
    let mut student = build_student(cfg, &spec, &mut rng);
    let mut reward_models = demos.map(|_| {
        let rt = RewardModel::new(
            FeatureMap::for_kind(spec.name),
            spec.action_dim,
            &cfg.teacher.hidden,
            cfg.activation(),
            cfg.irl.psi_coeff,
            cfg.irl.output_bound,
            cfg.irl.eta,
            &mut rng,
        );
        let rs = RewardModel::new(
            FeatureMap::for_kind(spec.name),
            spec.action_dim,
            &cfg.teacher.hidden,
            cfg.activation(),
            cfg.irl.psi_coeff,
            cfg.irl.output_bound,
            cfg.irl.eta,
            &mut rng,
        );
        (rt, rs)
    });

    let mut buffer = ReplayBuffer::new(
        cfg.experiment.replay_capacity,
        spec.action_low,
        spec.action_high,
    );
    let schedule = cfg.curriculum_schedule();
    let mut tape = Tape::new();
    let mut accounting = StepAccounting::default();
    let mut tracker = EvalTracker::new();
    let mut best_teacher = teacher.clone();
    let mut updates = 0u64;
    let mut state = envs::reset(&spec, &mut rng);

    let total = cfg.experiment.total_steps;
    let batch_size = cfg.teacher.batch_size;
    for k in 0..total {
        let alpha_k = schedule.alpha_at(k);

        // Teacher rollout: one environment step per iteration.
        let action = if k < cfg.experiment.warmup_steps {
            random_action(&spec, &mut rng)
        } else {
            teacher.act(&state.s, false, &mut rng)
        };
        let (next, reward) = envs::step(&spec, &state, &action)?;
        let o = envs::observe(&state.s, alpha_k, &mut rng);
        let o_next = envs::observe(&next.s, alpha_k, &mut rng);
        buffer.push(Transition {
            s: state.s.clone(),
            o,
            a: action,
            r: reward,
            s_next: next.s.clone(),
            o_next,
            done: next.done,
            alpha_at_collection: alpha_k,
        })?;
        accounting.teacher_env_steps += 1;
        state = if next.done {
            envs::reset(&spec, &mut rng)
        } else {
            next
        };

        // Updates: one of each per iteration once warmup has passed.
        if k + 1 > cfg.experiment.warmup_steps {
            let sampled = buffer.sample_minibatch(batch_size, &mut rng)?;
            let mut mb = MiniBatch::gather(&sampled);
            if schedule.is_ramping() {
                mb.renoise_student_view(alpha_k, &mut rng);
            }

            let mut irl_log = None;
            if let Some((reward_t, reward_s)) = reward_models.as_mut() {
                let demos = demos.expect("reward models exist only with demos");
                let (es, ea) = demos.sample_flat(batch_size, &mut rng)?;
                let expert = PairBatch::new(&es, &ea, batch_size);
                // The critic sees only estimated rewards from here on.
                mb.r = reward_t.estimate_rewards(&mb.s, &mb.a, mb.rows);

                let critic_loss = teacher.critic_td_update(&mut tape, &mb, &mut rng);
                ensure_finite(critic_loss, "critic loss", k + 1, diag, &teacher, &student)?;
                let (actor_loss, entropy_est) = teacher.actor_update_full(&mut tape, &mb, &mut rng);
                ensure_finite(actor_loss, "actor loss", k + 1, diag, &teacher, &student)?;
                teacher.critics.polyak_update();

                let t_obj = teacher_reward_update(
                    reward_t,
                    &mut tape,
                    expert,
                    PairBatch::new(&mb.s, &mb.a, mb.rows),
                    entropy_est,
                );
                ensure_finite(t_obj, "teacher reward objective", k + 1, diag, &teacher, &student)?;

                let report = student.update(&mut tape, &teacher, &mb, &mut rng);
                ensure_finite(report.total, "student loss", k + 1, diag, &teacher, &student)?;

                let s_obj = student_reward_update(
                    reward_s,
                    &mut tape,
                    expert,
                    PairBatch::new(&mb.o, &mb.a, mb.rows),
                );
                ensure_finite(s_obj, "student reward objective", k + 1, diag, &teacher, &student)?;

                updates += 1;
                if updates % cfg.experiment.log_interval == 0 {
                    let irl_objective = reward_t.objective_value(
                        expert,
                        PairBatch::new(&mb.s, &mb.a, mb.rows),
                        entropy_est,
                    );
                    irl_log = Some((critic_loss, actor_loss, report, t_obj, s_obj, irl_objective));
                }
                if let Some((closs, aloss, report, t_obj, s_obj, irl_objective)) = irl_log {
                    metrics.push(Record::Update(UpdateRecord {
                        step: k + 1,
                        critic_loss: closs,
                        actor_loss: aloss,
                        student_bc: report.bc_component,
                        student_asym: report.asym_component,
                        student_total: report.total,
                    }));
                    metrics.push(Record::IrlUpdate(IrlUpdateRecord {
                        step: k + 1,
                        teacher_reward_objective: t_obj,
                        student_reward_objective: s_obj,
                        irl_objective,
                    }));
                }
            } else {
                let critic_loss = teacher.critic_td_update(&mut tape, &mb, &mut rng);
                ensure_finite(critic_loss, "critic loss", k + 1, diag, &teacher, &student)?;
                let actor_loss = teacher.actor_pmd_update(&mut tape, &mb, &mut rng);
                ensure_finite(actor_loss, "actor loss", k + 1, diag, &teacher, &student)?;
                teacher.critics.polyak_update();
                let report = student.update(&mut tape, &teacher, &mb, &mut rng);
                ensure_finite(report.total, "student loss", k + 1, diag, &teacher, &student)?;

                updates += 1;
                if updates % cfg.experiment.log_interval == 0 {
                    metrics.push(Record::Update(UpdateRecord {
                        step: k + 1,
                        critic_loss,
                        actor_loss,
                        student_bc: report.bc_component,
                        student_asym: report.asym_component,
                        student_total: report.total,
                    }));
                }
            }
        }

        if (k + 1) % cfg.experiment.eval_interval == 0 || k + 1 == total {
            let (t_stats, s_stats) =
                run_evaluation(cfg, &spec, &teacher, &student, tracker.eval_count);
            let teacher_improved = tracker.observe(t_stats.return_mean, s_stats.return_mean);
            if teacher_improved {
                best_teacher = teacher.clone();
            }
            metrics.push(Record::Eval(EvalRecord {
                step: k + 1,
                teacher_return_mean: t_stats.return_mean,
                teacher_return_std: t_stats.return_std,
                student_return_mean: s_stats.return_mean,
                student_return_std: s_stats.return_std,
                episode_length_mean: s_stats.length_mean,
                alpha_current: alpha_k,
            }));
            metrics.flush();
        }
    }
    metrics.flush();

    let summary = tracker.summary(accounting, updates);
    Ok(TrainOutput {
        teacher,
        student,
        best_teacher,
        reward_models,
        accounting,
        summary,
    })
}

/// Conventional two-stage baseline: a fresh student collects its own
/// environment steps acting on noisy observations, while the frozen teacher
/// labels the paired privileged states. Every step is attributed to the
/// student; this is the sample cost the single-loop variants avoid.
pub fn train_two_stage_bc(
    cfg: &ExperimentConfig,
    frozen_teacher: &TeacherAgent,
    metrics: &mut MetricsLog,
    diag: Option<&Path>,
) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let cfg = cfg.clone().resolve();
    if cfg.experiment.algorithm != Algorithm::TwoStageBc {
        return Err(TrainError::WrongAlgorithm {
            expected: "two_stage_bc",
            found: cfg.experiment.algorithm.name(),
        });
    }
    let spec = cfg.env_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.experiment.seed);
    let mut student = build_student(&cfg, &spec, &mut rng);
    let mut buffer = ReplayBuffer::new(
        cfg.experiment.replay_capacity,
        spec.action_low,
        spec.action_high,
    );
    let schedule = cfg.curriculum_schedule();
    let mut tape = Tape::new();
    let mut accounting = StepAccounting::default();
    let mut tracker = EvalTracker::new();
    let mut updates = 0u64;
    let mut state = envs::reset(&spec, &mut rng);

    // The teacher is frozen: evaluate it once and reuse the numbers.
    let teacher_stats = evaluate(
        &EvalPolicy::Teacher(frozen_teacher),
        &spec,
        0.0,
        cfg.experiment.eval_episodes,
        derive_seed(cfg.experiment.seed, TEACHER_EVAL_SALT),
    );

    let total = cfg.experiment.total_steps;
    for k in 0..total {
        let alpha_k = schedule.alpha_at(k);
        let o = envs::observe(&state.s, alpha_k, &mut rng);
        let action = if k < cfg.experiment.warmup_steps {
            random_action(&spec, &mut rng)
        } else {
            student.act(&o, false, spec.action_low, spec.action_high, &mut rng)
        };
        let (next, reward) = envs::step(&spec, &state, &action)?;
        let o_next = envs::observe(&next.s, alpha_k, &mut rng);
        buffer.push(Transition {
            s: state.s.clone(),
            o,
            a: action,
            r: reward,
            s_next: next.s.clone(),
            o_next,
            done: next.done,
            alpha_at_collection: alpha_k,
        })?;
        accounting.student_env_steps += 1;
        state = if next.done {
            envs::reset(&spec, &mut rng)
        } else {
            next
        };

        if k + 1 > cfg.experiment.warmup_steps {
            let sampled = buffer.sample_minibatch(cfg.teacher.batch_size, &mut rng)?;
            let mut mb = MiniBatch::gather(&sampled);
            if schedule.is_ramping() {
                mb.renoise_student_view(alpha_k, &mut rng);
            }
            let report = student.update(&mut tape, frozen_teacher, &mb, &mut rng);
            ensure_finite(report.total, "student loss", k + 1, diag, frozen_teacher, &student)?;
            updates += 1;
            if updates % cfg.experiment.log_interval == 0 {
                metrics.push(Record::Update(UpdateRecord {
                    step: k + 1,
                    critic_loss: 0.0,
                    actor_loss: 0.0,
                    student_bc: report.bc_component,
                    student_asym: report.asym_component,
                    student_total: report.total,
                }));
            }
        }

        if (k + 1) % cfg.experiment.eval_interval == 0 || k + 1 == total {
            let student_stats = evaluate(
                &EvalPolicy::Student(&student),
                &spec,
                cfg.env.alpha,
                cfg.experiment.eval_episodes,
                derive_seed(cfg.experiment.seed, STUDENT_EVAL_SALT + tracker.eval_count),
            );
            tracker.observe(teacher_stats.return_mean, student_stats.return_mean);
            metrics.push(Record::Eval(EvalRecord {
                step: k + 1,
                teacher_return_mean: teacher_stats.return_mean,
                teacher_return_std: teacher_stats.return_std,
                student_return_mean: student_stats.return_mean,
                student_return_std: student_stats.return_std,
                episode_length_mean: student_stats.length_mean,
                alpha_current: alpha_k,
            }));
            metrics.flush();
        }
    }
    metrics.flush();

    let summary = tracker.summary(accounting, updates);
    Ok(TrainOutput {
        teacher: frozen_teacher.clone(),
        student,
        best_teacher: frozen_teacher.clone(),
        reward_models: None,
        accounting,
        summary,
    })
}
