//! Single-loop teacher-student reinforcement learning for noisy-observation
//! control.
//!
//! A privileged teacher agent interacts with a simulator and learns by soft
//! actor-critic updates (or from demonstrations via adversarial reward
//! estimation). Every transition it collects carries both the exact state and
//! a paired noisy observation, so a student policy over observations can be
//! trained from the same replay buffer without ever touching the environment.
//! A conventional two-stage behavior-cloning baseline is included for
//! sample-cost comparisons.

pub mod envs;
pub mod irl;
pub mod numcore;
pub mod orchestrator;
pub mod replay;
pub mod student;
pub mod teacher;
