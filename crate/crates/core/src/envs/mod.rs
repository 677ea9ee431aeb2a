//! Desk-scale continuous-control environments with exact (privileged) state,
//! the multiplicative-uniform observation-noise model that turns them into
//! POMDPs, and the noise-scale curriculum.
//!
//! All dynamics are integrated with fixed-step RK4 and are pure functions of
//! (state, action, spec): stepping the same state twice gives bit-identical
//! results.

pub mod curriculum;
pub mod features;
pub mod noise;
pub mod oracle;

pub use curriculum::{curriculum_alpha, CurriculumSchedule, CurriculumShape};
pub use features::FeatureMap;
pub use noise::{observe, observe_into, NoiseModel};
pub use oracle::scripted_oracle;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("unknown environment '{0}'")]
    UnknownEnv(String),
    #[error("cannot step a finished episode (t = {t})")]
    EpisodeDone { t: u32 },
    #[error("action has {found} entries, expected {expected}")]
    ActionDim { expected: usize, found: usize },
    #[error("environment '{0}' has no scripted controller")]
    NoOracle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Pendulum,
    CartpoleContinuous,
    Pointmass,
}

impl EnvKind {
    pub fn parse(name: &str) -> Result<Self, EnvError> {
        match name {
            "pendulum" => Ok(EnvKind::Pendulum),
            "cartpole_continuous" => Ok(EnvKind::CartpoleContinuous),
            "pointmass" => Ok(EnvKind::Pointmass),
            other => Err(EnvError::UnknownEnv(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::CartpoleContinuous => "cartpole_continuous",
            EnvKind::Pointmass => "pointmass",
        }
    }
}

/// Static description of an environment. Observations share the state's
/// dimension because noise is applied entrywise on the state itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: EnvKind,
    pub state_dim: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_low: f64,
    pub action_high: f64,
    pub dt: f64,
    pub horizon: u32,
    pub gamma: f64,
}

impl EnvSpec {
    pub fn for_kind(kind: EnvKind) -> Self {
        match kind {
            // Torque-limited swing-up. State [theta, theta_dot] with theta = 0
            // upright, wrapped to (-pi, pi]; theta_dot clamped to [-8, 8].
            // Action a in [-1, 1] applies torque 2a.
            // Reward -(theta^2 + 0.1 theta_dot^2 + 0.001 a^2).
            EnvKind::Pendulum => EnvSpec {
                name: kind,
                state_dim: 2,
                obs_dim: 2,
                action_dim: 1,
                action_low: -1.0,
                action_high: 1.0,
                dt: 0.05,
                horizon: 200,
                gamma: 0.99,
            },
            // Cart-pole with a continuous force F = 10a. State
            // [x, x_dot, theta, theta_dot]; fails when |x| > 2.4 or
            // |theta| > 12 degrees. Reward 1 per step taken.
            EnvKind::CartpoleContinuous => EnvSpec {
                name: kind,
                state_dim: 4,
                obs_dim: 4,
                action_dim: 1,
                action_low: -1.0,
                action_high: 1.0,
                dt: 0.05,
                horizon: 500,
                gamma: 0.99,
            },
            // Damped unit-mass point reaching a fixed goal at (1, 1). State
            // [x, y, vx, vy]; action is the force vector, each axis in [-1, 1].
            // Reward -(|p - g|^2 + 0.01 |a|^2).
            EnvKind::Pointmass => EnvSpec {
                name: kind,
                state_dim: 4,
                obs_dim: 4,
                action_dim: 2,
                action_low: -1.0,
                action_high: 1.0,
                dt: 0.05,
                horizon: 200,
                gamma: 0.99,
            },
        }
    }
}

/// Mutable episode state: the exact simulator state plus step bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub s: Vec<f64>,
    pub t: u32,
    pub done: bool,
}

pub const PENDULUM_MAX_SPEED: f64 = 8.0;
const PENDULUM_G: f64 = 10.0;
const PENDULUM_TORQUE: f64 = 2.0;
pub const POINTMASS_GOAL: [f64; 2] = [1.0, 1.0];
const POINTMASS_DAMPING: f64 = 0.5;
const POINTMASS_MAX_SPEED: f64 = 5.0;
const POINTMASS_MAX_POS: f64 = 3.0;
const CARTPOLE_FORCE: f64 = 10.0;
const CARTPOLE_X_LIMIT: f64 = 2.4;
const CARTPOLE_THETA_LIMIT: f64 = 12.0 * std::f64::consts::PI / 180.0;

/// Draws the initial state from the per-environment distribution.
///
/// - pendulum: theta ~ U[-pi, pi], theta_dot ~ U[-1, 1]
/// - cartpole_continuous: each entry ~ U[-0.05, 0.05]
/// - pointmass: deterministic start at (-1, -1) with zero velocity
pub fn reset<R: Rng>(spec: &EnvSpec, rng: &mut R) -> EnvState {
    let s = match spec.name {
        EnvKind::Pendulum => vec![
            rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI),
            rng.random_range(-1.0..=1.0),
        ],
        EnvKind::CartpoleContinuous => (0..4).map(|_| rng.random_range(-0.05..=0.05)).collect(),
        EnvKind::Pointmass => vec![-1.0, -1.0, 0.0, 0.0],
    };
    EnvState {
        s,
        t: 0,
        done: false,
    }
}

/// Advances one step of `spec.dt` seconds under a zero-order-hold action.
/// The action is clamped into the spec's bounds before use.
pub fn step(spec: &EnvSpec, state: &EnvState, action: &[f64]) -> Result<(EnvState, f64), EnvError> {
    if state.done {
        return Err(EnvError::EpisodeDone { t: state.t });
    }
    if action.len() != spec.action_dim {
        return Err(EnvError::ActionDim {
            expected: spec.action_dim,
            found: action.len(),
        });
    }
    let a: Vec<f64> = action
        .iter()
        .map(|v| v.clamp(spec.action_low, spec.action_high))
        .collect();
    let (next_s, reward, failed) = match spec.name {
        EnvKind::Pendulum => pendulum_step(spec, &state.s, &a),
        EnvKind::CartpoleContinuous => cartpole_step(spec, &state.s, &a),
        EnvKind::Pointmass => pointmass_step(spec, &state.s, &a),
    };
    let t = state.t + 1;
    let done = failed || t >= spec.horizon;
    Ok((EnvState { s: next_s, t, done }, reward))
}

/// Classic fixed-step fourth-order Runge-Kutta update.
fn rk4(state: &[f64], dt: f64, deriv: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let n = state.len();
    let k1 = deriv(state);
    let mut mid: Vec<f64> = (0..n).map(|i| state[i] + 0.5 * dt * k1[i]).collect();
    let k2 = deriv(&mid);
    for i in 0..n {
        mid[i] = state[i] + 0.5 * dt * k2[i];
    }
    let k3 = deriv(&mid);
    for i in 0..n {
        mid[i] = state[i] + dt * k3[i];
    }
    let k4 = deriv(&mid);
    (0..n)
        .map(|i| state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = theta % two_pi;
    if w <= -std::f64::consts::PI {
        w += two_pi;
    } else if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

fn pendulum_step(spec: &EnvSpec, s: &[f64], a: &[f64]) -> (Vec<f64>, f64, bool) {
    let torque = PENDULUM_TORQUE * a[0];
    let theta = wrap_angle(s[0]);
    let theta_dot = s[1];
    let reward = -(theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * a[0] * a[0]);
    // Rod pendulum about the pivot: I theta_ddot = m g (l/2) sin(theta) + torque,
    // with m = 1, l = 1, I = m l^2 / 3.
    let next = rk4(&[theta, theta_dot], spec.dt, |x| {
        vec![
            x[1],
            1.5 * PENDULUM_G * x[0].sin() + 3.0 * torque,
        ]
    });
    let next_s = vec![
        wrap_angle(next[0]),
        next[1].clamp(-PENDULUM_MAX_SPEED, PENDULUM_MAX_SPEED),
    ];
    (next_s, reward, false)
}

/// Total mechanical energy of the pendulum, offset so it is non-negative.
/// Useful as an integration-accuracy diagnostic when no torque is applied.
pub fn pendulum_energy(s: &[f64]) -> f64 {
    let inertia = 1.0 / 3.0;
    0.5 * inertia * s[1] * s[1] + 0.5 * PENDULUM_G * (1.0 + s[0].cos())
}

fn cartpole_step(spec: &EnvSpec, s: &[f64], a: &[f64]) -> (Vec<f64>, f64, bool) {
    let force = CARTPOLE_FORCE * a[0];
    let (masscart, masspole, half_len) = (1.0, 0.1, 0.5);
    let total_mass = masscart + masspole;
    let polemass_length = masspole * half_len;
    let gravity = 9.8;
    let next = rk4(s, spec.dt, |x| {
        let (x_dot, theta, theta_dot) = (x[1], x[2], x[3]);
        let (sin_t, cos_t) = theta.sin_cos();
        let temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
        let theta_acc = (gravity * sin_t - cos_t * temp)
            / (half_len * (4.0 / 3.0 - masspole * cos_t * cos_t / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;
        vec![x_dot, x_acc, theta_dot, theta_acc]
    });
    let failed = next[0].abs() > CARTPOLE_X_LIMIT || next[2].abs() > CARTPOLE_THETA_LIMIT;
    (next, 1.0, failed)
}

fn pointmass_step(spec: &EnvSpec, s: &[f64], a: &[f64]) -> (Vec<f64>, f64, bool) {
    let dx = s[0] - POINTMASS_GOAL[0];
    let dy = s[1] - POINTMASS_GOAL[1];
    let reward = -(dx * dx + dy * dy + 0.01 * (a[0] * a[0] + a[1] * a[1]));
    let next = rk4(s, spec.dt, |x| {
        vec![
            x[2],
            x[3],
            a[0] - POINTMASS_DAMPING * x[2],
            a[1] - POINTMASS_DAMPING * x[3],
        ]
    });
    let next_s = vec![
        next[0].clamp(-POINTMASS_MAX_POS, POINTMASS_MAX_POS),
        next[1].clamp(-POINTMASS_MAX_POS, POINTMASS_MAX_POS),
        next[2].clamp(-POINTMASS_MAX_SPEED, POINTMASS_MAX_SPEED),
        next[3].clamp(-POINTMASS_MAX_SPEED, POINTMASS_MAX_SPEED),
    ];
    (next_s, reward, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reset_is_reproducible_and_in_range() {
        let spec = EnvSpec::for_kind(EnvKind::Pendulum);
        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let a = reset(&spec, &mut r1);
        let b = reset(&spec, &mut r2);
        assert_eq!(a, b);
        assert!(a.s[0].abs() <= std::f64::consts::PI);
        assert!(a.s[1].abs() <= 1.0);
        assert_eq!(a.t, 0);
        assert!(!a.done);

        let cp = EnvSpec::for_kind(EnvKind::CartpoleContinuous);
        let st = reset(&cp, &mut r1);
        assert!(st.s.iter().all(|v| v.abs() <= 0.05));
    }

    #[test]
    fn pendulum_equilibria() {
        let spec = EnvSpec::for_kind(EnvKind::Pendulum);
        let upright = EnvState {
            s: vec![0.0, 0.0],
            t: 0,
            done: false,
        };
        let (next, r) = step(&spec, &upright, &[0.0]).unwrap();
        assert_eq!(next.s, vec![0.0, 0.0]);
        assert_eq!(r, 0.0);

        let hanging = EnvState {
            s: vec![std::f64::consts::PI, 0.0],
            t: 0,
            done: false,
        };
        let (next, r) = step(&spec, &hanging, &[0.0]).unwrap();
        assert!((next.s[0].abs() - std::f64::consts::PI).abs() < 1e-12);
        assert!(next.s[1].abs() < 1e-12);
        assert!((r + std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn pendulum_free_swing_conserves_energy() {
        // RK4 at dt = 0.05 vs the exact invariant, and vs fine-grained Euler.
        let spec = EnvSpec::for_kind(EnvKind::Pendulum);
        let mut state = EnvState {
            s: vec![std::f64::consts::FRAC_PI_2, 0.0],
            t: 0,
            done: false,
        };
        let e0 = pendulum_energy(&state.s);
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let (next, _) = step(&spec, &state, &[0.0]).unwrap();
            state = EnvState { t: 0, ..next };
            worst = worst.max((pendulum_energy(&state.s) - e0).abs() / e0);
        }
        assert!(worst < 1e-4, "relative energy drift {worst:e}");

        // Independent integration: Euler at dt = 1e-5 for one coarse step.
        let fine_dt = 1e-5;
        let mut th = std::f64::consts::FRAC_PI_2;
        let mut thd = 0.0;
        for _ in 0..(0.05 / fine_dt) as usize {
            let acc = 1.5 * PENDULUM_G * th.sin();
            th += fine_dt * thd;
            thd += fine_dt * acc;
        }
        let coarse = step(
            &spec,
            &EnvState {
                s: vec![std::f64::consts::FRAC_PI_2, 0.0],
                t: 0,
                done: false,
            },
            &[0.0],
        )
        .unwrap()
        .0;
        assert!((coarse.s[0] - th).abs() < 1e-4, "{} vs {}", coarse.s[0], th);
        assert!((coarse.s[1] - thd).abs() < 1e-3, "{} vs {}", coarse.s[1], thd);
    }

    #[test]
    fn step_is_pure() {
        let spec = EnvSpec::for_kind(EnvKind::Pointmass);
        let state = EnvState {
            s: vec![-1.0, -1.0, 0.3, -0.2],
            t: 5,
            done: false,
        };
        let (a1, r1) = step(&spec, &state, &[0.5, -0.5]).unwrap();
        let (a2, r2) = step(&spec, &state, &[0.5, -0.5]).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(r1.to_bits(), r2.to_bits());
    }

    #[test]
    fn stepping_done_state_errors() {
        let spec = EnvSpec::for_kind(EnvKind::Pendulum);
        let state = EnvState {
            s: vec![0.0, 0.0],
            t: 200,
            done: true,
        };
        assert!(matches!(
            step(&spec, &state, &[0.0]),
            Err(EnvError::EpisodeDone { .. })
        ));
    }

    #[test]
    fn horizon_sets_done() {
        let spec = EnvSpec::for_kind(EnvKind::Pendulum);
        let state = EnvState {
            s: vec![1.0, 0.0],
            t: 199,
            done: false,
        };
        let (next, _) = step(&spec, &state, &[0.0]).unwrap();
        assert!(next.done);
        assert_eq!(next.t, 200);
    }

    #[test]
    fn cartpole_fails_outside_limits() {
        let spec = EnvSpec::for_kind(EnvKind::CartpoleContinuous);
        let state = EnvState {
            s: vec![0.0, 0.0, 0.20, 1.5],
            t: 0,
            done: false,
        };
        let (next, r) = step(&spec, &state, &[0.0]).unwrap();
        assert_eq!(r, 1.0);
        assert!(next.done, "tilting pole should end the episode");
    }

    #[test]
    fn pendulum_reward_is_bounded() {
        let spec = EnvSpec::for_kind(EnvKind::Pendulum);
        let bound = std::f64::consts::PI.powi(2) + 0.1 * 64.0 + 0.001;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = reset(&spec, &mut rng);
        for _ in 0..500 {
            let a = [rng.random_range(-1.0..=1.0)];
            let (next, r) = step(&spec, &state, &a).unwrap();
            assert!(r <= 0.0 && r >= -bound, "reward {r} outside [-{bound}, 0]");
            state = if next.done {
                reset(&spec, &mut rng)
            } else {
                next
            };
        }
    }

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let x = 0.37 * k as f64;
            let w = wrap_angle(x);
            assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
            let turns = ((w - x) / (2.0 * std::f64::consts::PI)).rem_euclid(1.0);
            assert!(turns < 1e-9 || turns > 1.0 - 1e-9, "off by {turns} turns");
        }
    }
}
