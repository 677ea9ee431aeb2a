//! Privileged-state actor-critic teacher: twin soft critics trained by
//! temporal-difference updates against polyak-averaged targets, and a
//! KL-proximal (mirror-descent style) policy step realized as the soft
//! actor-critic objective: minimize E[temp * log pi(a|s) - min(Q1, Q2)(s, a)]
//! with reparameterized actions.

use std::path::Path;

use rand::Rng;

use crate::envs::FeatureMap;
use crate::numcore::checkpoint::{self, CheckpointError};
use crate::numcore::{
    adam_step, standard_normal, Activation, AdamState, GaussianPolicy, Mlp, Tape,
};
use crate::replay::MiniBatch;

/// Twin online critics with their polyak-averaged target copies. Critics
/// evaluate (featurized state, action) pairs.
#[derive(Debug, Clone)]
pub struct CriticEnsemble {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub tau: f64,
    pub features: FeatureMap,
}

impl CriticEnsemble {
    pub fn new<R: Rng>(
        features: FeatureMap,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        tau: f64,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![features.feature_dim() + action_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let q1 = Mlp::new(&dims, activation, rng);
        let q2 = Mlp::new(&dims, activation, rng);
        let q1_target = q1.clone();
        let q2_target = q2.clone();
        CriticEnsemble {
            q1,
            q2,
            q1_target,
            q2_target,
            tau,
            features,
        }
    }

    /// Moves both targets toward their online networks by factor `tau`.
    pub fn polyak_update(&mut self) {
        self.q1_target.polyak_from(&self.q1, self.tau);
        self.q2_target.polyak_from(&self.q2, self.tau);
    }

    /// Featurized (state, action) input rows for the critic networks.
    pub fn input_rows(&self, s_raw: &[f64], actions: &[f64], rows: usize) -> Vec<f64> {
        let feat = self.features.apply_batch(s_raw, rows);
        let a_cols = actions.len() / rows;
        concat_rows(&feat, self.features.feature_dim(), actions, a_cols, rows)
    }

    /// min(Q1_target, Q2_target) on raw states and actions, tape-free.
    pub fn min_q_target_plain(&self, s_raw: &[f64], actions: &[f64], rows: usize) -> Vec<f64> {
        let sa = self.input_rows(s_raw, actions, rows);
        let a = self.q1_target.forward_plain(&sa, rows);
        let b = self.q2_target.forward_plain(&sa, rows);
        a.into_iter().zip(b).map(|(x, y)| x.min(y)).collect()
    }

    /// min(Q1, Q2) on raw states and actions, tape-free.
    pub fn min_q_plain(&self, s_raw: &[f64], actions: &[f64], rows: usize) -> Vec<f64> {
        let sa = self.input_rows(s_raw, actions, rows);
        let a = self.q1.forward_plain(&sa, rows);
        let b = self.q2.forward_plain(&sa, rows);
        a.into_iter().zip(b).map(|(x, y)| x.min(y)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TeacherAgent {
    pub policy: GaussianPolicy,
    pub critics: CriticEnsemble,
    pub entropy_temp: f64,
    pub gamma: f64,
    pub action_low: f64,
    pub action_high: f64,
    policy_opt: AdamState,
    critic_opt: AdamState,
}

pub struct TeacherHyper<'a> {
    pub features: FeatureMap,
    pub action_dim: usize,
    pub action_low: f64,
    pub action_high: f64,
    pub hidden: &'a [usize],
    pub activation: Activation,
    pub gamma: f64,
    pub tau: f64,
    pub entropy_temp: f64,
    pub learning_rate: f64,
}

impl TeacherAgent {
    pub fn new<R: Rng>(h: &TeacherHyper, rng: &mut R) -> Self {
        let mut policy_dims = vec![h.features.feature_dim()];
        policy_dims.extend_from_slice(h.hidden);
        policy_dims.push(2 * h.action_dim);
        let policy = GaussianPolicy::new(
            Mlp::new(&policy_dims, h.activation, rng),
            h.action_dim,
            h.features,
        );
        let critics = CriticEnsemble::new(h.features, h.action_dim, h.hidden, h.activation, h.tau, rng);
        let policy_opt = AdamState::for_params(h.learning_rate, &policy.net.params());
        let critic_sizes: Vec<usize> = critics
            .q1
            .params()
            .iter()
            .chain(critics.q2.params().iter())
            .map(|t| t.numel())
            .collect();
        let critic_opt = AdamState::new(h.learning_rate, &critic_sizes);
        TeacherAgent {
            policy,
            critics,
            entropy_temp: h.entropy_temp,
            gamma: h.gamma,
            action_low: h.action_low,
            action_high: h.action_high,
            policy_opt,
            critic_opt,
        }
    }

    /// Raw state length the agent consumes.
    pub fn state_dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.policy.action_dim()
    }

    fn action_center(&self) -> f64 {
        0.5 * (self.action_low + self.action_high)
    }

    fn action_half_span(&self) -> f64 {
        0.5 * (self.action_high - self.action_low)
    }

    /// Action for state `s`: tanh(mean) when deterministic, a squashed sample
    /// otherwise, scaled into the environment's action bounds.
    pub fn act<R: Rng>(&self, s: &[f64], deterministic: bool, rng: &mut R) -> Vec<f64> {
        let head = self.policy.head(s);
        let normalized: Vec<f64> = if deterministic {
            head.mean
                .data()
                .iter()
                .map(|&m| crate::numcore::kernels::fast_tanh(m))
                .collect()
        } else {
            let noise = standard_normal(rng, self.action_dim());
            crate::numcore::sample_squashed(&head, &noise).0
        };
        let (c, h) = (self.action_center(), self.action_half_span());
        normalized.iter().map(|&a| c + h * a).collect()
    }

    /// Temporal-difference update of both critics on the privileged view.
    ///
    /// Target: y = r + gamma (1 - done) (min Q_target(s', a') - temp log pi(a'|s'))
    /// with a' sampled from the current policy. Returns the summed MSE loss.
    pub fn critic_td_update<R: Rng>(&mut self, tape: &mut Tape, batch: &MiniBatch, rng: &mut R) -> f64 {
        let m = batch.rows;
        assert!(m > 0, "empty batch");
        let d = self.action_dim();
        let noise = standard_normal(rng, m * d);
        let (next_actions_env, next_log_probs) = self.sample_plain(&batch.s_next, m, &noise);

        let q_next = self
            .critics
            .min_q_target_plain(&batch.s_next, &next_actions_env, m);
        let mut target = vec![0.0; m];
        for i in 0..m {
            let soft_value = q_next[i] - self.entropy_temp * next_log_probs[i];
            target[i] = batch.r[i] + self.gamma * (1.0 - batch.done[i]) * soft_value;
        }

        tape.clear();
        let sa = self.critics.input_rows(&batch.s, &batch.a, m);
        let sa_node = tape.constant(m, self.critics.features.feature_dim() + d, &sa);
        let y = tape.constant(m, 1, &target);
        let b1 = self.critics.q1.bind(tape, true);
        let p1 = self.critics.q1.forward_bound(tape, &b1, sa_node);
        let b2 = self.critics.q2.bind(tape, true);
        let p2 = self.critics.q2.forward_bound(tape, &b2, sa_node);
        let d1 = tape.sub(p1, y);
        let sq1 = tape.square(d1);
        let l1 = tape.mean_all(sq1);
        let d2 = tape.sub(p2, y);
        let sq2 = tape.square(d2);
        let l2 = tape.mean_all(sq2);
        let loss = tape.add(l1, l2);
        tape.backward(loss);

        self.critics.q1.zero_grads();
        self.critics.q2.zero_grads();
        self.critics.q1.absorb_grads(tape, &b1);
        self.critics.q2.absorb_grads(tape, &b2);
        let mut params = self.critics.q1.params_mut();
        params.extend(self.critics.q2.params_mut());
        adam_step(&mut params, &mut self.critic_opt);
        tape.scalar(loss)
    }

    /// One policy step on L = E[temp log pi(a|s) - min Q(s, a)], a
    /// reparameterized. Returns the loss value at the pre-update parameters.
    pub fn actor_pmd_update<R: Rng>(&mut self, tape: &mut Tape, batch: &MiniBatch, rng: &mut R) -> f64 {
        let noise = standard_normal(rng, batch.rows * self.action_dim());
        self.actor_update_with_noise(tape, batch, &noise).0
    }

    /// Actor update returning (loss, entropy estimate); the entropy estimate
    /// is -mean log pi(a|s) over this batch's samples.
    pub fn actor_update_full<R: Rng>(
        &mut self,
        tape: &mut Tape,
        batch: &MiniBatch,
        rng: &mut R,
    ) -> (f64, f64) {
        let noise = standard_normal(rng, batch.rows * self.action_dim());
        self.actor_update_with_noise(tape, batch, &noise)
    }

    /// Deterministic core of the actor update, exposed for step-direction
    /// checks: callers can evaluate the same-noise loss before and after.
    pub fn actor_update_with_noise(
        &mut self,
        tape: &mut Tape,
        batch: &MiniBatch,
        noise: &[f64],
    ) -> (f64, f64) {
        tape.clear();
        let (loss, log_prob, pb) = self.actor_loss_graph(tape, batch, noise);
        tape.backward(loss);
        let entropy_estimate = -mean_of(tape.value(log_prob));
        self.policy.net.zero_grads();
        self.policy.net.absorb_grads(tape, &pb);
        let mut params = self.policy.net.params_mut();
        adam_step(&mut params, &mut self.policy_opt);
        (tape.scalar(loss), entropy_estimate)
    }

    /// Records E[temp log pi - min Q] on the tape; critics enter frozen so
    /// only policy parameters receive gradients.
    fn actor_loss_graph(
        &self,
        tape: &mut Tape,
        batch: &MiniBatch,
        noise: &[f64],
    ) -> (crate::numcore::NodeId, crate::numcore::NodeId, crate::numcore::MlpBinding) {
        let m = batch.rows;
        let s = self.policy.input_node(tape, &batch.s, m);
        let pb = self.policy.net.bind(tape, true);
        let (mean, log_std) = self.policy.forward_heads(tape, &pb, s);
        let sample = self.policy.sample_graph(tape, mean, log_std, noise);
        let scaled_action = self.scale_action_node(tape, sample.action);
        // Policy and critics share the same feature encoding, so the policy
        // input node doubles as the critic's state columns.
        let sa = tape.concat_cols(s, scaled_action);
        let q1b = self.critics.q1.bind(tape, false);
        let q1 = self.critics.q1.forward_bound(tape, &q1b, sa);
        let q2b = self.critics.q2.bind(tape, false);
        let q2 = self.critics.q2.forward_bound(tape, &q2b, sa);
        let qmin = tape.min_elem(q1, q2);
        let ent = tape.scale(sample.log_prob, self.entropy_temp);
        let per_sample = tape.sub(ent, qmin);
        let loss = tape.mean_all(per_sample);
        (loss, sample.log_prob, pb)
    }

    /// Same-noise actor loss without any update, for before/after comparisons.
    pub fn actor_loss_value(&self, batch: &MiniBatch, noise: &[f64]) -> f64 {
        let m = batch.rows;
        let (actions_env, log_probs) = self.sample_plain(&batch.s, m, noise);
        let qmin = self.critics.min_q_plain(&batch.s, &actions_env, m);
        let mut acc = 0.0;
        for i in 0..m {
            acc += self.entropy_temp * log_probs[i] - qmin[i];
        }
        acc / m as f64
    }

    fn scale_action_node(&self, tape: &mut Tape, action: crate::numcore::NodeId) -> crate::numcore::NodeId {
        let (c, h) = (self.action_center(), self.action_half_span());
        if c == 0.0 && h == 1.0 {
            return action;
        }
        let scaled = tape.scale(action, h);
        tape.add_scalar(scaled, c)
    }

    /// Tape-free squashed sampling for a batch of states: returns env-scale
    /// actions and per-row log-probabilities.
    pub fn sample_plain(&self, states: &[f64], rows: usize, noise: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.action_dim();
        assert_eq!(noise.len(), rows * d);
        let (means, log_stds) = self.policy.heads_plain(states, rows);
        let (c, h) = (self.action_center(), self.action_half_span());
        let mut actions = vec![0.0; rows * d];
        let mut log_probs = vec![0.0; rows];
        for i in 0..rows {
            let head = crate::numcore::DiagGaussianHead::new(
                means[i * d..(i + 1) * d].to_vec(),
                log_stds[i * d..(i + 1) * d].to_vec(),
            );
            let (a, lp) = crate::numcore::sample_squashed(&head, &noise[i * d..(i + 1) * d]);
            for j in 0..d {
                actions[i * d + j] = c + h * a[j];
            }
            log_probs[i] = lp;
        }
        (actions, log_probs)
    }

    pub fn named_params(&self) -> Vec<(String, &crate::numcore::Tensor)> {
        let mut out = self.policy.net.named_params("policy");
        out.extend(self.critics.q1.named_params("q1"));
        out.extend(self.critics.q2.named_params("q2"));
        out.extend(self.critics.q1_target.named_params("q1_target"));
        out.extend(self.critics.q2_target.named_params("q2_target"));
        out
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), CheckpointError> {
        checkpoint::save_file(path, &self.named_params())
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<(), CheckpointError> {
        let loaded = checkpoint::load_file(path)?;
        let mut targets = self.policy.net.named_params_mut("policy");
        targets.extend(self.critics.q1.named_params_mut("q1"));
        targets.extend(self.critics.q2.named_params_mut("q2"));
        targets.extend(self.critics.q1_target.named_params_mut("q1_target"));
        targets.extend(self.critics.q2_target.named_params_mut("q2_target"));
        checkpoint::restore_into(&loaded, targets)
    }
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Row-wise concatenation of two flat matrices with the same row count.
pub fn concat_rows(a: &[f64], a_cols: usize, b: &[f64], b_cols: usize, rows: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), rows * a_cols);
    debug_assert_eq!(b.len(), rows * b_cols);
    let n = a_cols + b_cols;
    let mut out = vec![0.0; rows * n];
    for i in 0..rows {
        out[i * n..i * n + a_cols].copy_from_slice(&a[i * a_cols..(i + 1) * a_cols]);
        out[i * n + a_cols..(i + 1) * n].copy_from_slice(&b[i * b_cols..(i + 1) * b_cols]);
    }
    out
}
