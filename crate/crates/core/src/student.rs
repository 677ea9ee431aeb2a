//! Observation-space student trained purely from buffer samples: p-norm
//! behavior cloning toward the teacher's policy mean, closed-form KL
//! matching, the asymmetric critic-guided update (student action, privileged
//! critic), or the combined BC + asymmetric loss. The teacher is always a
//! constant target here: no gradient ever reaches its parameters.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::FeatureMap;
use crate::numcore::checkpoint::{self, CheckpointError};
use crate::numcore::kernels::fast_exp;
use crate::numcore::{
    adam_step, standard_normal, Activation, AdamState, GaussianPolicy, Mlp, PNorm, Tape,
};
use crate::replay::MiniBatch;
use crate::teacher::TeacherAgent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    BcL1,
    BcL2,
    Kl,
    Asym,
    Combined,
}

impl LossMode {
    pub fn name(&self) -> &'static str {
        match self {
            LossMode::BcL1 => "bc_l1",
            LossMode::BcL2 => "bc_l2",
            LossMode::Kl => "kl",
            LossMode::Asym => "asym",
            LossMode::Combined => "combined",
        }
    }
}

/// Loss components of one student update. For the combined mode,
/// `total == bc_component + asym_component` exactly; single-component modes
/// report their value in the matching slot and zero in the other (the KL
/// mode reports under `bc_component`, it is the imitation term).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StudentLossReport {
    pub bc_component: f64,
    pub asym_component: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct StudentAgent {
    pub policy: GaussianPolicy,
    pub loss_mode: LossMode,
    opt: AdamState,
}

impl StudentAgent {
    pub fn new<R: Rng>(
        features: FeatureMap,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        loss_mode: LossMode,
        learning_rate: f64,
        rng: &mut R,
    ) -> Self {
        let mut dims = vec![features.feature_dim()];
        dims.extend_from_slice(hidden);
        dims.push(2 * action_dim);
        let policy = GaussianPolicy::new(Mlp::new(&dims, activation, rng), action_dim, features);
        let opt = AdamState::for_params(learning_rate, &policy.net.params());
        StudentAgent {
            policy,
            loss_mode,
            opt,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.policy.action_dim()
    }

    /// Deterministic (or squashed-sample) action on an observation, scaled to
    /// the teacher's action bounds.
    pub fn act<R: Rng>(
        &self,
        o: &[f64],
        deterministic: bool,
        action_low: f64,
        action_high: f64,
        rng: &mut R,
    ) -> Vec<f64> {
        let head = self.policy.head(o);
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
        let c = 0.5 * (action_low + action_high);
        let h = 0.5 * (action_high - action_low);
        normalized.iter().map(|&a| c + h * a).collect()
    }

    /// Mean over the batch of || mu_s(o) - mu_t(s) ||_p; the teacher mean is
    /// a constant target.
    pub fn bc_loss(&self, teacher: &TeacherAgent, batch: &MiniBatch, p: PNorm) -> f64 {
        let m = batch.rows;
        let d = self.action_dim();
        let (mu_s, _) = self.policy.heads_plain(&batch.o, m);
        let (mu_t, _) = teacher.policy.heads_plain(&batch.s, m);
        let mut acc = 0.0;
        for i in 0..m {
            let mut norm = 0.0;
            for j in 0..d {
                let diff = mu_s[i * d + j] - mu_t[i * d + j];
                match p {
                    PNorm::L1 => norm += diff.abs(),
                    PNorm::L2 => norm += diff * diff,
                }
            }
            acc += match p {
                PNorm::L1 => norm,
                PNorm::L2 => norm.sqrt(),
            };
        }
        acc / m as f64
    }

    /// Mean over the batch of KL(student(.|o) || teacher(.|s)), closed form
    /// on the pre-squash Gaussians; the teacher head is constant.
    pub fn kl_loss(&self, teacher: &TeacherAgent, batch: &MiniBatch) -> f64 {
        let m = batch.rows;
        let d = self.action_dim();
        let (mu_s, ls_s) = self.policy.heads_plain(&batch.o, m);
        let (mu_t, ls_t) = teacher.policy.heads_plain(&batch.s, m);
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..d {
                let idx = i * d + j;
                let vp = fast_exp(2.0 * ls_s[idx]);
                let vq = fast_exp(2.0 * ls_t[idx]);
                let dm = mu_s[idx] - mu_t[idx];
                acc += (ls_t[idx] - ls_s[idx]) + (vp + dm * dm) / (2.0 * vq) - 0.5;
            }
        }
        (acc / m as f64).max(0.0)
    }

    /// Mean over the batch of temp log p_s(a|o) - min Q(s, a): the action is
    /// the student's reparameterized sample, the critic sees the privileged
    /// state. `noise` is a [rows, action_dim] standard-normal draw.
    pub fn asym_loss(&self, teacher: &TeacherAgent, batch: &MiniBatch, noise: &[f64]) -> f64 {
        let m = batch.rows;
        let d = self.action_dim();
        let (mu, ls) = self.policy.heads_plain(&batch.o, m);
        let c = 0.5 * (teacher.action_low + teacher.action_high);
        let h = 0.5 * (teacher.action_high - teacher.action_low);
        let mut actions = vec![0.0; m * d];
        let mut log_probs = vec![0.0; m];
        for i in 0..m {
            let head = crate::numcore::DiagGaussianHead::new(
                mu[i * d..(i + 1) * d].to_vec(),
                ls[i * d..(i + 1) * d].to_vec(),
            );
            let (a, lp) = crate::numcore::sample_squashed(&head, &noise[i * d..(i + 1) * d]);
            for j in 0..d {
                actions[i * d + j] = c + h * a[j];
            }
            log_probs[i] = lp;
        }
        let qmin = teacher.critics.min_q_plain(&batch.s, &actions, m);
        let mut acc = 0.0;
        for i in 0..m {
            acc += teacher.entropy_temp * log_probs[i] - qmin[i];
        }
        acc / m as f64
    }

    /// One optimizer step on the configured loss; combined mode is the L1 BC
    /// term plus the asymmetric term on the same samples.
    pub fn update<R: Rng>(
        &mut self,
        tape: &mut Tape,
        teacher: &TeacherAgent,
        batch: &MiniBatch,
        rng: &mut R,
    ) -> StudentLossReport {
        let noise = standard_normal(rng, batch.rows * self.action_dim());
        self.update_with_noise(tape, teacher, batch, &noise)
    }

    pub fn update_with_noise(
        &mut self,
        tape: &mut Tape,
        teacher: &TeacherAgent,
        batch: &MiniBatch,
        noise: &[f64],
    ) -> StudentLossReport {
        let m = batch.rows;
        assert!(m > 0, "empty batch");
        assert_eq!(
            batch.obs_dim,
            self.obs_dim(),
            "batch observation dim does not match the student policy"
        );
        tape.clear();
        let o = self.policy.input_node(tape, &batch.o, m);
        let pb = self.policy.net.bind(tape, true);
        let (mean, log_std) = self.policy.forward_heads(tape, &pb, o);

        let mut bc_node = None;
        let mut asym_node = None;
        match self.loss_mode {
            LossMode::BcL1 => bc_node = Some(self.bc_graph(tape, teacher, batch, mean, PNorm::L1)),
            LossMode::BcL2 => bc_node = Some(self.bc_graph(tape, teacher, batch, mean, PNorm::L2)),
            LossMode::Kl => bc_node = Some(self.kl_graph(tape, teacher, batch, mean, log_std)),
            LossMode::Asym => {
                asym_node = Some(self.asym_graph(tape, teacher, batch, mean, log_std, noise))
            }
            LossMode::Combined => {
                bc_node = Some(self.bc_graph(tape, teacher, batch, mean, PNorm::L1));
                asym_node = Some(self.asym_graph(tape, teacher, batch, mean, log_std, noise));
            }
        }
        let loss = match (bc_node, asym_node) {
            (Some(b), Some(a)) => tape.add(b, a),
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!(),
        };
        tape.backward(loss);
        self.policy.net.zero_grads();
        self.policy.net.absorb_grads(tape, &pb);
        let mut params = self.policy.net.params_mut();
        adam_step(&mut params, &mut self.opt);

        StudentLossReport {
            bc_component: bc_node.map(|n| tape.scalar(n)).unwrap_or(0.0),
            asym_component: asym_node.map(|n| tape.scalar(n)).unwrap_or(0.0),
            total: tape.scalar(loss),
        }
    }

    fn bc_graph(
        &self,
        tape: &mut Tape,
        teacher: &TeacherAgent,
        batch: &MiniBatch,
        student_mean: crate::numcore::NodeId,
        p: PNorm,
    ) -> crate::numcore::NodeId {
        let m = batch.rows;
        let d = self.action_dim();
        let (mu_t, _) = teacher.policy.heads_plain(&batch.s, m);
        let target = tape.constant(m, d, &mu_t);
        let diff = tape.sub(student_mean, target);
        let norms = tape.row_pnorm(diff, p);
        tape.mean_all(norms)
    }

    fn kl_graph(
        &self,
        tape: &mut Tape,
        teacher: &TeacherAgent,
        batch: &MiniBatch,
        student_mean: crate::numcore::NodeId,
        student_log_std: crate::numcore::NodeId,
    ) -> crate::numcore::NodeId {
        let m = batch.rows;
        let d = self.action_dim();
        let (mu_t, ls_t) = teacher.policy.heads_plain(&batch.s, m);
        let inv_two_var: Vec<f64> = ls_t.iter().map(|&l| 0.5 * fast_exp(-2.0 * l)).collect();
        let mu_t_node = tape.constant(m, d, &mu_t);
        let ls_t_node = tape.constant(m, d, &ls_t);
        let inv_node = tape.constant(m, d, &inv_two_var);

        let log_ratio = tape.sub(ls_t_node, student_log_std);
        let two_ls = tape.scale(student_log_std, 2.0);
        let var_s = tape.exp(two_ls);
        let dm = tape.sub(student_mean, mu_t_node);
        let dm2 = tape.square(dm);
        let numer = tape.add(var_s, dm2);
        let ratio = tape.mul(numer, inv_node);
        let summed = tape.add(log_ratio, ratio);
        let terms = tape.add_scalar(summed, -0.5);
        let rows = tape.sum_rows(terms);
        tape.mean_all(rows)
    }

    fn asym_graph(
        &self,
        tape: &mut Tape,
        teacher: &TeacherAgent,
        batch: &MiniBatch,
        student_mean: crate::numcore::NodeId,
        student_log_std: crate::numcore::NodeId,
        noise: &[f64],
    ) -> crate::numcore::NodeId {
        let m = batch.rows;
        let sample = self
            .policy
            .sample_graph(tape, student_mean, student_log_std, noise);
        let c = 0.5 * (teacher.action_low + teacher.action_high);
        let h = 0.5 * (teacher.action_high - teacher.action_low);
        let action_env = if c == 0.0 && h == 1.0 {
            sample.action
        } else {
            let scaled = tape.scale(sample.action, h);
            tape.add_scalar(scaled, c)
        };
        let s_feat = teacher.critics.features.apply_batch(&batch.s, m);
        let s_node = tape.constant(m, teacher.critics.features.feature_dim(), &s_feat);
        let sa = tape.concat_cols(s_node, action_env);
        let q1b = teacher.critics.q1.bind(tape, false);
        let q1 = teacher.critics.q1.forward_bound(tape, &q1b, sa);
        let q2b = teacher.critics.q2.bind(tape, false);
        let q2 = teacher.critics.q2.forward_bound(tape, &q2b, sa);
        let qmin = tape.min_elem(q1, q2);
        let ent = tape.scale(sample.log_prob, teacher.entropy_temp);
        let per_sample = tape.sub(ent, qmin);
        tape.mean_all(per_sample)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), CheckpointError> {
        checkpoint::save_file(path, &self.policy.net.named_params("policy"))
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<(), CheckpointError> {
        let loaded = checkpoint::load_file(path)?;
        checkpoint::restore_into(&loaded, self.policy.net.named_params_mut("policy"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::TeacherHyper;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn teacher(seed: u64) -> TeacherAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TeacherAgent::new(
            &TeacherHyper {
                features: FeatureMap::identity(2),
                action_dim: 2,
                action_low: -1.0,
                action_high: 1.0,
                hidden: &[24, 24],
                activation: Activation::Tanh,
                gamma: 0.99,
                tau: 0.005,
                entropy_temp: 0.0,
                learning_rate: 1e-3,
            },
            &mut rng,
        )
    }

    fn student_like(teacher: &TeacherAgent, mode: LossMode, lr: f64) -> StudentAgent {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut s = StudentAgent::new(FeatureMap::identity(2), 2, &[24, 24], Activation::Tanh, mode, lr, &mut rng);
        // Copy the teacher's policy so both heads agree exactly.
        for (dst, src) in s
            .policy
            .net
            .params_mut()
            .into_iter()
            .zip(teacher.policy.net.params().into_iter())
        {
            dst.data_mut().copy_from_slice(src.data());
        }
        s
    }

    fn clean_batch(rows: usize) -> MiniBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..rows * 2).map(|_| rng.random_range(-1.0..1.0)).collect();
        MiniBatch {
            rows,
            state_dim: 2,
            obs_dim: 2,
            action_dim: 2,
            s: s.clone(),
            o: s.clone(), // alpha = 0: o == s
            a: vec![0.0; rows * 2],
            r: vec![0.0; rows],
            s_next: s.clone(),
            o_next: s,
            done: vec![0.0; rows],
        }
    }

    #[test]
    fn identical_policies_clean_observations_zero_losses() {
        let t = teacher(1);
        let s = student_like(&t, LossMode::Combined, 1e-3);
        let batch = clean_batch(16);
        assert_eq!(s.bc_loss(&t, &batch, PNorm::L1), 0.0);
        assert_eq!(s.bc_loss(&t, &batch, PNorm::L2), 0.0);
        assert_eq!(s.kl_loss(&t, &batch), 0.0);
    }

    #[test]
    fn bc_loss_hand_arithmetic() {
        // mu_s - mu_t = [1, 0] per row: L1 = L2 = 1. And [1, 1]: L1 = 2,
        // L2 = sqrt(2). Checked through the public losses by forcing biases.
        let t = teacher(2);
        let mut s = student_like(&t, LossMode::BcL1, 1e-3);
        let batch = clean_batch(4);
        let (mu_t, _) = t.policy.heads_plain(&batch.o, batch.rows);

        // Zero out both nets, then set output biases directly so the policy
        // means are the constants we want.
        let set_mean_bias = |agent_net: &mut Mlp, mean: [f64; 2]| {
            for tens in agent_net.params_mut() {
                tens.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
            let mut params = agent_net.params_mut();
            // Last bias tensor is the output layer's: [mean0, mean1, ls0, ls1].
            let last = params.len() - 1;
            params[last].data_mut()[0] = mean[0];
            params[last].data_mut()[1] = mean[1];
        };
        let mut t2 = t.clone();
        set_mean_bias(&mut t2.policy.net, [0.0, 0.0]);
        set_mean_bias(&mut s.policy.net, [1.0, 0.0]);
        assert!((s.bc_loss(&t2, &batch, PNorm::L1) - 1.0).abs() < 1e-12);
        assert!((s.bc_loss(&t2, &batch, PNorm::L2) - 1.0).abs() < 1e-12);
        set_mean_bias(&mut s.policy.net, [1.0, 1.0]);
        assert!((s.bc_loss(&t2, &batch, PNorm::L1) - 2.0).abs() < 1e-12);
        assert!((s.bc_loss(&t2, &batch, PNorm::L2) - 2.0f64.sqrt()).abs() < 1e-12);
        let _ = mu_t;
    }

    #[test]
    fn kl_loss_mean_gap_half() {
        // Unit variances (log_std = 0), mean gap 1 in one coordinate -> 0.5.
        let t = teacher(3);
        let mut s = student_like(&t, LossMode::Kl, 1e-3);
        let batch = clean_batch(4);
        let mut t2 = t.clone();
        for net in [&mut t2.policy.net, &mut s.policy.net] {
            for tens in net.params_mut() {
                tens.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let mut params = s.policy.net.params_mut();
        let last = params.len() - 1;
        params[last].data_mut()[0] = 1.0; // student mean = [1, 0], log_std = 0
        assert!((s.kl_loss(&t2, &batch) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_loss_matches_monte_carlo_on_seeded_batch() {
        let t = teacher(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut s = StudentAgent::new(FeatureMap::identity(2), 2, &[24, 24], Activation::Tanh, LossMode::Kl, 1e-3, &mut rng);
        // Perturb the student so the KL is nonzero.
        for tens in s.policy.net.params_mut() {
            for v in tens.data_mut() {
                *v += rng.random_range(-0.05..0.05);
            }
        }
        let batch = clean_batch(3);
        let closed = s.kl_loss(&t, &batch);

        // Monte-Carlo per batch row on the pre-squash Gaussians.
        let (mu_s, ls_s) = s.policy.heads_plain(&batch.o, batch.rows);
        let (mu_t, ls_t) = t.policy.heads_plain(&batch.s, batch.rows);
        let n = 300_000usize;
        let mut acc = 0.0;
        for row in 0..batch.rows {
            for _ in 0..n {
                for j in 0..2 {
                    let idx = row * 2 + j;
                    let eps: f64 = rng.sample(rand_distr::StandardNormal);
                    let x = mu_s[idx] + ls_s[idx].exp() * eps;
                    let zp = (x - mu_s[idx]) / ls_s[idx].exp();
                    let zq = (x - mu_t[idx]) / ls_t[idx].exp();
                    acc += (-ls_s[idx] - 0.5 * zp * zp) - (-ls_t[idx] - 0.5 * zq * zq);
                }
            }
        }
        let mc = acc / (n as f64 * batch.rows as f64);
        assert!(
            (mc - closed).abs() / closed.max(1e-9) < 0.01,
            "MC {mc} vs closed {closed}"
        );
    }

    #[test]
    fn flat_critic_zero_temp_gives_zero_asym_gradient() {
        let mut t = teacher(5);
        t.entropy_temp = 0.0;
        for net in [&mut t.critics.q1, &mut t.critics.q2] {
            for tens in net.params_mut() {
                tens.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let mut s = student_like(&t, LossMode::Asym, 1e-3);
        let before: Vec<f64> = s
            .policy
            .net
            .params()
            .iter()
            .flat_map(|p| p.data().to_vec())
            .collect();
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let batch = clean_batch(8);
        s.update(&mut tape, &t, &batch, &mut rng);
        let after: Vec<f64> = s
            .policy
            .net
            .params()
            .iter()
            .flat_map(|p| p.data().to_vec())
            .collect();
        assert_eq!(before, after);
    }

    #[test]
    fn asym_matches_teacher_actor_loss_for_identical_policies() {
        let t = teacher(6);
        let s = student_like(&t, LossMode::Asym, 1e-3);
        let batch = clean_batch(32);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = standard_normal(&mut rng, 32 * 2);
        let student_loss = s.asym_loss(&t, &batch, &noise);
        let teacher_loss = t.actor_loss_value(&batch, &noise);
        assert!(
            (student_loss - teacher_loss).abs() < 1e-10,
            "asym {student_loss} vs actor {teacher_loss}"
        );
    }

    #[test]
    fn combined_report_is_additive() {
        let t = teacher(8);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut s = StudentAgent::new(
            FeatureMap::identity(2),
            2,
            &[24, 24],
            Activation::Tanh,
            LossMode::Combined,
            1e-3,
            &mut rng,
        );
        let batch = clean_batch(16);
        let mut tape = Tape::new();
        let report = s.update(&mut tape, &t, &batch, &mut rng);
        assert_eq!(report.total, report.bc_component + report.asym_component);
        assert!(report.bc_component >= 0.0);
    }

    #[test]
    fn no_gradient_reaches_teacher_parameters() {
        let t = teacher(9);
        let mut s = student_like(&t, LossMode::Combined, 1e-3);
        // Make the student differ so losses are nonzero.
        for tens in s.policy.net.params_mut() {
            for v in tens.data_mut() {
                *v += 0.01;
            }
        }
        let batch = clean_batch(8);
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        s.update(&mut tape, &t, &batch, &mut rng);
        for p in t
            .policy
            .net
            .params()
            .iter()
            .chain(t.critics.q1.params().iter())
            .chain(t.critics.q2.params().iter())
        {
            assert!(p.grad().is_none(), "teacher parameter received a gradient");
        }
    }

    #[test]
    fn overfitting_one_frozen_batch_drives_bc_l2_to_zero() {
        let t = teacher(12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut s = StudentAgent::new(
            FeatureMap::identity(2),
            2,
            &[24, 24],
            Activation::Tanh,
            LossMode::BcL2,
            3e-4,
            &mut rng,
        );
        let batch = clean_batch(16);
        let mut tape = Tape::new();
        let mut prev = f64::INFINITY;
        let mut first = 0.0;
        for k in 0..100 {
            let report = s.update(&mut tape, &t, &batch, &mut rng);
            if k == 0 {
                first = report.total;
            }
            assert!(
                report.total <= prev + 1e-6,
                "loss rose at step {k}: {prev} -> {}",
                report.total
            );
            prev = report.total;
        }
        assert!(
            prev < 0.05 * first,
            "loss did not approach zero: {first} -> {prev}"
        );
    }

    #[test]
    fn identical_policy_update_is_a_fixed_point_for_bc() {
        let t = teacher(14);
        let mut s = student_like(&t, LossMode::BcL2, 1e-3);
        let before: Vec<f64> = s
            .policy
            .net
            .params()
            .iter()
            .flat_map(|p| p.data().to_vec())
            .collect();
        let batch = clean_batch(8);
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let report = s.update(&mut tape, &t, &batch, &mut rng);
        assert_eq!(report.total, 0.0);
        let after: Vec<f64> = s
            .policy
            .net
            .params()
            .iter()
            .flat_map(|p| p.data().to_vec())
            .collect();
        assert_eq!(before, after);
    }
}
