//! Adversarial reward estimation from demonstrations: parameterized reward
//! models trained by gradient ascent on the gap between expert and policy
//! reward, with a quadratic regularizer that keeps estimates from exploding.
//! Estimates consumed by the critic are clamped to +-output_bound, so critic
//! targets stay bounded by output_bound / (1 - gamma).

use std::path::Path;

use rand::Rng;

use crate::envs::FeatureMap;
use crate::numcore::checkpoint::{self, CheckpointError};
use crate::numcore::{adam_step, Activation, AdamState, Mlp, Tape};
use crate::teacher::concat_rows;

#[derive(Debug, Clone)]
pub struct RewardModel {
    pub net: Mlp,
    pub features: FeatureMap,
    pub psi_coeff: f64,
    pub output_bound: f64,
    pub eta: f64,
    action_dim: usize,
    opt: AdamState,
}

impl RewardModel {
    pub fn new<R: Rng>(
        features: FeatureMap,
        action_dim: usize,
        hidden: &[usize],
        activation: Activation,
        psi_coeff: f64,
        output_bound: f64,
        eta: f64,
        rng: &mut R,
    ) -> Self {
        assert!(psi_coeff >= 0.0, "psi_coeff must be non-negative");
        assert!(output_bound > 0.0, "output_bound must be positive");
        let mut dims = vec![features.feature_dim() + action_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let net = Mlp::new(&dims, activation, rng);
        let opt = AdamState::for_params(eta, &net.params());
        RewardModel {
            net,
            features,
            psi_coeff,
            output_bound,
            eta,
            action_dim,
            opt,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    fn input_rows(&self, s_raw: &[f64], actions: &[f64], rows: usize) -> Vec<f64> {
        let feat = self.features.apply_batch(s_raw, rows);
        concat_rows(&feat, self.features.feature_dim(), actions, self.action_dim, rows)
    }

    /// Clamped scalar reward per (raw state, action) row.
    pub fn estimate_rewards(&self, s_raw: &[f64], actions: &[f64], rows: usize) -> Vec<f64> {
        let pairs = self.input_rows(s_raw, actions, rows);
        self.net
            .forward_plain(&pairs, rows)
            .into_iter()
            .map(|r| r.clamp(-self.output_bound, self.output_bound))
            .collect()
    }

    /// One ascent step on
    ///   mean r(expert) - mean r(policy) - psi * mean r^2 over both batches.
    /// Raw (unclamped) outputs drive the gradient so it cannot die at the
    /// clamp; returns the objective value at the pre-step parameters.
    ///
    /// The expert and policy branches are backpropagated separately and
    /// combined in the parameter gradients, so identical batches cancel
    /// exactly (the gradient is +0.0, not merely small).
    pub fn ascent_update(&mut self, tape: &mut Tape, expert: PairBatch, policy: PairBatch) -> f64 {
        let (expert_rows, policy_rows) = (expert.rows, policy.rows);
        assert!(expert_rows > 0 && policy_rows > 0, "empty reward batch");
        let expert_pairs = self.input_rows(expert.states, expert.actions, expert_rows);
        let policy_pairs = self.input_rows(policy.states, policy.actions, policy_rows);
        tape.clear();
        let dim = self.input_dim();
        let e_in = tape.constant(expert_rows, dim, &expert_pairs);
        let p_in = tape.constant(policy_rows, dim, &policy_pairs);
        let binding = self.net.bind(tape, true);
        let r_e = self.net.forward_bound(tape, &binding, e_in);
        let r_p = self.net.forward_bound(tape, &binding, p_in);
        let mean_e = tape.mean_all(r_e);
        let mean_p = tape.mean_all(r_p);

        // The union mean of r^2 splits into per-branch weighted means.
        let total = (expert_rows + policy_rows) as f64;
        let sq_e = tape.square(r_e);
        let mean_sq_e = tape.mean_all(sq_e);
        let sq_p = tape.square(r_p);
        let mean_sq_p = tape.mean_all(sq_p);

        // Descent loss split by branch: loss_e + loss_p = -objective.
        let neg_mean_e = tape.scale(mean_e, -1.0);
        let psi_e = tape.scale(mean_sq_e, self.psi_coeff * expert_rows as f64 / total);
        let loss_e = tape.add(neg_mean_e, psi_e);
        let psi_p = tape.scale(mean_sq_p, self.psi_coeff * policy_rows as f64 / total);
        let loss_p = tape.add(mean_p, psi_p);

        self.net.zero_grads();
        tape.backward(loss_e);
        self.net.absorb_grads(tape, &binding);
        tape.backward(loss_p);
        self.net.absorb_grads(tape, &binding);
        let mut params = self.net.params_mut();
        adam_step(&mut params, &mut self.opt);
        -(tape.scalar(loss_e) + tape.scalar(loss_p))
    }

    /// Saddle-objective value for diagnostics, on clamped estimates:
    /// mean r(expert) - mean r(policy) - H(pi) - psi * mean r^2.
    pub fn objective_value(&self, expert: PairBatch, policy: PairBatch, entropy_estimate: f64) -> f64 {
        let r_e = self.estimate_rewards(expert.states, expert.actions, expert.rows);
        let r_p = self.estimate_rewards(policy.states, policy.actions, policy.rows);
        let mean_e: f64 = r_e.iter().sum::<f64>() / expert.rows as f64;
        let mean_p: f64 = r_p.iter().sum::<f64>() / policy.rows as f64;
        let sq: f64 = r_e.iter().chain(r_p.iter()).map(|r| r * r).sum::<f64>()
            / (expert.rows + policy.rows) as f64;
        mean_e - mean_p - entropy_estimate - self.psi_coeff * sq
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), CheckpointError> {
        checkpoint::save_file(path, &self.net.named_params("reward"))
    }

    pub fn load_checkpoint(&mut self, path: &Path) -> Result<(), CheckpointError> {
        let loaded = checkpoint::load_file(path)?;
        checkpoint::restore_into(&loaded, self.net.named_params_mut("reward"))
    }
}

/// A borrowed minibatch of (state-like input, action) rows.
#[derive(Debug, Clone, Copy)]
pub struct PairBatch<'a> {
    pub states: &'a [f64],
    pub actions: &'a [f64],
    pub rows: usize,
}

impl<'a> PairBatch<'a> {
    pub fn new(states: &'a [f64], actions: &'a [f64], rows: usize) -> Self {
        PairBatch {
            states,
            actions,
            rows,
        }
    }
}

/// Teacher-side reward update. The policy entropy enters the saddle objective
/// but is constant in the reward parameters, so it only shifts the returned
/// value, never the gradient.
pub fn teacher_reward_update(
    model: &mut RewardModel,
    tape: &mut Tape,
    expert: PairBatch,
    policy: PairBatch,
    policy_entropy_estimate: f64,
) -> f64 {
    model.ascent_update(tape, expert, policy) - policy_entropy_estimate
}

/// Student-side reward update: identical ascent rule, no entropy term. The
/// policy batch pairs observations with actions, the expert batch is the
/// noiseless demonstrations.
pub fn student_reward_update(
    model: &mut RewardModel,
    tape: &mut Tape,
    expert: PairBatch,
    policy: PairBatch,
) -> f64 {
    model.ascent_update(tape, expert, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64, psi: f64) -> RewardModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RewardModel::new(
            FeatureMap::identity(2),
            1,
            &[16, 16],
            Activation::Tanh,
            psi,
            10.0,
            1e-3,
            &mut rng,
        )
    }

    fn zeroed(mut m: RewardModel) -> RewardModel {
        for t in m.net.params_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        m
    }

    #[test]
    fn zero_net_estimates_zero() {
        let m = zeroed(model(0, 0.1));
        let r = m.estimate_rewards(&[0.4, -0.2, 1.0, 2.0], &[0.9, -3.0], 2);
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn linear_model_matches_dot_product() {
        // theta = e1 on a single linear layer: r([2, ...], a) = 2.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = zeroed(RewardModel::new(
            FeatureMap::identity(2),
            1,
            &[],
            Activation::Tanh,
            0.0,
            10.0,
            1e-3,
            &mut rng,
        ));
        m.net.params_mut()[0].data_mut()[0] = 1.0;
        let r = m.estimate_rewards(&[2.0, 5.0], &[-1.0], 1);
        assert_eq!(r, vec![2.0]);
    }

    #[test]
    fn estimates_clamp_exactly_at_the_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = zeroed(RewardModel::new(
            FeatureMap::identity(1),
            1,
            &[],
            Activation::Tanh,
            0.0,
            10.0,
            1e-3,
            &mut rng,
        ));
        m.net.params_mut()[0].data_mut().copy_from_slice(&[100.0, 0.0]);
        let r = m.estimate_rewards(&[1.0, -1.0], &[0.0, 0.0], 2);
        assert_eq!(r, vec![10.0, -10.0]);
    }

    #[test]
    fn identical_batches_no_regularizer_zero_gradient() {
        let mut m = model(3, 0.0);
        let before: Vec<f64> = m.net.params().iter().flat_map(|t| t.data().to_vec()).collect();
        let s = [0.3, -0.8, 1.2, 0.0];
        let a = [0.5, -0.4];
        let mut tape = Tape::new();
        let v = m.ascent_update(&mut tape, PairBatch::new(&s, &a, 2), PairBatch::new(&s, &a, 2));
        assert_eq!(v, 0.0);
        let after: Vec<f64> = m.net.params().iter().flat_map(|t| t.data().to_vec()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn disjoint_batches_move_means_apart() {
        let mut m = model(4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let es: Vec<f64> = (0..20).map(|_| rng.random_range(0.5..1.5)).collect();
        let ea: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..0.5)).collect();
        let ps: Vec<f64> = (0..20).map(|_| rng.random_range(-1.5..-0.5)).collect();
        let pa: Vec<f64> = (0..10).map(|_| rng.random_range(-0.5..0.0)).collect();
        let mean = |m: &RewardModel, s: &[f64], a: &[f64]| -> f64 {
            m.estimate_rewards(s, a, 10).iter().sum::<f64>() / 10.0
        };
        let (e0, p0) = (mean(&m, &es, &ea), mean(&m, &ps, &pa));
        let mut tape = Tape::new();
        m.ascent_update(&mut tape, PairBatch::new(&es, &ea, 10), PairBatch::new(&ps, &pa, 10));
        let (e1, p1) = (mean(&m, &es, &ea), mean(&m, &ps, &pa));
        assert!(e1 > e0, "expert mean should rise: {e0} -> {e1}");
        assert!(p1 < p0, "policy mean should fall: {p0} -> {p1}");
    }

    #[test]
    fn strong_regularizer_shrinks_outputs() {
        let mut m = model(6, 50.0);
        let s: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let a: Vec<f64> = (0..20).map(|i| (i as f64 * 0.53).cos()).collect();
        let magnitude = |m: &RewardModel| -> f64 {
            m.estimate_rewards(&s, &a, 20).iter().map(|r| r.abs()).sum::<f64>() / 20.0
        };
        let before = magnitude(&m);
        let mut tape = Tape::new();
        for _ in 0..500 {
            m.ascent_update(&mut tape, PairBatch::new(&s, &a, 20), PairBatch::new(&s, &a, 20));
        }
        let after = magnitude(&m);
        assert!(
            after < 0.2 * before,
            "outputs should shrink toward zero: {before} -> {after}"
        );
    }

    #[test]
    fn objective_value_hand_computed() {
        // Linear theta = [1, -1, 0] model over (s0, s1, a).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = zeroed(RewardModel::new(
            FeatureMap::identity(2),
            1,
            &[],
            Activation::Tanh,
            0.1,
            10.0,
            1e-3,
            &mut rng,
        ));
        m.net.params_mut()[0]
            .data_mut()
            .copy_from_slice(&[1.0, -1.0, 0.0]);
        // expert rewards: 1, 1, 1; policy rewards: 0, 0, -1.
        let es = [1.0, 0.0, 2.0, 1.0, 0.0, -1.0];
        let ea = [0.0, 0.0, 0.0];
        let ps = [0.0, 0.0, 1.0, 1.0, -1.0, 0.0];
        let pa = [0.0, 0.0, 0.0];
        let entropy = 0.25;
        let got = m.objective_value(PairBatch::new(&es, &ea, 3), PairBatch::new(&ps, &pa, 3), entropy);
        // mean_e = 1, mean_p = -1/3, mean sq = (1+1+1+0+0+1)/6 = 2/3.
        let expect = 1.0 - (-1.0 / 3.0) - 0.25 - 0.1 * (2.0 / 3.0);
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn zero_model_objective_is_negative_entropy() {
        let m = zeroed(model(8, 0.1));
        let s = [0.1, 0.2, 0.3, 0.4];
        let a = [0.5, 0.6];
        let v = m.objective_value(PairBatch::new(&s, &a, 2), PairBatch::new(&s, &a, 2), 1.7);
        assert_eq!(v, -1.7);
    }

    #[test]
    fn entropy_shifts_value_but_not_the_step() {
        let mut m1 = model(9, 0.1);
        let mut m2 = m1.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let es: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ea: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ps: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pa: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut tape = Tape::new();
        let v1 = teacher_reward_update(&mut m1, &mut tape, PairBatch::new(&es, &ea, 10), PairBatch::new(&ps, &pa, 10), 0.0);
        let v2 = teacher_reward_update(&mut m2, &mut tape, PairBatch::new(&es, &ea, 10), PairBatch::new(&ps, &pa, 10), 2.0);
        assert!((v1 - (v2 + 2.0)).abs() < 1e-12);
        for (a, b) in m1.net.params().iter().zip(m2.net.params().iter()) {
            assert_eq!(a.data(), b.data());
        }
    }
}
